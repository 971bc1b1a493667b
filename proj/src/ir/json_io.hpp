//===-- json_io.hpp - Program and tensor (de)serialization ------*- C++ -*-===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//

#pragma once

#include "ir/program.hpp"
#include "ir/tensor.hpp"

#include <string>

namespace sluice::ir {

/// Parses and validates a program from its JSON text. Throws Error{Parse} on
/// schema violations and Error{Validation} on broken invariants, each with a
/// source location path.
Program parseProgram(const std::string &text);

/// Canonical JSON serialization; parseProgram(serializeProgram(p)) == p.
std::string serializeProgram(const Program &p);

/// Parses a tensor file: a JSON object mapping array name to a flat
/// row-major value list. Shapes are taken from the program declarations.
TensorMap parseTensors(const std::string &text, const Program &p);

std::string serializeTensors(const TensorMap &tensors);

} // namespace sluice::ir
