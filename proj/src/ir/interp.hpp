//===-- interp.hpp - Sequential reference interpreter -----------*- C++ -*-===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//

#pragma once

#include "ir/program.hpp"
#include "ir/tensor.hpp"

namespace sluice::ir {

/// Numeric semantics for compute ops. Exact mode evaluates over integers
/// (division truncates), removing reassociation ambiguity so transformed
/// programs can be compared bit-exactly; float mode is plain IEEE double.
enum class NumericMode { Float64, ExactInt };

double applyOp(OpKind op, const std::vector<double> &args, NumericMode mode);

/// Executes nodes in program order with loops in lexicographic order; the
/// functional oracle every transformation is checked against. Returns the
/// final value of every array (inputs included). Throws Error on any read of
/// a never-written internal element or an out-of-bounds access.
TensorMap referenceExecute(const Program &p, const TensorMap &inputs,
                           NumericMode mode = NumericMode::Float64);

/// External arrays written by some node (program outputs).
std::vector<std::string> externalOutputs(const Program &p);
/// External arrays read by some node (required inputs).
std::vector<std::string> externalInputs(const Program &p);

/// Deterministic random tensors for every external input: small integers in
/// exact mode (so transformed reductions stay bit-exact), uniform doubles in
/// float mode. Platform-independent for a given seed.
TensorMap randomInputs(const Program &p, std::uint64_t seed,
                       NumericMode mode = NumericMode::Float64);

} // namespace sluice::ir
