//===-- error.hpp - Diagnostics and failure kinds ---------------*- C++ -*-===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//

#pragma once

#include <stdexcept>
#include <string>

namespace sluice {

/// Coarse failure categories. These map onto CLI exit codes and C API status
/// values, so the set is deliberately small.
enum class ErrorKind {
  Parse,        // malformed input or schema violation
  Validation,   // program invariant broken (rank mismatch, duplicate name, ...)
  Unresolvable, // a violation no transformation could eliminate
  Budget,       // resource budget infeasible
  Timeout,      // simulation exceeded its cycle cap
  Internal,     // everything else
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string &message) {
  throw Error(kind, message);
}

} // namespace sluice
