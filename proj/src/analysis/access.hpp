//===-- access.hpp - Access pattern analysis --------------------*- C++ -*-===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//

#pragma once

#include "ir/program.hpp"

#include <optional>
#include <vector>

namespace sluice::analysis {

enum class AccessMode { Read, Write };

/// What a node does to one array over its full iteration domain.
struct AccessSummary {
  // Total element accesses; exact, including guard selection.
  std::int64_t count = 0;
  // Array dimension -> loop depth of the driving variable (nullopt when the
  // subscript is loop-invariant or multi-variable). Taken from the first
  // access site.
  std::vector<std::optional<int>> dimToDepth;
  // Enclosing loops of the first site, outermost first: (var, trip count).
  std::vector<std::pair<std::string, std::int64_t>> orderSignature;
  std::int64_t accessesPerPoint = 1;
  // False when the count had to fall back past the enumeration cap.
  bool exact = true;
};

struct EnumerationOptions {
  std::int64_t cap = 10'000'000; // max addresses per sequence
};

/// The exact address-tuple sequence the node produces on `array` in `mode`,
/// in execution order. Multi-dimensional addresses stay tuples; layout is
/// irrelevant. Returns nullopt when the sequence would exceed the cap.
std::optional<std::vector<std::vector<std::int64_t>>>
enumerateAddresses(const ir::TaskNode &node, const std::string &array,
                   AccessMode mode, const EnumerationOptions &opts = {});

/// Symbolic summary; `count` matches enumerateAddresses(...)->size() exactly
/// whenever the enumeration runs. Throws if the node never touches the array
/// in the given mode.
AccessSummary accessSummary(const ir::TaskNode &node, const std::string &array,
                            AccessMode mode,
                            const EnumerationOptions &opts = {});

bool accessesArray(const ir::TaskNode &node, const std::string &array,
                   AccessMode mode);

/// Streaming-order descriptor for the symbolic fast path: valid only when the
/// node has a single unguarded site whose loops biject onto array dimensions
/// with unit coefficients and unit steps.
struct StreamOrder {
  std::vector<int> dimOrder;        // dims in traversal order, outer->inner
  std::vector<std::int64_t> trips;  // per traversal position
  std::vector<std::int64_t> starts; // per dim: lower bound + offset
  std::vector<std::optional<std::int64_t>> constDims;

  bool operator==(const StreamOrder &) const = default;
};

std::optional<StreamOrder> streamOrder(const ir::TaskNode &node,
                                       const std::string &array,
                                       AccessMode mode);

/// Per-variable inclusive bounds implied by a guard made of non-negated
/// single-variable clauses; nullopt when the guard is not rectangular.
std::optional<std::map<std::string, std::pair<std::int64_t, std::int64_t>>>
rectangularIntervals(const ir::Guard &g);

} // namespace sluice::analysis
