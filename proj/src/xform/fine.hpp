//===-- fine.hpp - Fine-grained violation elimination -----------*- C++ -*-===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
//
// Count mismatches are fixed by reduction operation rewriting (reduction
// dimensions sunk innermost, stores hoisted behind a temporary accumulator);
// order mismatches by generating and applying a depth-to-depth permutation
// map against a reference loop nest. Residuals downgrade the edge to a
// ping-pong buffer.
//
//===----------------------------------------------------------------------===//

#pragma once

#include "analysis/access.hpp"
#include "ir/graph.hpp"
#include "support/translog.hpp"

#include <functional>
#include <map>

namespace sluice::xform {

/// Bijective mapping from target-nest loop depths to their new depths; a pair
/// {2, 1} moves the target loop at depth 2 to depth 1. The tiling records
/// document unit-size splits used to equalize depth counts.
struct DepthMap {
  std::map<int, int> pairs;
  std::vector<std::pair<int, int>> tilingApplied; // (depth, tile size = 1)

  bool identity() const;
};

struct FineOptions {
  analysis::EnumerationOptions enumeration;
  int maxRounds = 4;
  /// Reference-loop score; higher wins. Defaults to total compute-op
  /// executions with trip-count product as the tie-breaker.
  std::function<std::int64_t(const ir::TaskNode &)> score;
};

std::int64_t defaultNodeScore(const ir::TaskNode &node);

/// Moves the node's reduction dimensions (loops absent from the store
/// subscripts of `array`) innermost, accumulates into a one-element temporary
/// with the op-derived identity, and stores once per index point. Returns the
/// rewritten program. Throws Error{Unresolvable} when dimensions are
/// inseparable; returns the input unchanged when there is nothing to rewrite.
ir::DataflowGraph rewriteReduction(const ir::DataflowGraph &g,
                                   const std::string &producer,
                                   const std::string &array,
                                   TransformLog &log);

/// Builds the Step 1-3 map so the target's traversal of `array` matches the
/// reference's. Returns nullopt with a reason when the correspondence is not
/// bijective or the permutation is illegal.
std::optional<DepthMap>
generatePermutationMap(const ir::DataflowGraph &g, const std::string &reference,
                       const std::string &target, const std::string &array,
                       std::string *reason = nullptr);

/// Reorders the target's outer loop chain per the map; statements and
/// subscripts are untouched.
ir::DataflowGraph applyPermutation(const ir::DataflowGraph &g,
                                   const std::string &target,
                                   const DepthMap &map, TransformLog &log);

/// Per-edge dispatch loop: producer-side count mismatches to reduction
/// rewriting, consumer-side multi-reads annotated for reuse-buffer
/// generation, order mismatches to permutation; residual violations downgrade
/// the edge to ping-pong (recorded, never an error).
ir::DataflowGraph eliminateFine(const ir::DataflowGraph &g, TransformLog &log,
                                const FineOptions &opts = {});

} // namespace sluice::xform
