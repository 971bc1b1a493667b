//===-- coarse.hpp - Coarse-grained violation elimination -------*- C++ -*-===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
//
// Pattern-aware transformations restoring the single-producer single-consumer
// property: duplicator insertion for SPMC, node fusion for MPSC, buffer
// cloning for MPMC, and the detect/dispatch fixpoint driver.
//
//===----------------------------------------------------------------------===//

#pragma once

#include "ir/graph.hpp"
#include "support/translog.hpp"

namespace sluice::xform {

struct CoarseOptions {
  int maxRounds = 8;
};

/// Inserts a duplicator node that re-reads `array` in the producer's write
/// order and fans it out to one fresh array per reader. External arrays need
/// no node: each reader keeps its own off-chip read (recorded in the log).
ir::DataflowGraph splitSpmc(const ir::DataflowGraph &g,
                            const std::string &array, TransformLog &log);

/// Fuses all writers of `array` into one node over their shared outer
/// iteration domain. Earlier writers' values are staged in a temporary array
/// and merged by a guarded final store; the last writer stores directly.
/// Throws Error{Unresolvable} when the writers' domains cannot be aligned.
ir::DataflowGraph fuseMpsc(const ir::DataflowGraph &g, const std::string &array,
                           TransformLog &log);

/// Clones `array` so each clone has exactly one writer, pairing readers with
/// the writer whose footprint covers their reads. Residual SPMC clones are
/// picked up by the next fixpoint round; unmatchable patterns fall back to
/// fuse-then-split.
ir::DataflowGraph duplicateMpmc(const ir::DataflowGraph &g,
                                const std::string &array, TransformLog &log);

/// Detect -> dispatch -> update fixpoint over all three patterns. Arrays
/// whose violation is recorded as infeasible are downgraded (sequential
/// edges) and excluded from the pending set. Throws Error{Unresolvable} if
/// pending violations remain after maxRounds.
ir::DataflowGraph eliminateCoarse(const ir::DataflowGraph &g,
                                  TransformLog &log,
                                  const CoarseOptions &opts = {});

} // namespace sluice::xform
