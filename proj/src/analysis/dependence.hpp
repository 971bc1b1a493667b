//===-- dependence.hpp - Loop-carried dependence and loop classes -*- C++ -*-===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//

#pragma once

#include "analysis/access.hpp"
#include "ir/program.hpp"

#include <map>
#include <set>

namespace sluice::analysis {

/// Flow-dependence classification for one loop: does any read observe a
/// value produced in a different iteration of that loop (outer loops held
/// fixed)? ReductionOnly means every such pair runs through an associative
/// accumulation chain, which hardware may legally reassociate.
enum class CarriedKind { None, ReductionOnly, General };

CarriedKind loopCarriedKind(const ir::TaskNode &node, const ir::LoopPath &path,
                            const EnumerationOptions &opts = {});

/// Decided by exhaustive enumeration; `depth` resolves to the first loop at
/// that depth in preorder. True for any cross-iteration flow, including
/// reductions.
bool hasLoopCarriedDependence(const ir::TaskNode &node, int depth,
                              const EnumerationOptions &opts = {});

enum class LoopClass { OuterUnsafe, FifoIndex, Free };

const char *loopClassName(LoopClass c);

/// Labels every loop in the node:
///  - outer_unsafe: encloses >= 2 sibling regions with a cross-region
///    dependence, or carries a general (non-reduction) flow dependence;
///  - fifo_index: its variable drives a subscript of a FIFO-candidate array;
///  - free: everything else (no carried flow, or reduction-only).
std::map<ir::LoopPath, LoopClass>
classifyLoops(const ir::TaskNode &node, const std::set<std::string> &fifoArrays,
              const EnumerationOptions &opts = {});

} // namespace sluice::analysis
