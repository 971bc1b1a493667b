//===-- buffers.hpp - Communication buffer determination --------*- C++ -*-===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//

#pragma once

#include "ir/graph.hpp"
#include "support/translog.hpp"

namespace sluice::mem {

struct BufferOptions {
  std::int64_t fifoDepth = 2; // default element slots per FIFO
  // Per-edge depth overrides keyed by BufferEdge::key().
  std::map<std::string, std::int64_t> depthOverride;
};

/// FIFO-first assignment: violation-free (and reuse-pending) edges become
/// FIFOs, ping-pong-only edges get two banks of the producer's per-outermost-
/// iteration write block, unresolvable edges run sequentially. When a
/// consumer's reads straddle more than the two live blocks, the block is
/// coarsened to the whole tensor (recorded).
ir::DataflowGraph determineBuffers(const ir::DataflowGraph &g,
                                   TransformLog &log,
                                   const BufferOptions &opts = {});

} // namespace sluice::mem
