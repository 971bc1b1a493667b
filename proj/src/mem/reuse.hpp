//===-- reuse.hpp - Line/window reuse buffer generation ---------*- C++ -*-===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
//
// Rewrites a stencil-style consumer so it reads each streamed element exactly
// once: a line buffer retains the trailing kernel-height rows, a window
// buffer holds the current kernel window, and the compute region runs off the
// window. The rewritten node reads the FIFO in canonical element order.
//
//===----------------------------------------------------------------------===//

#pragma once

#include "ir/graph.hpp"
#include "support/translog.hpp"

namespace sluice::mem {

struct ReusePlan {
  std::string lineBuffer;                      // array name
  std::string windowBuffer;                    // array name
  std::vector<std::int64_t> lineBufferShape;   // kernel height x row extent
  std::vector<std::int64_t> windowBufferShape; // kernel height x kernel width
  std::vector<std::string> rewrittenRegions;   // region descriptors
};

/// Rewrites `consumer`'s reads of `array` into the three-region line/window
/// form. Throws Error{Unresolvable} on non-unit strides or non-stencil
/// subscripts.
std::pair<ir::DataflowGraph, ReusePlan>
generateReuseBuffers(const ir::DataflowGraph &g, const std::string &consumer,
                     const std::string &array, TransformLog &log);

} // namespace sluice::mem
