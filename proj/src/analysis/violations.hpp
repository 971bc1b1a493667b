//===-- violations.hpp - Dataflow violation detection -----------*- C++ -*-===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//

#pragma once

#include "analysis/access.hpp"
#include "ir/graph.hpp"

#include <vector>

namespace sluice::analysis {

enum class CoarsePattern { SPMC, MPSC, MPMC };

const char *coarsePatternName(CoarsePattern p);

/// An internal channel array whose producer/consumer multiplicity breaks the
/// single-producer single-consumer constraint.
struct CoarseViolation {
  std::string array;
  CoarsePattern pattern;
  std::vector<std::string> writers;
  std::vector<std::string> readers;
};

enum class FineKind { CountMismatch, OrderMismatch };

const char *fineKindName(FineKind k);

struct FineViolation {
  std::string array;
  std::string producer;
  std::string consumer;
  FineKind kind;
  std::int64_t writeCount = 0;
  std::int64_t readCount = 0;
  std::vector<std::pair<std::string, std::int64_t>> producerOrder;
  std::vector<std::pair<std::string, std::int64_t>> consumerOrder;
  // True when exhaustive enumeration confirmed the verdict; false means the
  // enumeration cap was exceeded and only the symbolic path decided.
  bool confirmed = true;
};

/// One finding per internal channel array whose (|writers|, |readers|) is not
/// (1, 1), in array declaration order.
std::vector<CoarseViolation>
detectCoarseViolations(const ir::DataflowGraph &g);

/// Per-edge count and order comparison. Counts are compared symbolically;
/// orders both by exhaustive address enumeration and by the symbolic stream
/// descriptor. When both paths produce a verdict they must agree; a
/// disagreement is an internal error.
std::vector<FineViolation>
detectFineViolations(const ir::DataflowGraph &g,
                     const EnumerationOptions &opts = {});

/// Fine check for a single edge; nullopt when the edge is clean.
std::optional<FineViolation>
checkEdgeFine(const ir::DataflowGraph &g, const ir::BufferEdge &edge,
              const EnumerationOptions &opts = {});

} // namespace sluice::analysis
