//===-- hbm.hpp - Off-chip transfer planning --------------------*- C++ -*-===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//

#pragma once

#include "ir/graph.hpp"

#include <map>
#include <string>
#include <vector>

namespace sluice::mem {

struct BurstDescriptor {
  std::string array;
  std::int64_t offsetBytes = 0;
  std::int64_t lengthBytes = 0;
  int channel = 0;
};

struct TransferPlan {
  int channels = 1;
  std::map<std::string, int> assignment;  // external array -> channel id
  std::vector<std::int64_t> channelBytes; // per-channel totals
  std::vector<BurstDescriptor> bursts;
};

/// Greedy size balancing: external arrays, largest first, onto the lightest
/// channel. Channel-load imbalance is bounded by the largest single array.
TransferPlan assignHbmChannels(const ir::DataflowGraph &g, int channels);

} // namespace sluice::mem
