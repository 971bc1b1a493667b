//===-- cost_model.hpp - Analytical latency/resource estimation -*- C++ -*-===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
//
// A profiled-table stand-in: per-op latency and resource costs drive loop
// latency estimates of the form ceil(iterations / unroll) * II + depth, with
// memory-port contention folded into II. The simulator is ground truth; these
// estimates steer the scheduler.
//
//===----------------------------------------------------------------------===//

#pragma once

#include "ir/graph.hpp"

#include <map>
#include <set>
#include <string>

namespace sluice::perf {

struct OpCost {
  std::int64_t latency = 1;
  std::int64_t ii = 1;
  std::int64_t dsp = 0;
  std::int64_t lut = 0;
  std::int64_t ff = 0;
};

struct CostTable {
  std::map<ir::OpKind, OpCost> ops;
  std::int64_t memLatency = 1;     // load/store cycles
  std::int64_t portsPerBank = 2;   // dual-port BRAM
  std::int64_t bramBlockBits = 18 * 1024;

  const OpCost &of(ir::OpKind k) const;

  /// Documented defaults: add/cmp/copy 1 cycle, mul/mac 3 cycles 1 DSP,
  /// div/exp 12 cycles.
  static CostTable defaults();
};

CostTable parseCostTable(const std::string &jsonText);
std::string serializeCostTable(const CostTable &t);

struct ResourceVector {
  std::int64_t dsp = 0;
  std::int64_t bram18k = 0;
  std::int64_t ff = 0;
  std::int64_t lut = 0;

  ResourceVector &operator+=(const ResourceVector &o);
  bool fitsIn(const ResourceVector &budget) const; // componentwise <=
  bool operator==(const ResourceVector &) const = default;

  /// Alveo U280 capacity.
  static ResourceVector deviceDefaults();
};

ResourceVector parseDevice(const std::string &jsonText);
std::string serializeResources(const ResourceVector &r);

/// Per-node scheduling decisions; loops are keyed by path.
struct NodeSchedule {
  std::int64_t degree = 1; // product of unroll factors
  std::map<ir::LoopPath, ir::LoopSched> loops;
  std::map<std::string, std::int64_t> partitions; // array -> total factor
  bool pipelined = false; // whole main region pipelined

  std::int64_t unrollAt(const ir::LoopPath &p) const;
};

struct ScheduleMap {
  std::map<std::string, NodeSchedule> nodes;

  const NodeSchedule &of(const std::string &node) const;
  bool operator==(const ScheduleMap &) const;
};

/// Latency of one node under its schedule. `fifoArrays` stream and are
/// exempt from memory-port contention; every other buffer folds
/// ceil(elements / (ports * partition)) cycles into the II.
std::int64_t estimateNodeLatency(const ir::TaskNode &node,
                                 const NodeSchedule &sched,
                                 const CostTable &costs,
                                 const std::set<std::string> &fifoArrays);

/// Cycles until the node emits its first element (pipeline depth + one II).
std::int64_t estimateNodeStartup(const ir::TaskNode &node,
                                 const NodeSchedule &sched,
                                 const CostTable &costs,
                                 const std::set<std::string> &fifoArrays);

/// II and fill depth of one pipelined loop; the simulator charges the same
/// numbers so its cycle counts track the estimates.
struct PipelineParams {
  std::int64_t ii = 1;
  std::int64_t depth = 0;
};
PipelineParams pipelineParams(const ir::Loop &loop, const ir::LoopPath &path,
                              const NodeSchedule &sched, const CostTable &costs,
                              const std::set<std::string> &fifoArrays);

ResourceVector estimateResources(const ir::DataflowGraph &g,
                                 const ScheduleMap &scheds,
                                 const CostTable &costs);

/// Steady-state critical path: per node, start offsets accumulate along
/// edges (first-element delay for FIFOs, one block for ping-pong, full
/// completion for sequential buffers); the result is max(start + latency).
std::int64_t estimateGraphLatency(const ir::DataflowGraph &g,
                                  const ScheduleMap &scheds,
                                  const CostTable &costs);

std::set<std::string> fifoArraysOf(const ir::DataflowGraph &g);

} // namespace sluice::perf
