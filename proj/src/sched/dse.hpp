//===-- dse.hpp - Resource-aware bottleneck-centric scheduling --*- C++ -*-===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
//
// Three stages: proportional initial allocation (PA), bottleneck upscaling
// (UP), over-optimization downscaling (DP); then inter-task propagation of
// FIFO-coupled factors with ping-pong fallback on conflicting obligations.
//
//===----------------------------------------------------------------------===//

#pragma once

#include "perf/cost_model.hpp"
#include "support/translog.hpp"

#include <string>
#include <vector>

namespace sluice::sched {

struct SchedulerConfig {
  double nThreshold = 2.0; // balancing threshold n
  std::int64_t maxParallel = 64;
  perf::ResourceVector budget = perf::ResourceVector::deviceDefaults();
  int maxUpIters = 10;
  bool enableDownscale = true;
};

struct StageSnapshot {
  std::string name; // "PA", "PA+UP", "PA+UP+DP", "final"
  std::int64_t graphLatency = 0;
  perf::ResourceVector resources;
  std::map<std::string, std::int64_t> degrees;
};

struct DseReport {
  std::vector<StageSnapshot> stages;
  double fifoPercentage = 1.0;
  std::int64_t wallMs = 0;
};

/// Degrees proportional to degree-1 latencies (minimum degree 1), scaled up
/// uniformly while the budget and the parallelism ceiling allow. Pipelines
/// every node; unrolls free loops innermost-first, then fifo-index loops.
/// Throws Error{Budget} when even all-ones degrees exceed the budget.
perf::ScheduleMap initialAllocation(const ir::DataflowGraph &g,
                                    const SchedulerConfig &cfg,
                                    const perf::CostTable &costs);

/// Iteratively multiplies every node at least nThreshold slower than the
/// fastest by its latency ratio, capped by maxParallel and the budget.
perf::ScheduleMap upscale(const ir::DataflowGraph &g,
                          const perf::ScheduleMap &s,
                          const SchedulerConfig &cfg,
                          const perf::CostTable &costs);

/// Halves nodes that run nThreshold times faster than the bottleneck while
/// their latency stays below the bottleneck's.
perf::ScheduleMap downscale(const ir::DataflowGraph &g,
                            const perf::ScheduleMap &s,
                            const SchedulerConfig &cfg,
                            const perf::CostTable &costs);

/// Copies unroll factors on FIFO-driving loops to the partner endpoint,
/// bottleneck first; conflicting obligations downgrade the edge to ping-pong
/// (recorded), preserving upstream FIFO execution.
std::pair<ir::DataflowGraph, perf::ScheduleMap>
propagateInterTask(const ir::DataflowGraph &g, const perf::ScheduleMap &s,
                   const SchedulerConfig &cfg, const perf::CostTable &costs,
                   TransformLog &log);

struct DseResult {
  ir::DataflowGraph graph;
  perf::ScheduleMap schedule;
  DseReport report;
};

DseResult runDse(const ir::DataflowGraph &g, const SchedulerConfig &cfg,
                 const perf::CostTable &costs, TransformLog &log);

} // namespace sluice::sched
