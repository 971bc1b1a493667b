//===-- driver.hpp - End-to-end pass pipeline -------------------*- C++ -*-===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
//
// Fixed pass order: coarse elimination -> fine elimination -> buffer
// determination -> reuse generation (with correctness re-check) -> off-chip
// planning -> scheduling with inter-task re-check; optionally a validating
// simulation.
//
//===----------------------------------------------------------------------===//

#pragma once

#include "analysis/violations.hpp"
#include "ir/graph.hpp"
#include "ir/interp.hpp"
#include "mem/buffers.hpp"
#include "mem/hbm.hpp"
#include "mem/reuse.hpp"
#include "perf/cost_model.hpp"
#include "sched/dse.hpp"
#include "sim/simulator.hpp"
#include "support/translog.hpp"

#include <optional>
#include <string>

namespace sluice::pipeline {

enum class Stage { Coarse, Fine, Buffers, Reuse, Hbm, Dse, Full };

std::optional<Stage> stageFromName(const std::string &name);

struct PipelineOptions {
  sched::SchedulerConfig scheduler;
  perf::CostTable costs = perf::CostTable::defaults();
  mem::BufferOptions buffers;
  analysis::EnumerationOptions enumeration;
  int hbmChannels = 1;
  Stage stopAfter = Stage::Full;
  ir::NumericMode mode = ir::NumericMode::Float64;
  std::int64_t maxCycles = 0;
  bool collectEvents = false;
};

struct PipelineResult {
  ir::DataflowGraph graph;
  perf::ScheduleMap schedule;
  TransformLog log;
  std::vector<analysis::CoarseViolation> initialCoarse;
  std::vector<analysis::FineViolation> initialFine;
  mem::TransferPlan transferPlan;
  std::vector<mem::ReusePlan> reusePlans;
  sched::DseReport dse;
  std::optional<sim::SimResult> simResult;
  std::int64_t compileMs = 0;
  Stage reached = Stage::Full;
};

/// Runs the pipeline on a validated program. `simInputs`, when given,
/// triggers a validating simulation of the final design.
PipelineResult runPipeline(const ir::Program &p, const PipelineOptions &opts,
                           const ir::TensorMap *simInputs = nullptr);

} // namespace sluice::pipeline
