//===-- report.hpp - Machine-readable artifact emission ---------*- C++ -*-===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//

#pragma once

#include "pipeline/driver.hpp"

#include <string>

namespace sluice::pipeline {

/// Violation report for the `analyze` subcommand: per array, the coarse
/// pattern or fine kind with counts and order signatures.
std::string violationReportJson(
    const std::string &programName,
    const std::vector<analysis::CoarseViolation> &coarse,
    const std::vector<analysis::FineViolation> &fine);

std::string transformLogJson(const TransformLog &log);

/// Per-edge buffer decisions, FIFO percentage, and the off-chip plan.
std::string buffersJson(const ir::DataflowGraph &g,
                        const mem::TransferPlan &plan);

std::string dseReportJson(const sched::DseReport &report,
                          const perf::ScheduleMap &schedule);

std::string simResultJson(const sim::SimResult &r);

/// Trace export: one JSON object per line (cycle, node, event, channel).
std::string traceJsonLines(const sim::SimResult &r);

/// Channel occupancy as CSV: cycle,channel,occupancy.
std::string occupancyCsv(const sim::SimResult &r);

/// The aggregate report: violations found/fixed, buffer kinds, FIFO
/// percentage, per-stage estimates, simulated cycles, compile time.
std::string aggregateReportJson(const PipelineResult &res);

} // namespace sluice::pipeline
