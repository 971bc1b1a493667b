//===-- driver.cpp - End-to-end pass pipeline --------------------------------===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//

#include "pipeline/driver.hpp"

#include "support/error.hpp"
#include "xform/coarse.hpp"
#include "xform/fine.hpp"

#include <chrono>

namespace sluice::pipeline {

using namespace ir;

std::optional<Stage> stageFromName(const std::string &name) {
  if (name == "coarse")
    return Stage::Coarse;
  if (name == "fine")
    return Stage::Fine;
  if (name == "buffers")
    return Stage::Buffers;
  if (name == "reuse")
    return Stage::Reuse;
  if (name == "hbm")
    return Stage::Hbm;
  if (name == "dse")
    return Stage::Dse;
  if (name.empty() || name == "full")
    return Stage::Full;
  return std::nullopt;
}

PipelineResult runPipeline(const Program &p, const PipelineOptions &opts,
                           const TensorMap *simInputs) {
  auto t0 = std::chrono::steady_clock::now();
  PipelineResult res;

  DataflowGraph g = buildDataflowGraph(p);
  res.initialCoarse = analysis::detectCoarseViolations(g);
  res.initialFine = analysis::detectFineViolations(g, opts.enumeration);

  auto finish = [&](DataflowGraph graph, Stage reached) {
    res.graph = std::move(graph);
    res.reached = reached;
    res.compileMs = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    return res;
  };

  g = xform::eliminateCoarse(g, res.log);
  if (opts.stopAfter == Stage::Coarse)
    return finish(std::move(g), Stage::Coarse);

  xform::FineOptions fineOpts;
  fineOpts.enumeration = opts.enumeration;
  g = xform::eliminateFine(g, res.log, fineOpts);
  if (opts.stopAfter == Stage::Fine)
    return finish(std::move(g), Stage::Fine);

  g = mem::determineBuffers(g, res.log, opts.buffers);
  if (opts.stopAfter == Stage::Buffers)
    return finish(std::move(g), Stage::Buffers);

  // Reuse generation, then re-invoke the correctness pass: rewriting one
  // consumer can reshape its own producer-side orders.
  {
    std::vector<std::pair<std::string, std::string>> pending;
    for (const auto &e : g.edges)
      if (e.state == EdgeState::NeedsReuse)
        pending.emplace_back(e.consumer, e.array);
    for (const auto &[consumer, array] : pending) {
      try {
        auto [g2, plan] = mem::generateReuseBuffers(g, consumer, array,
                                                    res.log);
        g = std::move(g2);
        res.reusePlans.push_back(plan);
      } catch (const Error &e) {
        if (e.kind() != ErrorKind::Unresolvable)
          throw;
        for (auto &edge : g.edges)
          if (edge.consumer == consumer && edge.array == array) {
            edge.state = EdgeState::PingPongOnly;
            edge.stateReason = e.what();
          }
        res.log.push_back(
            {"reuse", "downgrade", array, "", consumer, e.what(), {}});
      }
    }
    // Re-check every reuse edge; confirmed-clean edges stream as FIFOs.
    for (auto &edge : g.edges) {
      if (edge.state != EdgeState::NeedsReuse)
        continue;
      auto v = analysis::checkEdgeFine(g, edge, opts.enumeration);
      if (!v) {
        edge.state = EdgeState::Clean;
        edge.stateReason.clear();
      } else {
        edge.state = EdgeState::PingPongOnly;
        edge.stateReason = "residual violation after reuse rewriting";
        res.log.push_back({"reuse", "downgrade", edge.array, edge.producer,
                           edge.consumer, edge.stateReason, {}});
      }
    }
    g = xform::eliminateFine(g, res.log, fineOpts);
    g = mem::determineBuffers(g, res.log, opts.buffers);
  }
  if (opts.stopAfter == Stage::Reuse)
    return finish(std::move(g), Stage::Reuse);

  res.transferPlan = mem::assignHbmChannels(g, opts.hbmChannels);
  if (opts.stopAfter == Stage::Hbm)
    return finish(std::move(g), Stage::Hbm);

  auto dse = sched::runDse(g, opts.scheduler, opts.costs, res.log);
  g = std::move(dse.graph);
  res.schedule = std::move(dse.schedule);
  res.dse = std::move(dse.report);

  // Inter-task re-check: any FIFO edge that still mismatches is downgraded.
  for (auto &edge : g.edges) {
    if (!edge.spec || edge.spec->kind != BufferKind::Fifo)
      continue;
    auto v = analysis::checkEdgeFine(g, edge, opts.enumeration);
    if (v) {
      edge.state = EdgeState::PingPongOnly;
      edge.stateReason =
          "post-scheduling " + std::string(analysis::fineKindName(v->kind));
      BufferSpec spec = *edge.spec;
      spec.kind = BufferKind::PingPong;
      spec.blockElems = g.prog.findArray(edge.array)->numElems();
      edge.spec = spec;
      res.log.push_back({"dse", "downgrade", edge.array, edge.producer,
                         edge.consumer, edge.stateReason, {}});
    }
  }

  if (simInputs) {
    sim::SimOptions so;
    so.maxCycles = opts.maxCycles;
    so.mode = opts.mode;
    so.collectEvents = opts.collectEvents;
    res.simResult = sim::simulate(g, res.schedule, *simInputs, opts.costs, so);
  }
  return finish(std::move(g), Stage::Full);
}

} // namespace sluice::pipeline
