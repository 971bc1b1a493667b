//===-- simulator.hpp - Discrete-event dataflow simulator -------*- C++ -*-===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
//
// Ground truth for deadlock, latency ordering, and functional correctness.
// Every node runs as a process stepping its (scheduled) loop nest; FIFO reads
// block on empty and writes on full, ping-pong banks synchronize on whole
// blocks, sequential buffers release the consumer only when the producer has
// finished. One global cycle counter with a fixed topological scan order
// keeps runs deterministic.
//
//===----------------------------------------------------------------------===//

#pragma once

#include "ir/graph.hpp"
#include "ir/interp.hpp"
#include "perf/cost_model.hpp"

#include <map>
#include <string>
#include <vector>

namespace sluice::sim {

struct SimOptions {
  std::int64_t maxCycles = 0; // 0: 100x the estimated graph latency
  ir::NumericMode mode = ir::NumericMode::Float64;
  bool collectEvents = false; // per-op trace (cycle, node, event, channel)
};

struct BlockedState {
  std::string node;
  std::string array;
  std::string producer;
  std::string consumer;
  bool isRead = true;
  bool partnerFinished = false;
};

struct TraceEvent {
  std::int64_t cycle;
  std::string node;
  std::string event; // "read", "write", "block_read", "block_write", "done"
  std::string channel;
};

struct SimResult {
  enum class Outcome { Completed, Deadlock };
  Outcome outcome = Outcome::Completed;
  std::int64_t totalCycles = 0;
  ir::TensorMap outputs; // external arrays after the run
  // channel key -> (cycle, occupancy) on every change
  std::map<std::string, std::vector<std::pair<std::int64_t, std::int64_t>>>
      occupancy;
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> nodeActivity;
  std::vector<BlockedState> blocked; // populated on deadlock
  std::int64_t deadlockCycle = -1;
  std::vector<TraceEvent> events;
};

/// Runs the scheduled graph to completion, deadlock, or the cycle cap
/// (Error{Timeout}). Edges without a BufferSpec default to depth-2 FIFOs.
SimResult simulate(const ir::DataflowGraph &g, const perf::ScheduleMap &scheds,
                   const ir::TensorMap &inputs, const perf::CostTable &costs,
                   const SimOptions &opts = {});

struct DeadlockInfo {
  std::int64_t cycle = 0;
  // wait-for pairs: node A waits on node B
  std::vector<std::pair<std::string, std::string>> waitsFor;
  enum class Kind { StarvedReader, CyclicWait } classification;
};

/// Reconstructs wait-for edges from the blocked snapshot. Throws when called
/// on a completed result.
DeadlockInfo detectDeadlock(const SimResult &r);

/// Exact mode compares external outputs bitwise; approx mode allows 1e-6
/// relative error. Throws on shape mismatch.
bool compareWithReference(const SimResult &r, const ir::TensorMap &ref,
                          const std::vector<std::string> &outputArrays,
                          bool exact);

} // namespace sluice::sim
