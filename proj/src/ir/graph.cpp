//===-- graph.cpp - Task dataflow graph -----------------------------------===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//

#include "ir/graph.hpp"

#include "support/error.hpp"

#include <algorithm>
#include <functional>

namespace sluice::ir {

const char *bufferKindName(BufferKind k) {
  switch (k) {
  case BufferKind::Fifo:
    return "fifo";
  case BufferKind::PingPong:
    return "pingpong";
  case BufferKind::Sequential:
    return "sequential";
  }
  return "?";
}

const char *edgeStateName(EdgeState s) {
  switch (s) {
  case EdgeState::Clean:
    return "clean";
  case EdgeState::NeedsReuse:
    return "needs_reuse";
  case EdgeState::PingPongOnly:
    return "pingpong_only";
  case EdgeState::Sequential:
    return "sequential";
  }
  return "?";
}

const BufferEdge *DataflowGraph::findEdge(const std::string &array,
                                          const std::string &producer,
                                          const std::string &consumer) const {
  for (const auto &e : edges)
    if (e.array == array && e.producer == producer && e.consumer == consumer)
      return &e;
  return nullptr;
}

std::vector<const BufferEdge *>
DataflowGraph::edgesOf(const std::string &array) const {
  std::vector<const BufferEdge *> out;
  for (const auto &e : edges)
    if (e.array == array)
      out.push_back(&e);
  return out;
}

std::set<std::string> DataflowGraph::channelArrays() const {
  std::set<std::string> out;
  for (const auto &e : edges)
    out.insert(e.array);
  return out;
}

DataflowGraph buildDataflowGraph(const Program &p) {
  DataflowGraph g;
  g.prog = p;

  for (const auto &a : p.arrays) {
    auto &entry = g.arrayIndex[a.name];
    for (const auto &n : p.nodes) {
      auto writes = arraysWritten(n);
      auto reads = arraysRead(n);
      if (std::find(writes.begin(), writes.end(), a.name) != writes.end())
        entry.first.push_back(n.name);
      if (std::find(reads.begin(), reads.end(), a.name) != reads.end())
        entry.second.push_back(n.name);
    }
  }

  // External arrays are off-chip I/O and never connect nodes.
  for (const auto &a : p.arrays) {
    if (a.placement != Placement::External)
      continue;
    const auto &[writers, readers] = g.arrayIndex[a.name];
    if (!writers.empty() && !readers.empty())
      fail(ErrorKind::Validation,
           "external array '" + a.name +
               "' is both written and read by nodes; off-chip memory cannot "
               "serve as an inter-node channel");
  }

  // One edge per (writer, reader) pair per internal array. A node that both
  // writes and reads the same internal array keeps it private (no edge).
  for (const auto &a : p.arrays) {
    if (a.placement != Placement::Internal)
      continue;
    const auto &[writers, readers] = g.arrayIndex[a.name];
    for (const auto &w : writers)
      for (const auto &r : readers) {
        if (w == r)
          continue;
        BufferEdge e;
        e.array = a.name;
        e.producer = w;
        e.consumer = r;
        g.edges.push_back(std::move(e));
      }
  }

  // Cycle check over the node-level graph induced by internal arrays.
  std::map<std::string, std::set<std::string>> succ;
  for (const auto &e : g.edges)
    succ[e.producer].insert(e.consumer);
  std::map<std::string, int> mark; // 0 unvisited, 1 in stack, 2 done
  std::function<void(const std::string &)> dfs = [&](const std::string &n) {
    mark[n] = 1;
    for (const auto &m : succ[n]) {
      if (mark[m] == 1)
        fail(ErrorKind::Validation,
             "cyclic dataflow through internal arrays at node '" + m + "'");
      if (mark[m] == 0)
        dfs(m);
    }
    mark[n] = 2;
  };
  for (const auto &n : p.nodes)
    if (mark[n.name] == 0)
      dfs(n.name);

  return g;
}

DataflowGraph rebuildGraph(Program p, const DataflowGraph &previous) {
  std::map<std::string, std::pair<EdgeState, std::string>> states;
  std::map<std::string, std::optional<BufferSpec>> specs;
  for (const auto &e : previous.edges) {
    states[e.key()] = {e.state, e.stateReason};
    specs[e.key()] = e.spec;
  }
  DataflowGraph g = buildDataflowGraph(p);
  for (auto &e : g.edges) {
    auto it = states.find(e.key());
    if (it != states.end()) {
      e.state = it->second.first;
      e.stateReason = it->second.second;
      e.spec = specs[e.key()];
    }
  }
  return g;
}

} // namespace sluice::ir
