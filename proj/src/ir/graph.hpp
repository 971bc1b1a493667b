//===-- graph.hpp - Task dataflow graph -------------------------*- C++ -*-===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//

#pragma once

#include "ir/program.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace sluice::ir {

enum class BufferKind { Fifo, PingPong, Sequential };

const char *bufferKindName(BufferKind k);

struct BufferSpec {
  BufferKind kind = BufferKind::Fifo;
  std::int64_t depth = 2;      // fifo: element slots
  std::int64_t blockElems = 0; // pingpong: elements per block
  std::int64_t widthBits = 32;

  bool operator==(const BufferSpec &) const = default;
};

/// Violation-elimination state attached to an edge as passes run.
enum class EdgeState {
  Clean,        // no residual violation; FIFO-eligible
  NeedsReuse,   // consumer-side multi-read, waiting for reuse rewriting
  PingPongOnly, // residual violation; must use a ping-pong buffer
  Sequential,   // unresolvable; consumer runs after producer completes
};

const char *edgeStateName(EdgeState s);

struct BufferEdge {
  std::string array;
  std::string producer;
  std::string consumer;
  std::optional<BufferSpec> spec;
  EdgeState state = EdgeState::Clean;
  std::string stateReason;

  std::string key() const { return array + ":" + producer + ":" + consumer; }
};

/// Tasks connected through buffer edges. Owns the (possibly transformed)
/// program; edges cover every internal array shared between distinct nodes.
/// Internal arrays touched by a single node are node-private scratch storage
/// and form no edge.
struct DataflowGraph {
  Program prog;
  std::vector<BufferEdge> edges;
  // array -> (writer node names, reader node names), program order
  std::map<std::string, std::pair<std::vector<std::string>,
                                  std::vector<std::string>>>
      arrayIndex;

  const BufferEdge *findEdge(const std::string &array,
                             const std::string &producer,
                             const std::string &consumer) const;
  std::vector<const BufferEdge *> edgesOf(const std::string &array) const;

  /// Arrays that appear on at least one edge (inter-node channels).
  std::set<std::string> channelArrays() const;
};

/// Builds edges and the array index from the program; preserves program node
/// order. Throws Error{Validation} on cycles among internal arrays or on
/// external arrays used as inter-node channels.
DataflowGraph buildDataflowGraph(const Program &p);

/// Rebuild after a pass mutated the program, carrying over edge states and
/// buffer specs for edges whose (array, producer, consumer) identity
/// survived.
DataflowGraph rebuildGraph(Program p, const DataflowGraph &previous);

} // namespace sluice::ir
