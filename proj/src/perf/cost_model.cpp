//===-- cost_model.cpp - Analytical latency/resource estimation -------------===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//

#include "perf/cost_model.hpp"

#include "analysis/access.hpp"
#include "support/error.hpp"

#include <json.hpp>

#include <algorithm>

namespace sluice::perf {

using namespace ir;
using nlohmann::json;
using nlohmann::ordered_json;

const OpCost &CostTable::of(OpKind k) const {
  auto it = ops.find(k);
  if (it == ops.end())
    fail(ErrorKind::Validation,
         std::string("cost table lacks op '") + opKindName(k) + "'");
  return it->second;
}

CostTable CostTable::defaults() {
  CostTable t;
  t.ops[OpKind::Add] = {1, 1, 0, 32, 32};
  t.ops[OpKind::Cmp] = {1, 1, 0, 32, 32};
  t.ops[OpKind::Copy] = {1, 1, 0, 8, 8};
  t.ops[OpKind::Max] = {1, 1, 0, 48, 48};
  t.ops[OpKind::Mul] = {3, 1, 1, 64, 64};
  t.ops[OpKind::Mac] = {3, 1, 1, 96, 96};
  t.ops[OpKind::Div] = {12, 1, 0, 512, 512};
  t.ops[OpKind::Exp] = {12, 1, 0, 1024, 1024};
  return t;
}

CostTable parseCostTable(const std::string &text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception &e) {
    fail(ErrorKind::Parse, std::string("invalid cost table JSON: ") + e.what());
  }
  CostTable t = CostTable::defaults();
  if (root.contains("ops")) {
    for (auto it = root["ops"].begin(); it != root["ops"].end(); ++it) {
      auto op = opKindFromName(it.key());
      if (!op)
        fail(ErrorKind::Parse, "unknown op '" + it.key() + "' in cost table");
      OpCost c = t.ops[*op];
      const json &cj = it.value();
      if (cj.contains("lat"))
        c.latency = cj["lat"].get<std::int64_t>();
      if (cj.contains("ii"))
        c.ii = cj["ii"].get<std::int64_t>();
      if (cj.contains("dsp"))
        c.dsp = cj["dsp"].get<std::int64_t>();
      if (cj.contains("lut"))
        c.lut = cj["lut"].get<std::int64_t>();
      if (cj.contains("ff"))
        c.ff = cj["ff"].get<std::int64_t>();
      if (c.latency < 0 || c.ii < 0 || c.dsp < 0 || c.lut < 0 || c.ff < 0)
        fail(ErrorKind::Validation, "cost table entries must be >= 0");
      t.ops[*op] = c;
    }
  }
  if (root.contains("mem_latency"))
    t.memLatency = root["mem_latency"].get<std::int64_t>();
  if (root.contains("ports_per_bank"))
    t.portsPerBank = root["ports_per_bank"].get<std::int64_t>();
  if (root.contains("bram_block_bits"))
    t.bramBlockBits = root["bram_block_bits"].get<std::int64_t>();
  if (t.memLatency < 0 || t.portsPerBank < 1 || t.bramBlockBits < 1)
    fail(ErrorKind::Validation, "cost table entries must be >= 0");
  return t;
}

std::string serializeCostTable(const CostTable &t) {
  ordered_json root;
  root["ops"] = ordered_json::object();
  for (const auto &[op, c] : t.ops) {
    ordered_json cj;
    cj["lat"] = c.latency;
    cj["ii"] = c.ii;
    cj["dsp"] = c.dsp;
    cj["lut"] = c.lut;
    cj["ff"] = c.ff;
    root["ops"][opKindName(op)] = std::move(cj);
  }
  root["mem_latency"] = t.memLatency;
  root["ports_per_bank"] = t.portsPerBank;
  root["bram_block_bits"] = t.bramBlockBits;
  return root.dump(2) + "\n";
}

ResourceVector &ResourceVector::operator+=(const ResourceVector &o) {
  dsp += o.dsp;
  bram18k += o.bram18k;
  ff += o.ff;
  lut += o.lut;
  return *this;
}

bool ResourceVector::fitsIn(const ResourceVector &budget) const {
  return dsp <= budget.dsp && bram18k <= budget.bram18k && ff <= budget.ff &&
         lut <= budget.lut;
}

ResourceVector ResourceVector::deviceDefaults() {
  return {9024, 4032, 2600000, 1300000};
}

ResourceVector parseDevice(const std::string &text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception &e) {
    fail(ErrorKind::Parse, std::string("invalid device JSON: ") + e.what());
  }
  ResourceVector r = ResourceVector::deviceDefaults();
  if (root.contains("dsp"))
    r.dsp = root["dsp"].get<std::int64_t>();
  if (root.contains("bram18k"))
    r.bram18k = root["bram18k"].get<std::int64_t>();
  if (root.contains("ff"))
    r.ff = root["ff"].get<std::int64_t>();
  if (root.contains("lut"))
    r.lut = root["lut"].get<std::int64_t>();
  return r;
}

std::string serializeResources(const ResourceVector &r) {
  ordered_json j;
  j["dsp"] = r.dsp;
  j["bram18k"] = r.bram18k;
  j["ff"] = r.ff;
  j["lut"] = r.lut;
  return j.dump();
}

std::int64_t NodeSchedule::unrollAt(const LoopPath &p) const {
  auto it = loops.find(p);
  return it == loops.end() ? 1 : it->second.unroll;
}

const NodeSchedule &ScheduleMap::of(const std::string &node) const {
  static const NodeSchedule empty;
  auto it = nodes.find(node);
  return it == nodes.end() ? empty : it->second;
}

bool ScheduleMap::operator==(const ScheduleMap &o) const {
  if (nodes.size() != o.nodes.size())
    return false;
  for (const auto &[name, ns] : nodes) {
    auto it = o.nodes.find(name);
    if (it == o.nodes.end())
      return false;
    if (ns.degree != it->second.degree || ns.loops != it->second.loops ||
        ns.partitions != it->second.partitions ||
        ns.pipelined != it->second.pipelined)
      return false;
  }
  return true;
}

std::set<std::string> fifoArraysOf(const DataflowGraph &g) {
  std::set<std::string> out;
  for (const auto &e : g.edges)
    if (!e.spec || e.spec->kind == BufferKind::Fifo)
      out.insert(e.array);
  return out;
}

//===----------------------------------------------------------------------===//
// Latency
//===----------------------------------------------------------------------===//

namespace {

std::int64_t ceilDiv(std::int64_t a, std::int64_t b) {
  return (a + b - 1) / b;
}

std::int64_t stmtLatency(const Stmt &s, const CostTable &costs) {
  if (s.kind == StmtKind::Compute)
    return costs.of(s.op).latency;
  return costs.memLatency;
}

struct RegionStats {
  std::int64_t flatIters = 1; // innermost-body executions / unroll
  std::int64_t depth = 0;     // sum of static statement latencies
  std::map<std::string, std::int64_t> accessesPerFullRun;
  std::set<std::string> loopVars;
};

// Statement-bearing innermost iterations of a body: sibling loops add, nested
// loops multiply; statements alone count as one unit.
std::int64_t regionIters(const std::vector<BodyElem> &body,
                         const NodeSchedule &sched, LoopPath &path) {
  std::int64_t sum = 0;
  bool anyLoop = false;
  for (int i = 0; i < static_cast<int>(body.size()); ++i) {
    if (!body[i].isLoop())
      continue;
    anyLoop = true;
    const Loop &l = body[i].loop();
    path.push_back(i);
    std::int64_t u = std::max<std::int64_t>(1, sched.unrollAt(path));
    std::int64_t trips = std::max<std::int64_t>(1, l.tripCount());
    sum += ceilDiv(trips, u) * regionIters(l.children, sched, path);
    path.pop_back();
  }
  return anyLoop ? sum : 1;
}

void gatherRegion(const std::vector<BodyElem> &body, const NodeSchedule &sched,
                  const CostTable &costs, LoopPath &path, RegionStats &out,
                  std::int64_t outerTrips) {
  for (int i = 0; i < static_cast<int>(body.size()); ++i) {
    const BodyElem &e = body[i];
    if (e.isLoop()) {
      const Loop &l = e.loop();
      path.push_back(i);
      std::int64_t trips = std::max<std::int64_t>(1, l.tripCount());
      out.loopVars.insert(l.var);
      gatherRegion(l.children, sched, costs, path, out, outerTrips * trips);
      path.pop_back();
    } else {
      const Stmt &s = e.stmt();
      out.depth += stmtLatency(s, costs);
      if (s.kind == StmtKind::Load || s.kind == StmtKind::Store)
        out.accessesPerFullRun[s.array] += outerTrips;
    }
  }
}

// Latency of an accumulation chain carried across flattened iterations: a
// load whose subscripts skip at least one region loop variable feeds a store
// back to the same element.
std::int64_t carriedAccumulationLat(const std::vector<BodyElem> &body,
                                    const RegionStats &stats,
                                    const CostTable &costs) {
  std::int64_t lat = 0;
  std::function<void(const std::vector<BodyElem> &)> walk =
      [&](const std::vector<BodyElem> &b) {
        std::map<std::string, const Stmt *> loads; // result id -> load
        for (const auto &e : b) {
          if (e.isLoop()) {
            walk(e.loop().children);
            continue;
          }
          const Stmt &s = e.stmt();
          if (s.kind == StmtKind::Load)
            loads[s.result] = &s;
          if (s.kind != StmtKind::Compute)
            continue;
          for (const auto &o : s.operands) {
            if (o.isConst)
              continue;
            auto it = loads.find(o.value);
            if (it == loads.end())
              continue;
            // subscripts invariant under at least one region loop?
            std::set<std::string> idxVars;
            for (const auto &ix : it->second->index)
              for (const auto &[v, c] : ix.terms)
                if (c != 0)
                  idxVars.insert(v);
            bool invariantSomewhere = false;
            for (const auto &v : stats.loopVars)
              if (!idxVars.count(v))
                invariantSomewhere = true;
            if (invariantSomewhere)
              lat = std::max(lat, costs.of(s.op).latency);
          }
        }
      };
  walk(body);
  return lat;
}

struct PipelinedEstimate {
  std::int64_t latency = 0;
  std::int64_t ii = 1;
  std::int64_t depth = 0;
};

PipelinedEstimate pipelinedLatency(const Loop &l, const LoopPath &path,
                                   const NodeSchedule &sched,
                                   const CostTable &costs,
                                   const std::set<std::string> &fifoArrays) {
  RegionStats stats;
  LoopPath p = path;
  std::int64_t u = std::max<std::int64_t>(1, sched.unrollAt(path));
  std::int64_t trips = std::max<std::int64_t>(1, l.tripCount());
  stats.flatIters = ceilDiv(trips, u) * regionIters(l.children, sched, p);
  stats.loopVars.insert(l.var);
  gatherRegion(l.children, sched, costs, p, stats, trips);

  std::int64_t ii = 1;
  for (const auto &[array, total] : stats.accessesPerFullRun) {
    if (fifoArrays.count(array))
      continue; // streams widen with unrolling
    std::int64_t perIter = ceilDiv(total, std::max<std::int64_t>(1, stats.flatIters));
    std::int64_t f = 1;
    auto it = sched.partitions.find(array);
    if (it != sched.partitions.end())
      f = std::max<std::int64_t>(1, it->second);
    ii = std::max(ii, ceilDiv(perIter, costs.portsPerBank * f));
  }
  ii = std::max(ii, carriedAccumulationLat(l.children, stats, costs));

  PipelinedEstimate est;
  est.ii = ii;
  est.depth = stats.depth;
  est.latency = stats.flatIters * ii + stats.depth;
  return est;
}

std::int64_t bodyLatency(const std::vector<BodyElem> &body,
                         const NodeSchedule &sched, const CostTable &costs,
                         const std::set<std::string> &fifoArrays,
                         LoopPath &path) {
  std::int64_t total = 0;
  for (int i = 0; i < static_cast<int>(body.size()); ++i) {
    const BodyElem &e = body[i];
    if (e.isLoop()) {
      const Loop &l = e.loop();
      path.push_back(i);
      bool pipelined = false;
      auto it = sched.loops.find(path);
      if (it != sched.loops.end())
        pipelined = it->second.pipelined;
      if (pipelined) {
        total += pipelinedLatency(l, path, sched, costs, fifoArrays).latency;
      } else {
        std::int64_t inner = bodyLatency(l.children, sched, costs, fifoArrays,
                                         path);
        std::int64_t u = std::max<std::int64_t>(1, sched.unrollAt(path));
        total += ceilDiv(std::max<std::int64_t>(1, l.tripCount()), u) * inner;
      }
      path.pop_back();
    } else {
      total += stmtLatency(e.stmt(), costs);
    }
  }
  return total;
}

PipelinedEstimate firstPipelined(const TaskNode &node,
                                 const NodeSchedule &sched,
                                 const CostTable &costs,
                                 const std::set<std::string> &fifoArrays) {
  PipelinedEstimate found;
  bool have = false;
  forEachLoop(node.body, [&](const Loop &l, const LoopPath &p) {
    if (have)
      return;
    auto it = sched.loops.find(p);
    if (it != sched.loops.end() && it->second.pipelined) {
      found = pipelinedLatency(l, p, sched, costs, fifoArrays);
      have = true;
    }
  });
  return found;
}

} // namespace

std::int64_t estimateNodeLatency(const TaskNode &node,
                                 const NodeSchedule &sched,
                                 const CostTable &costs,
                                 const std::set<std::string> &fifoArrays) {
  LoopPath path;
  return bodyLatency(node.body, sched, costs, fifoArrays, path);
}

PipelineParams pipelineParams(const Loop &loop, const LoopPath &path,
                              const NodeSchedule &sched, const CostTable &costs,
                              const std::set<std::string> &fifoArrays) {
  auto est = pipelinedLatency(loop, path, sched, costs, fifoArrays);
  return {est.ii, est.depth};
}

std::int64_t estimateNodeStartup(const TaskNode &node,
                                 const NodeSchedule &sched,
                                 const CostTable &costs,
                                 const std::set<std::string> &fifoArrays) {
  auto est = firstPipelined(node, sched, costs, fifoArrays);
  if (est.latency > 0)
    return est.depth + est.ii;
  // Unscheduled: one pass over the first innermost body.
  std::int64_t depth = 0;
  const std::vector<BodyElem> *body = &node.body;
  while (!body->empty() && body->front().isLoop())
    body = &body->front().loop().children;
  for (const auto &e : *body)
    if (e.isStmt())
      depth += stmtLatency(e.stmt(), costs);
  return std::max<std::int64_t>(1, depth);
}

//===----------------------------------------------------------------------===//
// Resources
//===----------------------------------------------------------------------===//

namespace {

void computeResources(const std::vector<BodyElem> &body,
                      const NodeSchedule &sched, const CostTable &costs,
                      LoopPath &path, std::int64_t multiplier,
                      ResourceVector &out) {
  for (int i = 0; i < static_cast<int>(body.size()); ++i) {
    const BodyElem &e = body[i];
    if (e.isLoop()) {
      path.push_back(i);
      std::int64_t u = std::max<std::int64_t>(1, sched.unrollAt(path));
      computeResources(e.loop().children, sched, costs, path, multiplier * u,
                       out);
      path.pop_back();
    } else {
      const Stmt &s = e.stmt();
      if (s.kind != StmtKind::Compute)
        continue;
      const OpCost &c = costs.of(s.op);
      out.dsp += c.dsp * multiplier;
      out.lut += c.lut * multiplier;
      out.ff += c.ff * multiplier;
    }
  }
}

} // namespace

ResourceVector estimateResources(const DataflowGraph &g,
                                 const ScheduleMap &scheds,
                                 const CostTable &costs) {
  ResourceVector total;
  for (const auto &node : g.prog.nodes) {
    LoopPath path;
    computeResources(node.body, scheds.of(node.name), costs, path, 1, total);
  }

  // Channel storage.
  std::set<std::string> onEdges;
  for (const auto &e : g.edges) {
    onEdges.insert(e.array);
    if (!e.spec)
      continue;
    std::int64_t bits = 0;
    switch (e.spec->kind) {
    case BufferKind::Fifo:
      bits = e.spec->depth * e.spec->widthBits;
      break;
    case BufferKind::PingPong:
      bits = 2 * e.spec->blockElems * e.spec->widthBits;
      break;
    case BufferKind::Sequential:
      bits = g.prog.findArray(e.array)->numElems() * e.spec->widthBits;
      break;
    }
    total.bram18k += ceilDiv(bits, costs.bramBlockBits);
  }

  // Node-private scratch arrays (line/window buffers, accumulators).
  for (const auto &a : g.prog.arrays) {
    if (a.placement != Placement::Internal || onEdges.count(a.name))
      continue;
    std::int64_t f = 1;
    for (const auto &[nodeName, ns] : scheds.nodes) {
      auto it = ns.partitions.find(a.name);
      if (it != ns.partitions.end())
        f = std::max(f, it->second);
    }
    std::int64_t bits = a.numElems() * a.elemBits;
    total.bram18k += f * ceilDiv(bits, f * costs.bramBlockBits);
  }
  return total;
}

//===----------------------------------------------------------------------===//
// Graph latency
//===----------------------------------------------------------------------===//

std::int64_t estimateGraphLatency(const DataflowGraph &g,
                                  const ScheduleMap &scheds,
                                  const CostTable &costs) {
  auto fifo = fifoArraysOf(g);
  std::map<std::string, std::int64_t> lat, start;
  for (const auto &n : g.prog.nodes) {
    lat[n.name] = estimateNodeLatency(n, scheds.of(n.name), costs, fifo);
    start[n.name] = 0;
  }
  // Nodes are in topological order; relax start offsets edge by edge.
  for (const auto &n : g.prog.nodes) {
    for (const auto &e : g.edges) {
      if (e.producer != n.name)
        continue;
      std::int64_t delay = 0;
      BufferKind kind = e.spec ? e.spec->kind : BufferKind::Fifo;
      switch (kind) {
      case BufferKind::Fifo:
        delay = estimateNodeStartup(*g.prog.findNode(n.name),
                                    scheds.of(n.name), costs, fifo);
        break;
      case BufferKind::PingPong: {
        auto w = analysis::accessSummary(*g.prog.findNode(n.name), e.array,
                                         analysis::AccessMode::Write);
        std::int64_t blocks =
            std::max<std::int64_t>(1, w.count / std::max<std::int64_t>(
                                                     1, e.spec->blockElems));
        delay = ceilDiv(lat[n.name], blocks);
        break;
      }
      case BufferKind::Sequential:
        delay = lat[n.name];
        break;
      }
      start[e.consumer] =
          std::max(start[e.consumer], start[n.name] + delay);
    }
  }
  std::int64_t total = 0;
  for (const auto &n : g.prog.nodes)
    total = std::max(total, start[n.name] + lat[n.name]);
  return total;
}

} // namespace sluice::perf
