//===-- dse.cpp - Resource-aware bottleneck-centric scheduling --------------===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//

#include "sched/dse.hpp"

#include "analysis/dependence.hpp"
#include "support/error.hpp"
#include "xform/util.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace sluice::sched {

using namespace ir;
using analysis::LoopClass;
using perf::CostTable;
using perf::NodeSchedule;
using perf::ResourceVector;
using perf::ScheduleMap;

namespace {

struct NodeContext {
  std::map<LoopPath, LoopClass> classes;
  std::set<std::string> fifoArrays;
};

std::map<std::string, NodeContext> analyzeNodes(const DataflowGraph &g) {
  std::map<std::string, NodeContext> out;
  auto fifo = perf::fifoArraysOf(g);
  for (const auto &n : g.prog.nodes) {
    NodeContext ctx;
    ctx.fifoArrays = fifo;
    ctx.classes = analysis::classifyLoops(n, fifo);
    out[n.name] = std::move(ctx);
  }
  return out;
}

// Pipeline markers: the outermost loops that are not outer_unsafe; unsafe
// loops are descended into so their inner regions pipeline independently.
void markPipelined(const TaskNode &node, const NodeContext &ctx,
                   NodeSchedule &ns) {
  std::function<void(const std::vector<BodyElem> &, LoopPath &)> walk =
      [&](const std::vector<BodyElem> &body, LoopPath &path) {
        for (int i = 0; i < static_cast<int>(body.size()); ++i) {
          if (!body[i].isLoop())
            continue;
          path.push_back(i);
          auto cls = ctx.classes.find(path);
          bool unsafe = cls != ctx.classes.end() &&
                        cls->second == LoopClass::OuterUnsafe;
          if (unsafe) {
            walk(body[i].loop().children, path);
          } else {
            ns.loops[path].pipelined = true;
            ns.pipelined = true;
          }
          path.pop_back();
        }
      };
  LoopPath path;
  walk(node.body, path);
}

// Unroll-eligible loops, free class first, innermost first within a class.
std::vector<std::pair<LoopPath, const Loop *>>
unrollCandidates(const TaskNode &node, const NodeContext &ctx,
                 bool includeFifoIndex) {
  std::vector<std::pair<LoopPath, const Loop *>> freeLoops, fifoLoops;
  forEachLoop(node.body, [&](const Loop &l, const LoopPath &p) {
    auto it = ctx.classes.find(p);
    LoopClass cls = it == ctx.classes.end() ? LoopClass::Free : it->second;
    if (cls == LoopClass::Free)
      freeLoops.emplace_back(p, &l);
    else if (cls == LoopClass::FifoIndex)
      fifoLoops.emplace_back(p, &l);
  });
  auto innermostFirst = [](auto &v) {
    std::stable_sort(v.begin(), v.end(), [](const auto &a, const auto &b) {
      return a.first.size() > b.first.size();
    });
  };
  innermostFirst(freeLoops);
  innermostFirst(fifoLoops);
  if (includeFifoIndex)
    freeLoops.insert(freeLoops.end(), fifoLoops.begin(), fifoLoops.end());
  return freeLoops;
}

// Arrays whose subscripts a loop variable drives (partition mirrors unroll).
std::set<std::string> arraysDrivenBy(const TaskNode &node,
                                     const std::string &var) {
  std::set<std::string> out;
  forEachStmt(node.body, [&](const Stmt &s, const auto &) {
    if (s.kind != StmtKind::Load && s.kind != StmtKind::Store)
      return;
    for (const auto &e : s.index) {
      auto it = e.terms.find(var);
      if (it != e.terms.end() && it->second != 0)
        out.insert(s.array);
    }
  });
  return out;
}

// Realizes a degree as unroll factors (divisors, innermost-first) plus
// mirrored array partitions. Returns the achieved degree.
std::int64_t realizeSchedule(const TaskNode &node, const NodeContext &ctx,
                             std::int64_t degree, NodeSchedule &ns) {
  ns = NodeSchedule{};
  markPipelined(node, ctx, ns);
  std::int64_t remaining = std::max<std::int64_t>(1, degree);
  std::int64_t achieved = 1;
  for (const auto &[path, loop] : unrollCandidates(node, ctx, true)) {
    if (remaining == 1)
      break;
    std::int64_t f = std::gcd(remaining, loop->tripCount());
    if (f <= 1)
      continue;
    ns.loops[path].unroll = f;
    remaining /= f;
    achieved *= f;
    for (const auto &a : arraysDrivenBy(node, loop->var)) {
      if (ctx.fifoArrays.count(a))
        continue;
      auto &p = ns.partitions[a];
      p = std::max<std::int64_t>(1, p) * f;
    }
  }
  ns.degree = achieved;
  return achieved;
}

std::map<std::string, std::int64_t>
nodeLatencies(const DataflowGraph &g, const ScheduleMap &s,
              const CostTable &costs) {
  auto fifo = perf::fifoArraysOf(g);
  std::map<std::string, std::int64_t> out;
  for (const auto &n : g.prog.nodes)
    out[n.name] = perf::estimateNodeLatency(n, s.of(n.name), costs, fifo);
  return out;
}

ScheduleMap realizeAll(const DataflowGraph &g,
                       const std::map<std::string, NodeContext> &ctxs,
                       const std::map<std::string, std::int64_t> &degrees) {
  ScheduleMap s;
  for (const auto &n : g.prog.nodes) {
    NodeSchedule ns;
    realizeSchedule(n, ctxs.at(n.name), degrees.at(n.name), ns);
    s.nodes[n.name] = std::move(ns);
  }
  return s;
}

} // namespace

ScheduleMap initialAllocation(const DataflowGraph &g,
                              const SchedulerConfig &cfg,
                              const CostTable &costs) {
  auto ctxs = analyzeNodes(g);

  std::map<std::string, std::int64_t> ones;
  for (const auto &n : g.prog.nodes)
    ones[n.name] = 1;
  ScheduleMap base = realizeAll(g, ctxs, ones);
  if (g.prog.nodes.empty())
    return base;

  if (!perf::estimateResources(g, base, costs).fitsIn(cfg.budget))
    fail(ErrorKind::Budget,
         "resource budget infeasible even at unit parallelism");

  auto lat1 = nodeLatencies(g, base, costs);
  std::int64_t minLat = std::numeric_limits<std::int64_t>::max();
  for (const auto &[n, l] : lat1)
    minLat = std::min(minLat, std::max<std::int64_t>(1, l));

  std::map<std::string, std::int64_t> ratio;
  for (const auto &[n, l] : lat1)
    ratio[n] = std::max<std::int64_t>(
        1, std::llround(static_cast<double>(l) / static_cast<double>(minLat)));

  // Scale up uniformly while the budget and ceiling hold.
  ScheduleMap best = base;
  bool haveProportional = false;
  for (std::int64_t s = 1; s <= cfg.maxParallel; ++s) {
    std::map<std::string, std::int64_t> degrees;
    bool overCeiling = false;
    for (const auto &[n, r] : ratio) {
      degrees[n] = r * s;
      if (degrees[n] > cfg.maxParallel)
        overCeiling = true;
    }
    if (overCeiling && s > 1)
      break;
    if (overCeiling)
      for (auto &[n, d] : degrees)
        d = std::min(d, cfg.maxParallel);
    ScheduleMap cand = realizeAll(g, ctxs, degrees);
    if (!perf::estimateResources(g, cand, costs).fitsIn(cfg.budget))
      break;
    best = std::move(cand);
    haveProportional = true;
    if (overCeiling)
      break;
  }
  return haveProportional ? best : base;
}

ScheduleMap upscale(const DataflowGraph &g, const ScheduleMap &s,
                    const SchedulerConfig &cfg, const CostTable &costs) {
  auto ctxs = analyzeNodes(g);
  ScheduleMap cur = s;
  for (int iter = 0; iter < cfg.maxUpIters; ++iter) {
    auto lat = nodeLatencies(g, cur, costs);
    if (lat.empty())
      break;
    std::int64_t minLat = std::numeric_limits<std::int64_t>::max();
    for (const auto &[n, l] : lat)
      minLat = std::min(minLat, std::max<std::int64_t>(1, l));

    bool changed = false;
    for (const auto &node : g.prog.nodes) {
      std::int64_t l = lat[node.name];
      if (static_cast<double>(l) < cfg.nThreshold * static_cast<double>(minLat))
        continue;
      std::int64_t ratio =
          (l + minLat - 1) / std::max<std::int64_t>(1, minLat);
      std::int64_t curDeg = cur.of(node.name).degree;
      std::int64_t target = std::min(curDeg * ratio, cfg.maxParallel);
      // Budget binding stops growth: back off multiplicatively.
      while (target > curDeg) {
        ScheduleMap cand = cur;
        NodeSchedule ns;
        std::int64_t achieved =
            realizeSchedule(node, ctxs.at(node.name), target, ns);
        cand.nodes[node.name] = ns;
        if (achieved > curDeg &&
            perf::estimateResources(g, cand, costs).fitsIn(cfg.budget)) {
          cur = std::move(cand);
          changed = true;
          break;
        }
        target /= 2;
      }
    }
    if (!changed)
      break;
  }
  return cur;
}

ScheduleMap downscale(const DataflowGraph &g, const ScheduleMap &s,
                      const SchedulerConfig &cfg, const CostTable &costs) {
  auto ctxs = analyzeNodes(g);
  ScheduleMap cur = s;
  for (int iter = 0; iter < 10; ++iter) {
    auto lat = nodeLatencies(g, cur, costs);
    if (lat.empty())
      break;
    std::int64_t maxLat = 0;
    for (const auto &[n, l] : lat)
      maxLat = std::max(maxLat, l);

    bool changed = false;
    for (const auto &node : g.prog.nodes) {
      std::int64_t l = lat[node.name];
      if (l * cfg.nThreshold > static_cast<double>(maxLat))
        continue; // within the balance band, or the bottleneck itself
      std::int64_t curDeg = cur.of(node.name).degree;
      if (curDeg <= 1)
        continue;
      std::int64_t target = std::max<std::int64_t>(
          1, static_cast<std::int64_t>(
                 std::floor(static_cast<double>(curDeg) / cfg.nThreshold)));
      if (target >= curDeg)
        continue;
      NodeSchedule ns;
      realizeSchedule(node, ctxs.at(node.name), target, ns);
      auto fifo = perf::fifoArraysOf(g);
      std::int64_t newLat =
          perf::estimateNodeLatency(node, ns, costs, fifo);
      if (newLat > maxLat)
        continue; // never rise above the bottleneck
      cur.nodes[node.name] = ns;
      changed = true;
    }
    if (!changed)
      break;
  }
  return cur;
}

//===----------------------------------------------------------------------===//
// Inter-task propagation
//===----------------------------------------------------------------------===//

namespace {

// The loop (by path) driving dimension `dim` of `array` in this node, if the
// subscript is a single variable.
std::optional<LoopPath> drivingLoop(const TaskNode &node,
                                    const std::string &array, int dim,
                                    analysis::AccessMode mode) {
  std::optional<LoopPath> result;
  auto want = mode == analysis::AccessMode::Write ? StmtKind::Store
                                                  : StmtKind::Load;
  // first matching site wins
  bool found = false;
  forEachStmt(node.body, [&](const Stmt &s, const auto &) {
    if (found || s.kind != want || s.array != array)
      return;
    found = true;
    if (dim >= static_cast<int>(s.index.size()))
      return;
    auto v = s.index[dim].singleVar();
    if (!v)
      return;
    forEachLoop(node.body, [&](const Loop &l, const LoopPath &p) {
      if (l.var == *v && !result)
        result = p;
    });
  });
  return result;
}

} // namespace

std::pair<DataflowGraph, ScheduleMap>
propagateInterTask(const DataflowGraph &g, const ScheduleMap &s,
                   const SchedulerConfig &cfg, const CostTable &costs,
                   TransformLog &log) {
  DataflowGraph out = g;
  ScheduleMap cur = s;

  // Bottleneck first; its decisions win.
  auto lat = nodeLatencies(out, cur, costs);
  std::vector<std::string> order;
  for (const auto &n : out.prog.nodes)
    order.push_back(n.name);
  std::stable_sort(order.begin(), order.end(),
                   [&](const std::string &a, const std::string &b) {
                     return lat[a] > lat[b];
                   });

  std::set<std::string> settled;
  auto ctxs = analyzeNodes(out);

  for (const auto &name : order) {
    const TaskNode *node = out.prog.findNode(name);
    for (auto &edge : out.edges) {
      if (!edge.spec || edge.spec->kind != BufferKind::Fifo)
        continue;
      bool isProd = edge.producer == name;
      bool isCons = edge.consumer == name;
      if (!isProd && !isCons)
        continue;
      const std::string &partnerName = isProd ? edge.consumer : edge.producer;
      const TaskNode *partner = out.prog.findNode(partnerName);
      const ArrayDecl *decl = out.prog.findArray(edge.array);

      bool conflict = false;
      std::string why;
      ScheduleMap cand = cur;
      bool candChanged = false;

      for (int d = 0; d < static_cast<int>(decl->shape.size()); ++d) {
        auto myLoop = drivingLoop(*node, edge.array, d,
                                  isProd ? analysis::AccessMode::Write
                                         : analysis::AccessMode::Read);
        auto theirLoop = drivingLoop(*partner, edge.array, d,
                                     isProd ? analysis::AccessMode::Read
                                            : analysis::AccessMode::Write);
        std::int64_t mine =
            myLoop ? cur.of(name).unrollAt(*myLoop) : 1;
        std::int64_t theirs =
            theirLoop ? cand.of(partnerName).unrollAt(*theirLoop) : 1;
        if (mine == theirs)
          continue;
        if (settled.count(partnerName)) {
          conflict = true;
          why = "endpoints settled on unroll " + std::to_string(mine) +
                " vs " + std::to_string(theirs) + " for dimension " +
                std::to_string(d);
          break;
        }
        if (!theirLoop) {
          conflict = true;
          why = "partner has no loop driving dimension " + std::to_string(d);
          break;
        }
        const Loop *tl = loopAtPath(*partner, *theirLoop);
        if (tl->tripCount() % mine != 0) {
          conflict = true;
          why = "unroll " + std::to_string(mine) +
                " does not divide the partner trip count";
          break;
        }
        NodeSchedule ns = cand.of(partnerName);
        std::int64_t old = ns.unrollAt(*theirLoop);
        ns.loops[*theirLoop].unroll = mine;
        ns.degree = ns.degree / std::max<std::int64_t>(1, old) * mine;
        for (const auto &a : arraysDrivenBy(*partner, tl->var)) {
          if (perf::fifoArraysOf(out).count(a))
            continue;
          auto &p = ns.partitions[a];
          p = std::max<std::int64_t>(1, p) / std::max<std::int64_t>(1, old) *
              mine;
        }
        cand.nodes[partnerName] = ns;
        candChanged = true;
      }

      if (conflict) {
        edge.state = EdgeState::PingPongOnly;
        edge.stateReason = "conflicting parallelism obligations: " + why;
        BufferSpec spec = *edge.spec;
        spec.kind = BufferKind::PingPong;
        auto w = analysis::accessSummary(*out.prog.findNode(edge.producer),
                                         edge.array,
                                         analysis::AccessMode::Write);
        auto sites = xform::findSites(*out.prog.findNode(edge.producer),
                                      edge.array, StmtKind::Store);
        std::int64_t outerTrip =
            (!sites.empty() && !sites[0].chain.empty())
                ? sites[0].chain[0]->tripCount()
                : 1;
        spec.blockElems =
            std::max<std::int64_t>(1, w.count / std::max<std::int64_t>(
                                                    1, outerTrip));
        edge.spec = spec;
        log.push_back({"dse", "downgrade", edge.array, edge.producer,
                       edge.consumer, edge.stateReason, {}});
        continue;
      }
      if (candChanged &&
          perf::estimateResources(out, cand, costs).fitsIn(cfg.budget)) {
        cur = std::move(cand);
      } else if (candChanged) {
        edge.state = EdgeState::PingPongOnly;
        edge.stateReason = "propagated factors exceed the resource budget";
        BufferSpec spec = *edge.spec;
        spec.kind = BufferKind::PingPong;
        spec.blockElems = std::max<std::int64_t>(
            1, out.prog.findArray(edge.array)->numElems());
        edge.spec = spec;
        log.push_back({"dse", "downgrade", edge.array, edge.producer,
                       edge.consumer, edge.stateReason, {}});
      }
    }
    settled.insert(name);
  }
  return {out, cur};
}

//===----------------------------------------------------------------------===//
// Driver
//===----------------------------------------------------------------------===//

DseResult runDse(const DataflowGraph &g, const SchedulerConfig &cfg,
                 const CostTable &costs, TransformLog &log) {
  auto t0 = std::chrono::steady_clock::now();
  DseResult res{g, {}, {}};

  auto snapshot = [&](const std::string &name, const DataflowGraph &graph,
                      const ScheduleMap &s) {
    StageSnapshot snap;
    snap.name = name;
    snap.graphLatency = perf::estimateGraphLatency(graph, s, costs);
    snap.resources = perf::estimateResources(graph, s, costs);
    for (const auto &[n, ns] : s.nodes)
      snap.degrees[n] = ns.degree;
    res.report.stages.push_back(std::move(snap));
  };

  ScheduleMap pa = initialAllocation(g, cfg, costs);
  snapshot("PA", g, pa);
  ScheduleMap up = upscale(g, pa, cfg, costs);
  snapshot("PA+UP", g, up);
  ScheduleMap final = up;
  if (cfg.enableDownscale) {
    final = downscale(g, up, cfg, costs);
    snapshot("PA+UP+DP", g, final);
  }
  auto [graph, sched] = propagateInterTask(g, final, cfg, costs, log);
  res.graph = std::move(graph);
  res.schedule = std::move(sched);
  snapshot("final", res.graph, res.schedule);

  std::int64_t fifoEdges = 0;
  for (const auto &e : res.graph.edges)
    if (e.spec && e.spec->kind == BufferKind::Fifo)
      ++fifoEdges;
  res.report.fifoPercentage =
      res.graph.edges.empty()
          ? 1.0
          : static_cast<double>(fifoEdges) /
                static_cast<double>(res.graph.edges.size());

  res.report.wallMs = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
  return res;
}

} // namespace sluice::sched
