//===-- fine.cpp - Fine-grained violation elimination -----------------------===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//

#include "xform/fine.hpp"

#include "analysis/dependence.hpp"
#include "analysis/violations.hpp"
#include "support/error.hpp"
#include "xform/util.hpp"

#include <algorithm>
#include <limits>
#include <set>

namespace sluice::xform {

using namespace ir;
using analysis::AccessMode;

bool DepthMap::identity() const {
  return std::all_of(pairs.begin(), pairs.end(),
                     [](const auto &p) { return p.first == p.second; });
}

std::int64_t defaultNodeScore(const TaskNode &node) {
  // Total compute-op executions; reductions and heavy kernels dominate.
  std::int64_t score = 0;
  forEachStmt(node.body,
              [&](const Stmt &s, const std::vector<const Loop *> &chain) {
                if (s.kind != StmtKind::Compute)
                  return;
                std::int64_t n = 1;
                for (const Loop *l : chain)
                  n *= l->tripCount();
                score += n;
              });
  return score;
}

namespace {

std::int64_t tripProduct(const TaskNode &node) {
  std::int64_t n = 1;
  forEachLoop(node.body, [&](const Loop &l, const LoopPath &) {
    n *= std::max<std::int64_t>(1, l.tripCount());
  });
  return n;
}

// The node body as a pure singleton loop chain ending in a statement block:
// returns the chain and the innermost statement list, or nullopt when the
// body is not chain-shaped.
struct ChainView {
  std::vector<const Loop *> chain;
  const std::vector<BodyElem> *innermost = nullptr;
};

std::optional<ChainView> chainView(const TaskNode &node) {
  ChainView cv;
  const std::vector<BodyElem> *body = &node.body;
  while (body->size() == 1 && body->front().isLoop()) {
    cv.chain.push_back(&body->front().loop());
    body = &body->front().loop().children;
  }
  for (const auto &e : *body)
    if (e.isLoop())
      return std::nullopt;
  cv.innermost = body;
  return cv;
}

double accumulatorIdentity(OpKind op) {
  switch (op) {
  case OpKind::Add:
  case OpKind::Mac:
    return 0.0;
  case OpKind::Mul:
    return 1.0;
  case OpKind::Max:
    return std::numeric_limits<double>::lowest();
  default:
    return 0.0;
  }
}

} // namespace

//===----------------------------------------------------------------------===//
// Reduction operation rewriting
//===----------------------------------------------------------------------===//

DataflowGraph rewriteReduction(const DataflowGraph &g,
                               const std::string &producer,
                               const std::string &array, TransformLog &log) {
  Program prog = g.prog;
  TaskNode *node = prog.findNode(producer);
  if (!node)
    fail(ErrorKind::Internal, "rewrite: unknown node '" + producer + "'");

  auto cv = chainView(*node);
  if (!cv)
    fail(ErrorKind::Unresolvable,
         "reduction rewrite needs a single loop-chain body in '" + producer +
             "'");

  auto stores = findSites(*node, array, StmtKind::Store);
  if (stores.empty())
    fail(ErrorKind::Internal, "rewrite: no stores to '" + array + "'");

  // Separability: one common subscript list over single loop variables.
  const std::vector<AffineExpr> &index = stores[0].stmt->index;
  for (const auto &s : stores)
    if (s.stmt->index != index)
      fail(ErrorKind::Unresolvable,
           "stores to '" + array + "' use differing subscripts");
  std::set<std::string> indexVars;
  for (const auto &e : index) {
    if (e.isConstant())
      continue;
    auto v = e.singleVar();
    if (!v)
      fail(ErrorKind::Unresolvable,
           "subscript of '" + array + "' mixes loop dimensions");
    indexVars.insert(*v);
  }

  std::vector<const Loop *> indexLoops, reductionLoops;
  for (const Loop *l : cv->chain)
    (indexVars.count(l->var) ? indexLoops : reductionLoops).push_back(l);
  if (reductionLoops.empty())
    return g; // nothing to hoist: precondition fails, unchanged

  // Loads of the connecting array must be the read-modify-write companion of
  // the store (same subscripts); anything else is inseparable.
  bool rmw = false;
  OpKind accOp = OpKind::Add;
  for (const auto &site : findSites(*node, array, StmtKind::Load)) {
    if (site.stmt->index != index)
      fail(ErrorKind::Unresolvable,
           "load of '" + array + "' is not the accumulation companion");
    rmw = true;
  }
  if (rmw) {
    // The op of the compute consuming the companion load decides the
    // accumulator identity.
    std::set<std::string> loadIds;
    for (const auto &site : findSites(*node, array, StmtKind::Load))
      loadIds.insert(site.stmt->result);
    bool found = false;
    for (const auto &e : *cv->innermost) {
      if (!e.isStmt())
        continue;
      const Stmt &s = e.stmt();
      if (s.kind != StmtKind::Compute || found)
        continue;
      for (const auto &o : s.operands)
        if (!o.isConst && loadIds.count(o.value)) {
          accOp = s.op;
          found = true;
        }
    }
    if (!found)
      fail(ErrorKind::Unresolvable,
           "no accumulation op consumes the companion load of '" + array +
               "'");
  }

  std::int64_t writesBefore = 1;
  for (const Loop *l : cv->chain)
    writesBefore *= l->tripCount();
  writesBefore *= static_cast<std::int64_t>(stores.size());

  // Fresh one-element accumulator.
  std::string tmp = freshArrayName(prog, array + "_acc");
  {
    ArrayDecl td;
    td.name = tmp;
    td.shape = {1};
    td.elemBits = prog.findArray(array)->elemBits;
    td.placement = Placement::Internal;
    prog.arrays.push_back(td);
  }

  // Innermost statements with the connecting array redirected to tmp[0].
  std::vector<BodyElem> inner = *cv->innermost;
  for (auto &e : inner) {
    Stmt &s = e.stmt();
    if ((s.kind == StmtKind::Load || s.kind == StmtKind::Store) &&
        s.array == array) {
      s.array = tmp;
      s.index = {AffineExpr::constExpr(0)};
    }
  }

  auto makeHeader = [](const Loop *l) {
    Loop h;
    h.var = l->var;
    h.lower = l->lower;
    h.upper = l->upper;
    h.step = l->step;
    return h;
  };

  // reduction loops, innermost-first assembly
  std::vector<BodyElem> redBody = std::move(inner);
  for (auto it = reductionLoops.rbegin(); it != reductionLoops.rend(); ++it) {
    Loop h = makeHeader(*it);
    h.children = std::move(redBody);
    redBody.clear();
    redBody.push_back(BodyElem::make(std::move(h)));
  }

  // index-point block: [init], reduction nest, hoisted store
  std::vector<BodyElem> point;
  if (rmw) {
    Stmt init;
    init.kind = StmtKind::Store;
    init.array = tmp;
    init.index = {AffineExpr::constExpr(0)};
    init.operands = {Operand::lit(accumulatorIdentity(accOp))};
    point.push_back(BodyElem::make(std::move(init)));
  }
  for (auto &e : redBody)
    point.push_back(std::move(e));
  {
    Stmt out;
    out.kind = StmtKind::Load;
    out.array = tmp;
    out.index = {AffineExpr::constExpr(0)};
    out.result = "acc_out";
    point.push_back(BodyElem::make(std::move(out)));
    Stmt st;
    st.kind = StmtKind::Store;
    st.array = array;
    st.index = index;
    st.operands = {Operand::val("acc_out")};
    point.push_back(BodyElem::make(std::move(st)));
  }

  std::vector<BodyElem> body = std::move(point);
  for (auto it = indexLoops.rbegin(); it != indexLoops.rend(); ++it) {
    Loop h = makeHeader(*it);
    h.children = std::move(body);
    body.clear();
    body.push_back(BodyElem::make(std::move(h)));
  }
  node->body = std::move(body);

  std::int64_t writesAfter = 1;
  for (const Loop *l : indexLoops)
    writesAfter *= l->tripCount();

  TransformEntry entry{"fine", "reduction_rewrite", array, producer, "", "",
                       {}};
  entry.detail = "sank " + std::to_string(reductionLoops.size()) +
                 " reduction loops innermost; accumulator '" + tmp + "'";
  entry.metrics["write_count_before"] = writesBefore;
  entry.metrics["write_count_after"] = writesAfter;
  log.push_back(std::move(entry));

  return rebuildGraph(std::move(prog), g);
}

//===----------------------------------------------------------------------===//
// Permutation map generation and application
//===----------------------------------------------------------------------===//

std::optional<DepthMap>
generatePermutationMap(const DataflowGraph &g, const std::string &reference,
                       const std::string &target, const std::string &array,
                       std::string *reason) {
  auto bail = [&](const std::string &why) -> std::optional<DepthMap> {
    if (reason)
      *reason = why;
    return std::nullopt;
  };

  const TaskNode *ref = g.prog.findNode(reference);
  const TaskNode *tgt = g.prog.findNode(target);
  if (!ref || !tgt)
    return bail("unknown node");

  AccessMode refMode = analysis::accessesArray(*ref, array, AccessMode::Write)
                           ? AccessMode::Write
                           : AccessMode::Read;
  AccessMode tgtMode = refMode == AccessMode::Write ? AccessMode::Read
                                                    : AccessMode::Write;

  auto refSum = analysis::accessSummary(*ref, array, refMode);
  auto tgtSum = analysis::accessSummary(*tgt, array, tgtMode);

  size_t rank = refSum.dimToDepth.size();
  std::vector<int> refDepth(rank), tgtDepth(rank);
  for (size_t d = 0; d < rank; ++d) {
    if (!refSum.dimToDepth[d] || !tgtSum.dimToDepth[d])
      return bail("dimension " + std::to_string(d) +
                  " is unmapped on one side (non-bijective correspondence)");
    refDepth[d] = *refSum.dimToDepth[d];
    tgtDepth[d] = *tgtSum.dimToDepth[d];
  }

  // Dims in the reference traversal order.
  std::vector<int> dimsByRef(rank);
  for (size_t d = 0; d < rank; ++d)
    dimsByRef[d] = static_cast<int>(d);
  std::sort(dimsByRef.begin(), dimsByRef.end(),
            [&](int a, int b) { return refDepth[a] < refDepth[b]; });

  // The target's driving depths are reassigned in place: the j-th slot (in
  // ascending depth order) receives the j-th dim of the reference order.
  std::vector<int> slots(tgtDepth.begin(), tgtDepth.end());
  std::sort(slots.begin(), slots.end());
  if (std::adjacent_find(slots.begin(), slots.end()) != slots.end())
    return bail("two dimensions share one target loop depth");

  DepthMap map;
  for (size_t j = 0; j < rank; ++j) {
    int dim = dimsByRef[j];
    map.pairs[tgtDepth[dim]] = slots[j];
  }

  // Unit-tiling records to align depth counts (informational).
  std::int64_t refLoops = 0, tgtLoops = 0;
  forEachLoop(ref->body, [&](const Loop &, const LoopPath &) { ++refLoops; });
  forEachLoop(tgt->body, [&](const Loop &, const LoopPath &) { ++tgtLoops; });
  if (refLoops != tgtLoops) {
    std::int64_t lo = std::min(refLoops, tgtLoops);
    std::int64_t hi = std::max(refLoops, tgtLoops);
    for (std::int64_t d = lo; d < hi; ++d)
      map.tilingApplied.emplace_back(static_cast<int>(d), 1);
  }

  // Legality: every moved loop must be free of carried flow dependences.
  for (const auto &[from, to] : map.pairs) {
    if (from == to)
      continue;
    LoopPath path;
    if (!loopAtDepth(*tgt, from, &path))
      return bail("target loop at depth " + std::to_string(from) +
                  " is missing");
    if (analysis::loopCarriedKind(*tgt, path) !=
        analysis::CarriedKind::None)
      return bail("permutation illegal: loop at depth " +
                  std::to_string(from) + " carries a dependence");
  }
  return map;
}

DataflowGraph applyPermutation(const DataflowGraph &g, const std::string &target,
                               const DepthMap &map, TransformLog &log) {
  Program prog = g.prog;
  TaskNode *node = prog.findNode(target);
  if (!node)
    fail(ErrorKind::Internal, "permute: unknown node '" + target + "'");
  if (map.identity()) {
    log.push_back({"fine", "permutation", "", target, "", "identity map", {}});
    return rebuildGraph(std::move(prog), g);
  }

  int depthNeeded = 0;
  for (const auto &[from, to] : map.pairs)
    depthNeeded = std::max({depthNeeded, from + 1, to + 1});

  auto chain = outerChain(*node);
  if (static_cast<int>(chain.size()) < depthNeeded)
    fail(ErrorKind::Unresolvable,
         "permutation map references depths missing from '" + target + "'");

  // Permute headers among the first depthNeeded chain positions.
  std::vector<Loop> headers;
  for (int d = 0; d < depthNeeded; ++d) {
    Loop h;
    h.var = chain[d]->var;
    h.lower = chain[d]->lower;
    h.upper = chain[d]->upper;
    h.step = chain[d]->step;
    h.sched = chain[d]->sched;
    headers.push_back(std::move(h));
  }
  std::vector<std::optional<Loop>> placed(depthNeeded);
  std::vector<bool> moved(depthNeeded, false);
  for (const auto &[from, to] : map.pairs) {
    placed[to] = headers[from];
    moved[from] = true;
  }
  for (int d = 0; d < depthNeeded; ++d) {
    if (moved[d])
      continue;
    if (placed[d])
      fail(ErrorKind::Unresolvable,
           "permutation map collides at depth " + std::to_string(d));
    placed[d] = headers[d];
  }

  // Subtree below the permuted prefix (children of the last permuted loop,
  // or deeper chain).
  std::vector<BodyElem> below = chain[depthNeeded - 1]->children;

  std::vector<BodyElem> body = std::move(below);
  for (int d = depthNeeded - 1; d >= 0; --d) {
    Loop h = std::move(*placed[d]);
    h.children = std::move(body);
    body.clear();
    body.push_back(BodyElem::make(std::move(h)));
  }
  node->body = std::move(body);

  TransformEntry entry{"fine", "permutation", "", target, "", "", {}};
  std::string desc;
  for (const auto &[from, to] : map.pairs)
    desc += (desc.empty() ? "" : ", ") + std::to_string(from) + "->" +
            std::to_string(to);
  entry.detail = "permuted loops: " + desc;
  log.push_back(std::move(entry));

  return rebuildGraph(std::move(prog), g);
}

//===----------------------------------------------------------------------===//
// Pass driver
//===----------------------------------------------------------------------===//

DataflowGraph eliminateFine(const DataflowGraph &g, TransformLog &log,
                            const FineOptions &opts) {
  auto score = opts.score ? opts.score : defaultNodeScore;
  auto annotated = [](const BufferEdge &e) {
    return e.state != EdgeState::Clean;
  };

  DataflowGraph cur = g;
  for (int round = 0; round < opts.maxRounds; ++round) {
    bool changed = false;
    auto violations = analysis::detectFineViolations(cur, opts.enumeration);
    // Drop findings on edges already annotated by earlier rounds or passes.
    violations.erase(
        std::remove_if(violations.begin(), violations.end(),
                       [&](const analysis::FineViolation &v) {
                         const BufferEdge *e =
                             cur.findEdge(v.array, v.producer, v.consumer);
                         return e && annotated(*e);
                       }),
        violations.end());
    if (violations.empty())
      break;

    for (const auto &v : violations) {
      BufferEdge *edge = nullptr;
      for (auto &e : cur.edges)
        if (e.array == v.array && e.producer == v.producer &&
            e.consumer == v.consumer)
          edge = &e;
      if (!edge || annotated(*edge))
        continue;

      if (v.kind == analysis::FineKind::CountMismatch) {
        if (v.writeCount > v.readCount) {
          try {
            cur = rewriteReduction(cur, v.producer, v.array, log);
            changed = true;
          } catch (const Error &e) {
            if (e.kind() != ErrorKind::Unresolvable)
              throw;
            for (auto &ed : cur.edges)
              if (ed.key() == edge->key()) {
                ed.state = EdgeState::PingPongOnly;
                ed.stateReason = e.what();
              }
            log.push_back({"fine", "downgrade", v.array, v.producer,
                           v.consumer, e.what(), {}});
          }
        } else {
          // Consumer reads elements more than once (stencil-style); the
          // reuse-buffer pass resolves it after buffer determination.
          for (auto &ed : cur.edges)
            if (ed.key() == edge->key()) {
              ed.state = EdgeState::NeedsReuse;
              ed.stateReason = "consumer multi-read (" +
                               std::to_string(v.readCount) + " reads of " +
                               std::to_string(v.writeCount) + " elements)";
            }
          log.push_back({"fine", "defer_reuse", v.array, v.producer,
                         v.consumer,
                         "consumer-side multi-read delegated to reuse buffer "
                         "generation",
                         {}});
        }
        continue;
      }

      // Order mismatch: the higher-scoring endpoint is the reference and is
      // never mutated.
      std::int64_t ps = score(*cur.prog.findNode(v.producer));
      std::int64_t cs = score(*cur.prog.findNode(v.consumer));
      std::string reference = v.producer, target = v.consumer;
      if (cs > ps) {
        reference = v.consumer;
        target = v.producer;
      } else if (cs == ps) {
        std::int64_t pt = tripProduct(*cur.prog.findNode(v.producer));
        std::int64_t ct = tripProduct(*cur.prog.findNode(v.consumer));
        if (ct > pt) {
          reference = v.consumer;
          target = v.producer;
        } else if (ct == pt) {
          // declaration order: earlier node is the reference
          for (const auto &n : cur.prog.nodes) {
            if (n.name == v.producer)
              break;
            if (n.name == v.consumer) {
              reference = v.consumer;
              target = v.producer;
              break;
            }
          }
        }
      }

      std::string reason;
      auto map = generatePermutationMap(cur, reference, target, v.array,
                                        &reason);
      if (map) {
        try {
          cur = applyPermutation(cur, target, *map, log);
          changed = true;
          continue;
        } catch (const Error &e) {
          if (e.kind() != ErrorKind::Unresolvable)
            throw;
          reason = e.what();
        }
      }
      for (auto &ed : cur.edges)
        if (ed.key() == edge->key()) {
          ed.state = EdgeState::PingPongOnly;
          ed.stateReason = reason;
        }
      log.push_back(
          {"fine", "downgrade", v.array, v.producer, v.consumer, reason, {}});
    }
    if (!changed)
      break;
  }

  // Confirm: anything still violating that carries no annotation falls back
  // to ping-pong.
  auto rest = analysis::detectFineViolations(cur, opts.enumeration);
  for (const auto &v : rest) {
    for (auto &e : cur.edges) {
      if (e.array == v.array && e.producer == v.producer &&
          e.consumer == v.consumer && e.state == EdgeState::Clean) {
        e.state = EdgeState::PingPongOnly;
        e.stateReason = "residual " + std::string(analysis::fineKindName(v.kind));
        log.push_back({"fine", "downgrade", v.array, v.producer, v.consumer,
                       e.stateReason, {}});
      }
    }
  }
  return cur;
}

} // namespace sluice::xform
