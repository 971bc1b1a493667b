//===-- coarse.cpp - Coarse-grained violation elimination -------------------===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//

#include "xform/coarse.hpp"

#include "analysis/access.hpp"
#include "analysis/violations.hpp"
#include "support/error.hpp"
#include "xform/util.hpp"

#include <algorithm>
#include <set>

namespace sluice::xform {

using namespace ir;
using analysis::AccessMode;

namespace {

int nodePosition(const Program &p, const std::string &name) {
  for (size_t i = 0; i < p.nodes.size(); ++i)
    if (p.nodes[i].name == name)
      return static_cast<int>(i);
  return -1;
}

void markEdgesSequential(DataflowGraph &g, const std::string &array,
                         const std::string &reason) {
  for (auto &e : g.edges)
    if (e.array == array) {
      e.state = EdgeState::Sequential;
      e.stateReason = reason;
    }
}

//===----------------------------------------------------------------------===//
// SPMC: duplicator insertion
//===----------------------------------------------------------------------===//

DataflowGraph doSplit(const DataflowGraph &g, const std::string &array,
                      TransformLog &log) {
  const ArrayDecl *decl = g.prog.findArray(array);
  if (!decl)
    fail(ErrorKind::Internal, "split: unknown array '" + array + "'");

  auto it = g.arrayIndex.find(array);
  const auto &writers = it->second.first;
  const auto &readers = it->second.second;

  if (decl->placement == Placement::External) {
    // Off-chip inputs are not buffers between tasks; every reader simply
    // keeps its own read port.
    log.push_back({"coarse", "clone_external_read", array, "", "",
                   "external input read by " +
                       std::to_string(readers.size()) + " nodes; no node inserted",
                   {}});
    return g;
  }
  if (writers.size() != 1 || readers.size() < 2)
    return g; // precondition fails: unchanged

  Program prog = g.prog;
  const TaskNode *writer = prog.findNode(writers[0]);

  // The duplicator re-reads in the producer's write order. When all write
  // sites share one loop chain and one subscript list, that chain is reused
  // directly; otherwise fall back to canonical row-major order.
  auto sites = findSites(*writer, array, StmtKind::Store);
  bool uniform = !sites.empty();
  for (const auto &s : sites)
    if (s.chain != sites[0].chain || s.stmt->index != sites[0].stmt->index)
      uniform = false;

  std::vector<std::string> clones;
  for (size_t i = 0; i < readers.size(); ++i) {
    std::string clone = freshArrayName(prog, array + "_c" + std::to_string(i));
    ArrayDecl cd = *decl;
    cd.name = clone;
    prog.arrays.push_back(cd);
    clones.push_back(clone);
  }

  TaskNode dup;
  dup.name = freshNodeName(prog, array + "_dup");
  std::vector<AffineExpr> index;
  std::vector<BodyElem> *cursor = &dup.body;
  if (uniform) {
    for (const Loop *l : sites[0].chain) {
      Loop copy;
      copy.var = l->var;
      copy.lower = l->lower;
      copy.upper = l->upper;
      copy.step = l->step;
      cursor->push_back(BodyElem::make(std::move(copy)));
      cursor = &cursor->back().loop().children;
    }
    index = sites[0].stmt->index;
  } else {
    for (size_t d = 0; d < decl->shape.size(); ++d) {
      Loop l;
      l.var = "d" + std::to_string(d);
      l.lower = 0;
      l.upper = decl->shape[d];
      cursor->push_back(BodyElem::make(std::move(l)));
      index.push_back(AffineExpr::var("d" + std::to_string(d)));
      cursor = &cursor->back().loop().children;
    }
  }
  Stmt load;
  load.kind = StmtKind::Load;
  load.array = array;
  load.index = index;
  load.result = "v";
  cursor->push_back(BodyElem::make(std::move(load)));
  for (const auto &clone : clones) {
    Stmt store;
    store.kind = StmtKind::Store;
    store.array = clone;
    store.index = index;
    store.operands = {Operand::val("v")};
    cursor->push_back(BodyElem::make(std::move(store)));
  }

  // Clone-to-reader pairing follows reader declaration order.
  for (size_t i = 0; i < readers.size(); ++i)
    redirectArray(*prog.findNode(readers[i]), array, clones[i],
                  Redirect::Loads);

  int pos = nodePosition(prog, writers[0]);
  prog.nodes.insert(prog.nodes.begin() + pos + 1, std::move(dup));

  TransformEntry entry{"coarse", "split", array, writers[0], "", "", {}};
  entry.detail = "inserted duplicator '" + prog.nodes[pos + 1].name +
                 "' fanning out to " + std::to_string(clones.size()) +
                 " clones" + (uniform ? "" : " (canonical order)");
  entry.metrics["readers"] = static_cast<std::int64_t>(readers.size());
  log.push_back(std::move(entry));

  return rebuildGraph(std::move(prog), g);
}

//===----------------------------------------------------------------------===//
// MPSC: node fusion
//===----------------------------------------------------------------------===//

struct DimBox {
  bool full = false;                                 // whole array
  std::vector<std::pair<std::int64_t, std::int64_t>> dims; // inclusive
};

// Footprint of one writer's stores to `array` as a box over array
// coordinates, or nullopt when it is not box-expressible.
std::optional<DimBox> writerFootprint(const TaskNode &writer,
                                      const ArrayDecl &decl) {
  auto sites = findSites(writer, decl.name, StmtKind::Store);
  if (sites.empty())
    return std::nullopt;

  std::optional<DimBox> result;
  for (const auto &site : sites) {
    DimBox box;
    std::map<std::string, const Loop *> loopOf;
    for (const Loop *l : site.chain)
      loopOf[l->var] = l;

    std::map<std::string, std::pair<std::int64_t, std::int64_t>> guardIv;
    if (site.stmt->guard) {
      auto iv = analysis::rectangularIntervals(*site.stmt->guard);
      if (!iv)
        return std::nullopt;
      guardIv = *iv;
    }

    for (const auto &e : site.stmt->index) {
      if (e.isConstant()) {
        box.dims.emplace_back(e.constant, e.constant);
        continue;
      }
      auto v = e.singleVar();
      if (!v || e.terms.at(*v) != 1)
        return std::nullopt;
      auto lit = loopOf.find(*v);
      if (lit == loopOf.end() || lit->second->step != 1)
        return std::nullopt;
      std::int64_t lo = lit->second->lower;
      std::int64_t hi = lit->second->upper - 1;
      auto git = guardIv.find(*v);
      if (git != guardIv.end()) {
        lo = std::max(lo, git->second.first);
        hi = std::min(hi, git->second.second);
      }
      box.dims.emplace_back(lo + e.constant, hi + e.constant);
    }
    if (!result) {
      result = box;
    } else if (!(result->dims == box.dims)) {
      return std::nullopt; // union of differing boxes: not expressible
    }
  }
  // Full-domain detection.
  bool full = true;
  for (size_t d = 0; d < decl.shape.size(); ++d)
    if (result->dims[d].first > 0 || result->dims[d].second < decl.shape[d] - 1)
      full = false;
  result->full = full;
  return result;
}

DataflowGraph doFuse(const DataflowGraph &g, const std::string &array,
                     TransformLog &log) {
  const ArrayDecl *decl = g.prog.findArray(array);
  auto idx = g.arrayIndex.find(array);
  const auto &writers = idx->second.first;
  if (writers.size() < 2)
    return g;

  auto infeasible = [&](const std::string &why) -> DataflowGraph {
    log.push_back({"coarse", "fusion_infeasible", array, "", "", why, {}});
    fail(ErrorKind::Unresolvable,
         "fusion infeasible for '" + array + "': " + why);
  };

  Program prog = g.prog;
  std::vector<const TaskNode *> ws;
  for (const auto &w : writers)
    ws.push_back(prog.findNode(w));

  // Writers must be adjacent up to nodes that touch none of their arrays.
  std::vector<int> positions;
  for (const auto &w : writers)
    positions.push_back(nodePosition(prog, w));
  std::set<std::string> touched;
  for (const TaskNode *w : ws) {
    for (const auto &a : arraysRead(*w))
      touched.insert(a);
    for (const auto &a : arraysWritten(*w))
      touched.insert(a);
  }
  for (int p = positions.front(); p <= positions.back(); ++p) {
    const TaskNode &mid = prog.nodes[p];
    if (std::find(writers.begin(), writers.end(), mid.name) != writers.end())
      continue;
    for (const auto &a : arraysRead(mid))
      if (touched.count(a))
        return infeasible("node '" + mid.name + "' interleaves with writers");
    for (const auto &a : arraysWritten(mid))
      if (touched.count(a))
        return infeasible("node '" + mid.name + "' interleaves with writers");
  }

  // No cross-writer dependences: no writer may read the shared array or any
  // array another writer produces.
  for (size_t i = 0; i < ws.size(); ++i) {
    auto reads = arraysRead(*ws[i]);
    if (std::find(reads.begin(), reads.end(), array) != reads.end())
      return infeasible("writer '" + ws[i]->name + "' also reads the buffer");
    for (size_t j = 0; j < ws.size(); ++j) {
      if (i == j)
        continue;
      for (const auto &a : arraysWritten(*ws[j]))
        if (std::find(reads.begin(), reads.end(), a) != reads.end())
          return infeasible("writers are dependence-ordered through '" + a +
                            "'");
    }
  }

  // Shared outer iteration domain: maximal common loop-chain prefix with
  // identical bounds.
  std::vector<std::vector<const Loop *>> chains;
  for (const TaskNode *w : ws)
    chains.push_back(outerChain(*w));
  size_t prefixLen = chains[0].size();
  for (const auto &c : chains)
    prefixLen = std::min(prefixLen, c.size());
  size_t k = 0;
  for (; k < prefixLen; ++k) {
    bool same = true;
    for (const auto &c : chains)
      if (c[k]->lower != chains[0][k]->lower ||
          c[k]->upper != chains[0][k]->upper || c[k]->step != chains[0][k]->step)
        same = false;
    if (!same)
      break;
  }
  if (k == 0)
    return infeasible("writers share no outer iteration domain");

  // The guarded merge store needs the store subscripts to range over the
  // shared prefix variables only, and they must agree across writers.
  std::set<std::string> prefixVars;
  for (size_t d = 0; d < k; ++d)
    prefixVars.insert(chains[0][d]->var);
  {
    auto firstSites = findSites(*ws[0], array, StmtKind::Store);
    const auto &refIndex = firstSites[0].stmt->index;
    for (size_t i = 0; i < ws.size(); ++i) {
      for (const auto &site : findSites(*ws[i], array, StmtKind::Store)) {
        std::vector<AffineExpr> renamed = site.stmt->index;
        for (size_t d = 0; d < k; ++d)
          if (chains[i][d]->var != chains[0][d]->var)
            for (auto &e : renamed)
              e.renameVar(chains[i][d]->var, chains[0][d]->var);
        if (renamed != refIndex)
          return infeasible("writers store through differing subscripts");
        for (const auto &e : renamed)
          for (const auto &[v, c] : e.terms)
            if (c != 0 && !prefixVars.count(v))
              return infeasible(
                  "store subscripts use variables below the shared domain");
      }
    }
  }

  std::vector<DimBox> boxes;
  for (const TaskNode *w : ws) {
    auto b = writerFootprint(*w, *decl);
    if (!b)
      return infeasible("writer '" + w->name +
                        "' has a non-rectangular write footprint");
    boxes.push_back(*b);
  }
  // Earlier writers must be representable as one region: either some earlier
  // writer covers the whole array, or there is exactly one earlier writer.
  bool earlierFull =
      std::any_of(boxes.begin(), boxes.end() - 1,
                  [](const DimBox &b) { return b.full; });
  if (!earlierFull && ws.size() > 2)
    return infeasible("multiple partial earlier writers");
  const DimBox &lastBox = boxes.back();

  // Build the fused node.
  TaskNode fused;
  fused.name = freshNodeName(prog, ws[0]->name + "_fused");
  std::vector<BodyElem> *cursor = &fused.body;
  std::vector<const Loop *> prefix(chains[0].begin(), chains[0].begin() + k);
  for (const Loop *l : prefix) {
    Loop copy;
    copy.var = l->var;
    copy.lower = l->lower;
    copy.upper = l->upper;
    copy.step = l->step;
    cursor->push_back(BodyElem::make(std::move(copy)));
    cursor = &cursor->back().loop().children;
  }

  std::string tmp;
  bool lastFull = lastBox.full;
  if (!lastFull) {
    tmp = freshArrayName(prog, array + "_stage");
    ArrayDecl td = *decl;
    td.name = tmp;
    td.placement = Placement::Internal;
    prog.arrays.push_back(td);
  }

  // Splice each writer's structure below the shared prefix, renaming its
  // prefix variables onto writer 0's and prefixing value ids.
  for (size_t i = 0; i < ws.size(); ++i) {
    const std::vector<BodyElem> *below = &ws[i]->body;
    for (size_t d = 0; d < k; ++d)
      below = &(*below)[0].loop().children;
    std::vector<BodyElem> part = *below;
    for (size_t d = 0; d < k; ++d)
      if (chains[i][d]->var != prefix[d]->var)
        renameLoopVar(part, chains[i][d]->var, prefix[d]->var);
    prefixValueIds(part, "f" + std::to_string(i) + "_");
    bool isLast = i + 1 == ws.size();
    // Earlier writers stage into the temporary unless the last writer
    // overwrites everything (then their stores are dead).
    if (!isLast) {
      if (lastFull)
        continue; // dead stores: drop the entire earlier writer
      std::vector<BodyElem> redirected = part;
      TaskNode shim;
      shim.body = std::move(redirected);
      redirectArray(shim, array, tmp, Redirect::Stores);
      part = std::move(shim.body);
    }
    for (auto &elem : part)
      cursor->push_back(std::move(elem));
  }

  // Guarded merge: elements the earlier writers produced that the last
  // writer does not overwrite.
  if (!lastFull) {
    // store index over prefix vars: the common store subscripts
    auto lastSites = findSites(*ws.back(), array, StmtKind::Store);
    std::vector<AffineExpr> mergeIndex = lastSites[0].stmt->index;

    Guard guard;
    if (!earlierFull) {
      const DimBox &eb = boxes[0];
      GuardClause on;
      for (size_t d = 0; d < mergeIndex.size(); ++d) {
        on.constraints.push_back(
            {AffineExpr{mergeIndex[d].terms,
                        mergeIndex[d].constant - eb.dims[d].first},
             CmpKind::Ge});
        on.constraints.push_back(
            {AffineExpr{mergeIndex[d].terms,
                        mergeIndex[d].constant - eb.dims[d].second},
             CmpKind::Le});
      }
      guard.clauses.push_back(std::move(on));
    }
    GuardClause offLast;
    offLast.negated = true;
    for (size_t d = 0; d < mergeIndex.size(); ++d) {
      offLast.constraints.push_back(
          {AffineExpr{mergeIndex[d].terms,
                      mergeIndex[d].constant - lastBox.dims[d].first},
           CmpKind::Ge});
      offLast.constraints.push_back(
          {AffineExpr{mergeIndex[d].terms,
                      mergeIndex[d].constant - lastBox.dims[d].second},
           CmpKind::Le});
    }
    guard.clauses.push_back(std::move(offLast));

    Stmt mload;
    mload.kind = StmtKind::Load;
    mload.array = tmp;
    mload.index = mergeIndex;
    mload.result = "merge_v";
    mload.guard = guard;
    Stmt mstore;
    mstore.kind = StmtKind::Store;
    mstore.array = array;
    mstore.index = mergeIndex;
    mstore.operands = {Operand::val("merge_v")};
    mstore.guard = guard;
    cursor->push_back(BodyElem::make(std::move(mload)));
    cursor->push_back(BodyElem::make(std::move(mstore)));
  }

  // Replace the writers with the fused node at the first writer's position.
  int firstPos = positions.front();
  std::vector<TaskNode> nodes;
  for (int p = 0; p < static_cast<int>(prog.nodes.size()); ++p) {
    if (p == firstPos) {
      nodes.push_back(fused);
      continue;
    }
    if (std::find(writers.begin(), writers.end(), prog.nodes[p].name) !=
        writers.end())
      continue;
    nodes.push_back(prog.nodes[p]);
  }
  prog.nodes = std::move(nodes);

  TransformEntry entry{"coarse", "fuse", array, "", "", "", {}};
  entry.detail = "fused " + std::to_string(ws.size()) + " writers into '" +
                 fused.name + "'" + (lastFull ? " (last writer covers all)"
                                              : " (guarded merge)");
  entry.metrics["writers"] = static_cast<std::int64_t>(ws.size());
  log.push_back(std::move(entry));

  return rebuildGraph(std::move(prog), g);
}

//===----------------------------------------------------------------------===//
// MPMC: buffer duplication
//===----------------------------------------------------------------------===//

DataflowGraph doDuplicate(const DataflowGraph &g, const std::string &array,
                          TransformLog &log) {
  const ArrayDecl *decl = g.prog.findArray(array);
  auto idx = g.arrayIndex.find(array);
  const auto &writers = idx->second.first;
  const auto &readers = idx->second.second;
  if (writers.size() < 2 || readers.size() < 2)
    return g;

  using AddrSet = std::set<std::vector<std::int64_t>>;
  auto footprint = [&](const std::string &node,
                       AccessMode mode) -> std::optional<AddrSet> {
    auto seq = analysis::enumerateAddresses(*g.prog.findNode(node), array, mode);
    if (!seq)
      return std::nullopt;
    return AddrSet(seq->begin(), seq->end());
  };

  bool matched = true;
  std::map<std::string, std::vector<std::string>> group; // writer -> readers
  std::vector<AddrSet> writeSets;
  for (const auto &w : writers) {
    auto ws = footprint(w, AccessMode::Write);
    if (!ws) {
      matched = false;
      break;
    }
    writeSets.push_back(std::move(*ws));
  }
  if (matched) {
    for (const auto &r : readers) {
      auto rs = footprint(r, AccessMode::Read);
      if (!rs) {
        matched = false;
        break;
      }
      int owner = -1;
      for (size_t wi = 0; wi < writers.size(); ++wi) {
        bool covers = std::includes(writeSets[wi].begin(), writeSets[wi].end(),
                                    rs->begin(), rs->end());
        if (covers) {
          if (owner >= 0) {
            owner = -2; // ambiguous
            break;
          }
          owner = static_cast<int>(wi);
        }
      }
      if (owner < 0) {
        matched = false;
        break;
      }
      group[writers[owner]].push_back(r);
    }
  }
  if (matched)
    for (const auto &w : writers)
      if (group[w].empty())
        matched = false;

  if (!matched) {
    // Fall back to fuse-then-split: fusing the writers leaves an SPMC
    // pattern for the next round.
    log.push_back({"coarse", "duplicate_fallback", array, "", "",
                   "reader/writer ranges do not partition; fusing writers",
                   {}});
    return doFuse(g, array, log);
  }

  Program prog = g.prog;
  int cloneId = 0;
  for (const auto &w : writers) {
    std::string clone =
        freshArrayName(prog, array + "_p" + std::to_string(cloneId++));
    ArrayDecl cd = *decl;
    cd.name = clone;
    prog.arrays.push_back(cd);
    redirectArray(*prog.findNode(w), array, clone, Redirect::Stores);
    for (const auto &r : group[w])
      redirectArray(*prog.findNode(r), array, clone, Redirect::Loads);
  }
  // The original array is now untouched; drop its declaration.
  prog.arrays.erase(std::remove_if(prog.arrays.begin(), prog.arrays.end(),
                                   [&](const ArrayDecl &a) {
                                     return a.name == array;
                                   }),
                    prog.arrays.end());

  TransformEntry entry{"coarse", "duplicate", array, "", "", "", {}};
  entry.detail = "cloned into " + std::to_string(writers.size()) +
                 " single-writer buffers by footprint matching";
  entry.metrics["writers"] = static_cast<std::int64_t>(writers.size());
  entry.metrics["readers"] = static_cast<std::int64_t>(readers.size());
  log.push_back(std::move(entry));

  return rebuildGraph(std::move(prog), g);
}

} // namespace

DataflowGraph splitSpmc(const DataflowGraph &g, const std::string &array,
                        TransformLog &log) {
  return doSplit(g, array, log);
}

DataflowGraph fuseMpsc(const DataflowGraph &g, const std::string &array,
                       TransformLog &log) {
  return doFuse(g, array, log);
}

DataflowGraph duplicateMpmc(const DataflowGraph &g, const std::string &array,
                            TransformLog &log) {
  return doDuplicate(g, array, log);
}

DataflowGraph eliminateCoarse(const DataflowGraph &g, TransformLog &log,
                              const CoarseOptions &opts) {
  DataflowGraph cur = g;
  std::set<std::string> accepted; // arrays downgraded as infeasible

  for (int round = 0; round < opts.maxRounds; ++round) {
    auto violations = analysis::detectCoarseViolations(cur);
    violations.erase(
        std::remove_if(violations.begin(), violations.end(),
                       [&](const auto &v) { return accepted.count(v.array); }),
        violations.end());
    if (violations.empty())
      return cur;

    bool progress = false;
    for (const auto &v : violations) {
      // Multiplicities may have changed since detection; re-dispatch on the
      // fresh graph.
      auto it = cur.arrayIndex.find(v.array);
      if (it == cur.arrayIndex.end())
        continue;
      size_t w = it->second.first.size();
      std::set<std::string> writerSet(it->second.first.begin(),
                                      it->second.first.end());
      size_t r = 0;
      for (const auto &n : it->second.second)
        if (!writerSet.count(n))
          ++r;
      if (w == 0 || r == 0 || (w == 1 && r == 1))
        continue;
      try {
        if (w == 1)
          cur = doSplit(cur, v.array, log);
        else if (r == 1)
          cur = doFuse(cur, v.array, log);
        else
          cur = doDuplicate(cur, v.array, log);
        progress = true;
      } catch (const Error &e) {
        if (e.kind() != ErrorKind::Unresolvable)
          throw;
        markEdgesSequential(cur, v.array, e.what());
        accepted.insert(v.array);
        log.push_back({"coarse", "downgrade", v.array, "", "",
                       std::string("unresolvable: ") + e.what(), {}});
      }
    }
    if (!progress) {
      auto rest = analysis::detectCoarseViolations(cur);
      rest.erase(std::remove_if(rest.begin(), rest.end(),
                                [&](const auto &v) {
                                  return accepted.count(v.array);
                                }),
                 rest.end());
      if (rest.empty())
        return cur;
      std::string names;
      for (const auto &v : rest)
        names += (names.empty() ? "" : ", ") + v.array;
      fail(ErrorKind::Unresolvable,
           "coarse elimination made no progress on: " + names);
    }
  }

  auto rest = analysis::detectCoarseViolations(cur);
  rest.erase(std::remove_if(
                 rest.begin(), rest.end(),
                 [&](const auto &v) { return accepted.count(v.array); }),
             rest.end());
  if (rest.empty())
    return cur;
  std::string names;
  for (const auto &v : rest)
    names += (names.empty() ? "" : ", ") + v.array;
  fail(ErrorKind::Unresolvable,
       "coarse violations remain after max rounds: " + names);
}

} // namespace sluice::xform
