//===-- dependence.cpp - Loop-carried dependence analysis ------------------===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//

#include "analysis/dependence.hpp"

#include "support/error.hpp"

#include <algorithm>
#include <functional>

namespace sluice::analysis {

using namespace ir;

namespace {

bool isAssociative(OpKind op) {
  switch (op) {
  case OpKind::Add:
  case OpKind::Mac:
  case OpKind::Max:
  case OpKind::Mul:
    return true;
  default:
    return false;
  }
}

// Statically decides, per load, whether its value flows only into
// accumulation stores of the same array element (same subscript expressions)
// through associative ops. Such read-modify-write chains are reductions.
std::set<const Stmt *> accumulateReads(const TaskNode &node) {
  std::vector<const Stmt *> stmts;
  forEachStmt(node.body,
              [&](const Stmt &s, const auto &) { stmts.push_back(&s); });

  // result id -> defining statements (conservative on rebinds)
  std::map<std::string, std::vector<const Stmt *>> defs;
  for (const Stmt *s : stmts)
    if (!s->result.empty())
      defs[s->result].push_back(s);
  // value id -> consuming statements
  std::map<std::string, std::vector<const Stmt *>> uses;
  for (const Stmt *s : stmts)
    for (const auto &o : s->operands)
      if (!o.isConst)
        uses[o.value].push_back(s);

  std::set<const Stmt *> out;
  for (const Stmt *load : stmts) {
    if (load->kind != StmtKind::Load)
      continue;
    // Chase every use of the loaded value; all paths must terminate in a
    // store back to the same element via associative computes.
    bool ok = true;
    std::set<const Stmt *> visited;
    std::function<void(const std::string &)> chase = [&](const std::string &v) {
      auto it = uses.find(v);
      if (it == uses.end()) {
        ok = false; // dead value: treat conservatively
        return;
      }
      for (const Stmt *u : it->second) {
        if (!ok || !visited.insert(u).second)
          continue;
        if (u->kind == StmtKind::Store) {
          if (u->array != load->array || u->index != load->index)
            ok = false;
        } else if (u->kind == StmtKind::Compute) {
          if (!isAssociative(u->op)) {
            ok = false;
          } else {
            chase(u->result);
          }
        } else {
          ok = false;
        }
      }
    };
    chase(load->result);
    if (ok)
      out.insert(load);
  }
  return out;
}

// Execution-order journal of last writes per location. A location is either
// an array element or a scalar value id.
struct LastWrite {
  std::vector<std::pair<const Loop *, std::int64_t>> iterStack;
  const Stmt *stmt = nullptr;
};

struct DepAnalysis {
  const TaskNode &node;
  const std::set<const Stmt *> &accReads;
  // carried findings per loop (by pointer)
  std::map<const Loop *, CarriedKind> carried;

  std::map<std::string, LastWrite> lastWriteArray; // "arr#flatkey"
  std::map<std::string, LastWrite> lastWriteValue;

  std::vector<std::pair<const Loop *, std::int64_t>> iterStack;

  void noteCarried(const Loop *l, bool reduction) {
    auto &k = carried[l];
    if (reduction) {
      if (k == CarriedKind::None)
        k = CarriedKind::ReductionOnly;
    } else {
      k = CarriedKind::General;
    }
  }

  void onRead(const LastWrite &w, const Stmt *readStmt) {
    if (!w.stmt)
      return;
    // Compare iteration stacks; the first position where both stacks hold the
    // same loop but different iteration values is a carried dependence on
    // that loop.
    size_t n = std::min(w.iterStack.size(), iterStack.size());
    for (size_t i = 0; i < n; ++i) {
      if (w.iterStack[i].first != iterStack[i].first)
        break;
      if (w.iterStack[i].second != iterStack[i].second) {
        bool reduction = readStmt->kind == StmtKind::Load &&
                         accReads.count(readStmt) > 0;
        noteCarried(w.iterStack[i].first, reduction);
        break;
      }
    }
  }

  std::string arrayKey(const Stmt &s, const VarEnv &env) {
    std::string key = s.array;
    for (const auto &e : s.index) {
      key += '#';
      key += std::to_string(e.eval(env));
    }
    return key;
  }

  void exec(const std::vector<BodyElem> &body, VarEnv &env) {
    for (const auto &elem : body) {
      if (elem.isLoop()) {
        const Loop &l = elem.loop();
        for (std::int64_t v = l.lower; v < l.upper; v += l.step) {
          env[l.var] = v;
          iterStack.emplace_back(&l, v);
          exec(l.children, env);
          iterStack.pop_back();
        }
        env.erase(l.var);
      } else {
        const Stmt &s = elem.stmt();
        if (s.guard && !s.guard->holds(env))
          continue;
        if (s.kind == StmtKind::Load) {
          auto it = lastWriteArray.find(arrayKey(s, env));
          if (it != lastWriteArray.end())
            onRead(it->second, &s);
          lastWriteValue[s.result] = {iterStack, &s};
        } else if (s.kind == StmtKind::Store) {
          if (!s.operands[0].isConst) {
            auto it = lastWriteValue.find(s.operands[0].value);
            if (it != lastWriteValue.end())
              onRead(it->second, &s);
          }
          lastWriteArray[arrayKey(s, env)] = {iterStack, &s};
        } else {
          for (const auto &o : s.operands) {
            if (o.isConst)
              continue;
            auto it = lastWriteValue.find(o.value);
            if (it != lastWriteValue.end())
              onRead(it->second, &s);
          }
          lastWriteValue[s.result] = {iterStack, &s};
        }
      }
    }
  }
};

std::map<const Loop *, CarriedKind>
analyzeCarried(const TaskNode &node, const EnumerationOptions &opts) {
  std::int64_t domain = 1;
  bool tooBig = false;
  forEachLoop(node.body, [&](const Loop &l, const LoopPath &) {
    domain *= std::max<std::int64_t>(1, l.tripCount());
    if (domain > opts.cap)
      tooBig = true;
  });
  if (tooBig)
    fail(ErrorKind::Internal,
         "node '" + node.name + "' exceeds the dependence enumeration cap");

  auto accReads = accumulateReads(node);
  DepAnalysis dep{node, accReads, {}, {}, {}, {}};
  VarEnv env;
  dep.exec(node.body, env);
  return std::move(dep.carried);
}

} // namespace

CarriedKind loopCarriedKind(const TaskNode &node, const LoopPath &path,
                            const EnumerationOptions &opts) {
  const Loop *target = loopAtPath(node, path);
  if (!target)
    fail(ErrorKind::Validation,
         "node '" + node.name + "': no loop at the given path");
  auto carried = analyzeCarried(node, opts);
  auto it = carried.find(target);
  return it == carried.end() ? CarriedKind::None : it->second;
}

bool hasLoopCarriedDependence(const TaskNode &node, int depth,
                              const EnumerationOptions &opts) {
  LoopPath path;
  if (!loopAtDepth(node, depth, &path))
    fail(ErrorKind::Validation,
         "node '" + node.name + "': depth " + std::to_string(depth) +
             " does not index a loop");
  return loopCarriedKind(node, path, opts) != CarriedKind::None;
}

const char *loopClassName(LoopClass c) {
  switch (c) {
  case LoopClass::OuterUnsafe:
    return "outer_unsafe";
  case LoopClass::FifoIndex:
    return "fifo_index";
  case LoopClass::Free:
    return "free";
  }
  return "?";
}

namespace {

void collectArrays(const std::vector<BodyElem> &body,
                   std::set<std::string> &reads, std::set<std::string> &writes,
                   std::set<std::string> &valueReads,
                   std::set<std::string> &valueWrites) {
  for (const auto &e : body) {
    if (e.isLoop()) {
      collectArrays(e.loop().children, reads, writes, valueReads, valueWrites);
      continue;
    }
    const Stmt &s = e.stmt();
    if (s.kind == StmtKind::Load)
      reads.insert(s.array);
    if (s.kind == StmtKind::Store)
      writes.insert(s.array);
    for (const auto &o : s.operands)
      if (!o.isConst)
        valueReads.insert(o.value);
    if (!s.result.empty())
      valueWrites.insert(s.result);
  }
}

// True when the loop's direct children form >= 2 regions with a dependence
// crossing region boundaries (an array or value written in one region and
// read in another).
bool hasCrossRegionDependence(const Loop &l) {
  if (l.children.size() < 2)
    return false;
  struct Region {
    std::set<std::string> r, w, vr, vw;
  };
  std::vector<Region> regions;
  for (const auto &child : l.children) {
    Region reg;
    if (child.isLoop())
      collectArrays(child.loop().children, reg.r, reg.w, reg.vr, reg.vw);
    else {
      const Stmt &s = child.stmt();
      if (s.kind == StmtKind::Load)
        reg.r.insert(s.array);
      if (s.kind == StmtKind::Store)
        reg.w.insert(s.array);
      for (const auto &o : s.operands)
        if (!o.isConst)
          reg.vr.insert(o.value);
      if (!s.result.empty())
        reg.vw.insert(s.result);
    }
    regions.push_back(std::move(reg));
  }
  for (size_t i = 0; i < regions.size(); ++i)
    for (size_t j = 0; j < regions.size(); ++j) {
      if (i == j)
        continue;
      for (const auto &a : regions[i].w)
        if (regions[j].r.count(a))
          return true;
    }
  return false;
}

void varsInExpr(const AffineExpr &e, std::set<std::string> &out) {
  for (const auto &[v, c] : e.terms)
    if (c != 0)
      out.insert(v);
}

// Variables appearing in subscripts of accesses to FIFO-candidate arrays.
std::set<std::string> fifoIndexVars(const TaskNode &node,
                                    const std::set<std::string> &fifoArrays) {
  std::set<std::string> vars;
  forEachStmt(node.body, [&](const Stmt &s, const auto &) {
    if (s.kind != StmtKind::Load && s.kind != StmtKind::Store)
      return;
    if (!fifoArrays.count(s.array))
      return;
    for (const auto &e : s.index)
      varsInExpr(e, vars);
  });
  return vars;
}

} // namespace

std::map<LoopPath, LoopClass>
classifyLoops(const TaskNode &node, const std::set<std::string> &fifoArrays,
              const EnumerationOptions &opts) {
  auto carried = analyzeCarried(node, opts);
  auto fifoVars = fifoIndexVars(node, fifoArrays);

  std::map<LoopPath, LoopClass> out;
  forEachLoop(node.body, [&](const Loop &l, const LoopPath &path) {
    LoopClass cls;
    auto it = carried.find(&l);
    CarriedKind kind = it == carried.end() ? CarriedKind::None : it->second;
    if (hasCrossRegionDependence(l))
      cls = LoopClass::OuterUnsafe;
    else if (fifoVars.count(l.var))
      cls = LoopClass::FifoIndex;
    else if (kind == CarriedKind::General)
      cls = LoopClass::OuterUnsafe;
    else
      cls = LoopClass::Free;
    out[path] = cls;
  });
  return out;
}

} // namespace sluice::analysis
