//===-- util.cpp - Shared rewriting helpers --------------------------------===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//

#include "xform/util.hpp"

namespace sluice::xform {

using namespace ir;

namespace {

bool nameTaken(const Program &p, const std::string &name) {
  return p.findArray(name) != nullptr || p.findNode(name) != nullptr;
}

std::string fresh(const Program &p, const std::string &base) {
  if (!nameTaken(p, base))
    return base;
  for (int i = 1;; ++i) {
    std::string cand = base + "_" + std::to_string(i);
    if (!nameTaken(p, cand))
      return cand;
  }
}

void walkStmtsMut(std::vector<BodyElem> &body,
                  const std::function<void(Stmt &)> &fn) {
  for (auto &e : body) {
    if (e.isStmt())
      fn(e.stmt());
    else
      walkStmtsMut(e.loop().children, fn);
  }
}

} // namespace

std::string freshArrayName(const Program &p, const std::string &base) {
  return fresh(p, base);
}

std::string freshNodeName(const Program &p, const std::string &base) {
  return fresh(p, base);
}

void redirectArray(TaskNode &node, const std::string &from,
                   const std::string &to, Redirect which) {
  walkStmtsMut(node.body, [&](Stmt &s) {
    bool isLoad = s.kind == StmtKind::Load;
    bool isStore = s.kind == StmtKind::Store;
    if (s.array != from)
      return;
    if ((isLoad && which != Redirect::Stores) ||
        (isStore && which != Redirect::Loads))
      s.array = to;
  });
}

void prefixValueIds(std::vector<BodyElem> &body, const std::string &prefix) {
  walkStmtsMut(body, [&](Stmt &s) {
    if (!s.result.empty())
      s.result = prefix + s.result;
    for (auto &o : s.operands)
      if (!o.isConst)
        o.value = prefix + o.value;
  });
}

namespace {

void renameInGuard(std::optional<Guard> &g, const std::string &from,
                   const std::string &to) {
  if (!g)
    return;
  for (auto &cl : g->clauses)
    for (auto &c : cl.constraints)
      c.expr.renameVar(from, to);
}

void shiftInGuard(std::optional<Guard> &g, const std::string &var,
                  std::int64_t delta) {
  if (!g)
    return;
  for (auto &cl : g->clauses)
    for (auto &c : cl.constraints)
      c.expr.shiftVar(var, delta);
}

} // namespace

void renameLoopVar(std::vector<BodyElem> &body, const std::string &from,
                   const std::string &to) {
  for (auto &e : body) {
    if (e.isLoop()) {
      Loop &l = e.loop();
      if (l.var == from)
        l.var = to;
      renameLoopVar(l.children, from, to);
    } else {
      Stmt &s = e.stmt();
      for (auto &ix : s.index)
        ix.renameVar(from, to);
      renameInGuard(s.guard, from, to);
    }
  }
}

void shiftLoopVar(std::vector<BodyElem> &body, const std::string &var,
                  std::int64_t delta) {
  for (auto &e : body) {
    if (e.isLoop()) {
      shiftLoopVar(e.loop().children, var, delta);
    } else {
      Stmt &s = e.stmt();
      for (auto &ix : s.index)
        ix.shiftVar(var, delta);
      shiftInGuard(s.guard, var, delta);
    }
  }
}

std::vector<const Loop *> outerChain(const TaskNode &node) {
  std::vector<const Loop *> chain;
  const std::vector<BodyElem> *body = &node.body;
  while (body->size() == 1 && body->front().isLoop()) {
    chain.push_back(&body->front().loop());
    body = &body->front().loop().children;
  }
  return chain;
}

std::vector<SiteRef> findSites(const TaskNode &node, const std::string &array,
                               StmtKind kind) {
  std::vector<SiteRef> out;
  forEachStmt(node.body,
              [&](const Stmt &s, const std::vector<const Loop *> &chain) {
                if (s.kind == kind && s.array == array)
                  out.push_back({&s, chain});
              });
  return out;
}

std::vector<BodyElem> cloneBody(const std::vector<BodyElem> &body) {
  return body; // value semantics: vector copy is a deep copy
}

void guardStmts(std::vector<BodyElem> &body, const Guard &g) {
  walkStmtsMut(body, [&](Stmt &s) {
    if (!s.guard)
      s.guard = g;
    else
      s.guard->clauses.insert(s.guard->clauses.end(), g.clauses.begin(),
                              g.clauses.end());
  });
}

} // namespace sluice::xform
