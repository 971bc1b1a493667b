//===-- program.cpp - Affine program representation ----------------------===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//

#include "ir/program.hpp"

#include "support/error.hpp"

#include <algorithm>
#include <set>

namespace sluice::ir {

//===----------------------------------------------------------------------===//
// AffineExpr
//===----------------------------------------------------------------------===//

std::int64_t AffineExpr::eval(const VarEnv &env) const {
  std::int64_t acc = constant;
  for (const auto &[v, c] : terms) {
    auto it = env.find(v);
    if (it == env.end())
      fail(ErrorKind::Internal, "affine eval: unbound variable '" + v + "'");
    acc += c * it->second;
  }
  return acc;
}

std::optional<std::string> AffineExpr::singleVar() const {
  std::optional<std::string> found;
  for (const auto &[v, c] : terms) {
    if (c == 0)
      continue;
    if (found)
      return std::nullopt;
    found = v;
  }
  return found;
}

bool AffineExpr::isConstant() const {
  return std::all_of(terms.begin(), terms.end(),
                     [](const auto &t) { return t.second == 0; });
}

AffineExpr AffineExpr::constExpr(std::int64_t c) {
  AffineExpr e;
  e.constant = c;
  return e;
}

AffineExpr AffineExpr::var(const std::string &v, std::int64_t coeff,
                           std::int64_t c) {
  AffineExpr e;
  e.terms[v] = coeff;
  e.constant = c;
  return e;
}

void AffineExpr::shiftVar(const std::string &v, std::int64_t delta) {
  auto it = terms.find(v);
  if (it != terms.end())
    constant += it->second * delta;
}

void AffineExpr::renameVar(const std::string &from, const std::string &to) {
  auto it = terms.find(from);
  if (it == terms.end())
    return;
  std::int64_t c = it->second;
  terms.erase(it);
  terms[to] += c;
}

//===----------------------------------------------------------------------===//
// Guards
//===----------------------------------------------------------------------===//

bool Constraint::holds(const VarEnv &env) const {
  std::int64_t v = expr.eval(env);
  switch (cmp) {
  case CmpKind::Eq:
    return v == 0;
  case CmpKind::Ne:
    return v != 0;
  case CmpKind::Le:
    return v <= 0;
  case CmpKind::Lt:
    return v < 0;
  case CmpKind::Ge:
    return v >= 0;
  case CmpKind::Gt:
    return v > 0;
  }
  return false;
}

bool GuardClause::holds(const VarEnv &env) const {
  bool all = std::all_of(constraints.begin(), constraints.end(),
                         [&](const Constraint &c) { return c.holds(env); });
  return negated ? !all : all;
}

bool Guard::holds(const VarEnv &env) const {
  return std::all_of(clauses.begin(), clauses.end(),
                     [&](const GuardClause &cl) { return cl.holds(env); });
}

Guard Guard::box(
    const std::vector<std::tuple<std::string, std::int64_t, std::int64_t>>
        &ranges,
    bool negated) {
  GuardClause clause;
  clause.negated = negated;
  for (const auto &[v, lo, hi] : ranges) {
    clause.constraints.push_back({AffineExpr::var(v, 1, -lo), CmpKind::Ge});
    clause.constraints.push_back({AffineExpr::var(v, 1, -hi), CmpKind::Lt});
  }
  return Guard{{clause}};
}

//===----------------------------------------------------------------------===//
// Ops and statements
//===----------------------------------------------------------------------===//

const char *opKindName(OpKind k) {
  switch (k) {
  case OpKind::Add:
    return "add";
  case OpKind::Mul:
    return "mul";
  case OpKind::Mac:
    return "mac";
  case OpKind::Max:
    return "max";
  case OpKind::Div:
    return "div";
  case OpKind::Exp:
    return "exp";
  case OpKind::Cmp:
    return "cmp";
  case OpKind::Copy:
    return "copy";
  }
  return "?";
}

std::optional<OpKind> opKindFromName(const std::string &name) {
  static const std::map<std::string, OpKind> table = {
      {"add", OpKind::Add}, {"mul", OpKind::Mul}, {"mac", OpKind::Mac},
      {"max", OpKind::Max}, {"div", OpKind::Div}, {"exp", OpKind::Exp},
      {"cmp", OpKind::Cmp}, {"copy", OpKind::Copy}};
  auto it = table.find(name);
  if (it == table.end())
    return std::nullopt;
  return it->second;
}

int opArity(OpKind k) {
  switch (k) {
  case OpKind::Exp:
  case OpKind::Copy:
    return 1;
  case OpKind::Mac:
    return 3;
  default:
    return 2;
  }
}

const char *stmtKindName(StmtKind k) {
  switch (k) {
  case StmtKind::Load:
    return "load";
  case StmtKind::Store:
    return "store";
  case StmtKind::Compute:
    return "compute";
  }
  return "?";
}

Operand Operand::val(std::string id) {
  Operand o;
  o.isConst = false;
  o.value = std::move(id);
  return o;
}

Operand Operand::lit(double c) {
  Operand o;
  o.isConst = true;
  o.constant = c;
  return o;
}

//===----------------------------------------------------------------------===//
// Body structure
//===----------------------------------------------------------------------===//

std::int64_t Loop::tripCount() const {
  if (step <= 0)
    return 0;
  if (upper <= lower)
    return 0;
  return (upper - lower + step - 1) / step;
}

bool Loop::operator==(const Loop &o) const {
  return var == o.var && lower == o.lower && upper == o.upper &&
         step == o.step && children == o.children && sched == o.sched;
}

BodyElem BodyElem::make(Loop l) { return BodyElem{std::move(l)}; }
BodyElem BodyElem::make(Stmt s) { return BodyElem{std::move(s)}; }

bool BodyElem::operator==(const BodyElem &o) const { return node == o.node; }

std::int64_t ArrayDecl::numElems() const {
  std::int64_t n = 1;
  for (std::int64_t d : shape)
    n *= d;
  return n;
}

std::int64_t ArrayDecl::sizeBytes() const {
  return numElems() * ((elemBits + 7) / 8);
}

const ArrayDecl *Program::findArray(const std::string &n) const {
  for (const auto &a : arrays)
    if (a.name == n)
      return &a;
  return nullptr;
}

const TaskNode *Program::findNode(const std::string &n) const {
  for (const auto &t : nodes)
    if (t.name == n)
      return &t;
  return nullptr;
}

TaskNode *Program::findNode(const std::string &n) {
  for (auto &t : nodes)
    if (t.name == n)
      return &t;
  return nullptr;
}

//===----------------------------------------------------------------------===//
// Traversal
//===----------------------------------------------------------------------===//

namespace {

void walkStmts(const std::vector<BodyElem> &body,
               std::vector<const Loop *> &chain,
               const std::function<void(const Stmt &,
                                        const std::vector<const Loop *> &)> &fn) {
  for (const auto &elem : body) {
    if (elem.isStmt()) {
      fn(elem.stmt(), chain);
    } else {
      chain.push_back(&elem.loop());
      walkStmts(elem.loop().children, chain, fn);
      chain.pop_back();
    }
  }
}

void walkLoops(const std::vector<BodyElem> &body, LoopPath &path,
               const std::function<void(const Loop &, const LoopPath &)> &fn) {
  for (int i = 0; i < static_cast<int>(body.size()); ++i) {
    if (!body[i].isLoop())
      continue;
    path.push_back(i);
    fn(body[i].loop(), path);
    walkLoops(body[i].loop().children, path, fn);
    path.pop_back();
  }
}

} // namespace

void forEachStmt(
    const std::vector<BodyElem> &body,
    const std::function<void(const Stmt &, const std::vector<const Loop *> &)>
        &fn) {
  std::vector<const Loop *> chain;
  walkStmts(body, chain, fn);
}

void forEachLoop(
    const std::vector<BodyElem> &body,
    const std::function<void(const Loop &, const LoopPath &)> &fn) {
  LoopPath path;
  walkLoops(body, path, fn);
}

const Loop *loopAtPath(const TaskNode &node, const LoopPath &path) {
  const std::vector<BodyElem> *body = &node.body;
  const Loop *loop = nullptr;
  for (int idx : path) {
    if (idx < 0 || idx >= static_cast<int>(body->size()) ||
        !(*body)[idx].isLoop())
      return nullptr;
    loop = &(*body)[idx].loop();
    body = &loop->children;
  }
  return loop;
}

Loop *loopAtPath(TaskNode &node, const LoopPath &path) {
  std::vector<BodyElem> *body = &node.body;
  Loop *loop = nullptr;
  for (int idx : path) {
    if (idx < 0 || idx >= static_cast<int>(body->size()) ||
        !(*body)[idx].isLoop())
      return nullptr;
    loop = &(*body)[idx].loop();
    body = &loop->children;
  }
  return loop;
}

const Loop *loopAtDepth(const TaskNode &node, int depth, LoopPath *pathOut) {
  const Loop *found = nullptr;
  LoopPath foundPath;
  forEachLoop(node.body, [&](const Loop &l, const LoopPath &p) {
    if (found)
      return;
    if (static_cast<int>(p.size()) - 1 == depth) {
      found = &l;
      foundPath = p;
    }
  });
  if (found && pathOut)
    *pathOut = foundPath;
  return found;
}

std::vector<std::string> arraysRead(const TaskNode &node) {
  std::set<std::string> seen;
  std::vector<std::string> out;
  forEachStmt(node.body, [&](const Stmt &s, const auto &) {
    if (s.kind == StmtKind::Load && seen.insert(s.array).second)
      out.push_back(s.array);
  });
  return out;
}

std::vector<std::string> arraysWritten(const TaskNode &node) {
  std::set<std::string> seen;
  std::vector<std::string> out;
  forEachStmt(node.body, [&](const Stmt &s, const auto &) {
    if (s.kind == StmtKind::Store && seen.insert(s.array).second)
      out.push_back(s.array);
  });
  return out;
}

//===----------------------------------------------------------------------===//
// Validation
//===----------------------------------------------------------------------===//

namespace {

struct Validator {
  const Program &prog;

  void run() {
    std::set<std::string> arrayNames;
    for (const auto &a : prog.arrays) {
      if (!arrayNames.insert(a.name).second)
        fail(ErrorKind::Validation,
             "duplicate array declaration '" + a.name + "'");
      if (a.shape.empty())
        fail(ErrorKind::Validation, "array '" + a.name + "' has empty shape");
      for (std::int64_t d : a.shape)
        if (d < 1)
          fail(ErrorKind::Validation,
               "array '" + a.name + "' has non-positive dimension");
      if (a.elemBits < 1)
        fail(ErrorKind::Validation,
             "array '" + a.name + "' has non-positive elem_bits");
    }
    std::set<std::string> nodeNames;
    for (const auto &n : prog.nodes) {
      if (!nodeNames.insert(n.name).second)
        fail(ErrorKind::Validation, "duplicate node name '" + n.name + "'");
      std::set<std::string> vars;
      checkBody(n, n.body, vars, "nodes." + n.name);
    }
    checkIndexBounds();
  }

  void checkBody(const TaskNode &node, const std::vector<BodyElem> &body,
                 std::set<std::string> &vars, const std::string &loc) {
    for (size_t i = 0; i < body.size(); ++i) {
      std::string at = loc + "[" + std::to_string(i) + "]";
      if (body[i].isLoop()) {
        const Loop &l = body[i].loop();
        if (l.step < 1)
          fail(ErrorKind::Validation, at + ": loop step must be positive");
        if (l.tripCount() < 1)
          fail(ErrorKind::Validation, at + ": loop trip count must be >= 1");
        if (!vars.insert(l.var).second)
          fail(ErrorKind::Validation,
               at + ": loop variable '" + l.var + "' reused in enclosing nest");
        checkBody(node, l.children, vars, at);
        vars.erase(l.var);
      } else {
        checkStmt(body[i].stmt(), vars, at);
      }
    }
  }

  void checkStmt(const Stmt &s, const std::set<std::string> &vars,
                 const std::string &loc) {
    auto checkExprVars = [&](const AffineExpr &e) {
      for (const auto &[v, c] : e.terms) {
        if (c != 0 && !vars.count(v))
          fail(ErrorKind::Validation,
               loc + ": index uses undefined loop variable '" + v + "'");
      }
    };
    if (s.kind == StmtKind::Load || s.kind == StmtKind::Store) {
      const ArrayDecl *decl = prog.findArray(s.array);
      if (!decl)
        fail(ErrorKind::Validation,
             loc + ": reference to undeclared array '" + s.array + "'");
      if (s.index.size() != decl->shape.size())
        fail(ErrorKind::Validation,
             loc + ": array '" + s.array + "' has rank " +
                 std::to_string(decl->shape.size()) + " but is indexed with " +
                 std::to_string(s.index.size()) + " subscripts");
      for (const auto &e : s.index)
        checkExprVars(e);
      if (s.kind == StmtKind::Store && s.operands.size() != 1)
        fail(ErrorKind::Validation, loc + ": store takes exactly one operand");
      if (s.kind == StmtKind::Load && s.result.empty())
        fail(ErrorKind::Validation, loc + ": load needs a result id");
    } else {
      if (static_cast<int>(s.operands.size()) != opArity(s.op))
        fail(ErrorKind::Validation,
             loc + ": op '" + opKindName(s.op) + "' takes " +
                 std::to_string(opArity(s.op)) + " operands");
      if (s.result.empty())
        fail(ErrorKind::Validation, loc + ": compute needs a result id");
    }
    if (s.guard) {
      for (const auto &cl : s.guard->clauses)
        for (const auto &c : cl.constraints)
          checkExprVars(c.expr);
    }
  }

  // Exhaustively checks that every index expression stays inside the declared
  // shape. Skipped for nodes whose iteration domain exceeds the cap; the
  // interpreter still catches violations at run time.
  void checkIndexBounds() {
    constexpr std::int64_t kCap = 1 << 22;
    for (const auto &n : prog.nodes) {
      std::int64_t domain = 1;
      bool overflow = false;
      forEachLoop(n.body, [&](const Loop &l, const LoopPath &) {
        domain *= std::max<std::int64_t>(1, l.tripCount());
        if (domain > kCap)
          overflow = true;
      });
      if (overflow)
        continue;
      enumerateBody(n, n.body, {});
    }
  }

  void enumerateBody(const TaskNode &node, const std::vector<BodyElem> &body,
                     VarEnv env) {
    for (const auto &elem : body) {
      if (elem.isStmt()) {
        const Stmt &s = elem.stmt();
        if (s.kind != StmtKind::Load && s.kind != StmtKind::Store)
          continue;
        if (s.guard && !s.guard->holds(env))
          continue;
        const ArrayDecl *decl = prog.findArray(s.array);
        for (size_t d = 0; d < s.index.size(); ++d) {
          std::int64_t v = s.index[d].eval(env);
          if (v < 0 || v >= decl->shape[d])
            fail(ErrorKind::Validation,
                 "node '" + node.name + "': index " + std::to_string(v) +
                     " out of bounds for dimension " + std::to_string(d) +
                     " of array '" + s.array + "'");
        }
      } else {
        const Loop &l = elem.loop();
        for (std::int64_t v = l.lower; v < l.upper; v += l.step) {
          env[l.var] = v;
          enumerateBody(node, l.children, env);
        }
        env.erase(l.var);
      }
    }
  }
};

} // namespace

void validate(const Program &p) {
  Validator v{p};
  v.run();
}

} // namespace sluice::ir
