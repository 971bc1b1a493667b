//===-- program.hpp - Affine loop-nest program representation ---*- C++ -*-===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
//
// The unit every pass transforms: a program is a list of array declarations
// plus a list of task nodes, each node owning a tree of loops and statements
// with affine index expressions and compile-time-constant bounds.
//
//===----------------------------------------------------------------------===//

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

namespace sluice::ir {

using VarEnv = std::map<std::string, std::int64_t>;

/// Linear combination of loop variables plus a constant.
struct AffineExpr {
  std::map<std::string, std::int64_t> terms; // var -> coefficient
  std::int64_t constant = 0;

  std::int64_t eval(const VarEnv &env) const;

  /// The single variable with a non-zero coefficient, if there is exactly one.
  std::optional<std::string> singleVar() const;
  bool isConstant() const;

  static AffineExpr constExpr(std::int64_t c);
  static AffineExpr var(const std::string &v, std::int64_t coeff = 1,
                        std::int64_t c = 0);

  /// Substitute `v := v + delta` (used when loop origins shift).
  void shiftVar(const std::string &v, std::int64_t delta);
  /// Rename a variable, keeping its coefficient.
  void renameVar(const std::string &from, const std::string &to);

  bool operator==(const AffineExpr &) const = default;
};

enum class CmpKind { Eq, Ne, Le, Lt, Ge, Gt };

/// One affine constraint `expr CMP 0`.
struct Constraint {
  AffineExpr expr;
  CmpKind cmp = CmpKind::Ge;

  bool holds(const VarEnv &env) const;
  bool operator==(const Constraint &) const = default;
};

/// Conjunction of constraints, optionally negated as a group. A negated
/// clause expresses complements such as "outside the interior box".
struct GuardClause {
  std::vector<Constraint> constraints;
  bool negated = false;

  bool holds(const VarEnv &env) const;
  bool operator==(const GuardClause &) const = default;
};

/// A guard is a conjunction of clauses; a statement carrying one executes
/// only at iteration points where every clause holds.
struct Guard {
  std::vector<GuardClause> clauses;

  bool holds(const VarEnv &env) const;
  bool operator==(const Guard &) const = default;

  /// i >= lo && i < hi for a single variable.
  static Guard box(const std::vector<std::tuple<std::string, std::int64_t,
                                                std::int64_t>> &ranges,
                   bool negated = false);
};

enum class OpKind { Add, Mul, Mac, Max, Div, Exp, Cmp, Copy };

const char *opKindName(OpKind k);
std::optional<OpKind> opKindFromName(const std::string &name);
/// Number of operands the op consumes.
int opArity(OpKind k);

enum class StmtKind { Load, Store, Compute };

const char *stmtKindName(StmtKind k);

/// A statement operand: either a value identifier produced by an earlier
/// load/compute in the same node execution, or a scalar constant.
struct Operand {
  bool isConst = false;
  std::string value;   // value id when !isConst
  double constant = 0; // literal when isConst

  static Operand val(std::string id);
  static Operand lit(double c);

  bool operator==(const Operand &) const = default;
};

struct Stmt {
  StmtKind kind = StmtKind::Compute;

  // load/store
  std::string array;
  std::vector<AffineExpr> index;

  // compute
  OpKind op = OpKind::Copy;
  std::vector<Operand> operands; // store uses operands[0] as the value
  std::string result;            // load/compute destination value id

  std::optional<Guard> guard;

  bool operator==(const Stmt &) const = default;
};

/// Per-loop scheduling decisions; populated by the scheduler, ignored by
/// correctness passes.
struct LoopSched {
  std::int64_t tile = 1;
  std::int64_t unroll = 1;
  bool pipelined = false;
  std::int64_t ii = 1;

  bool operator==(const LoopSched &) const = default;
};

struct BodyElem;

struct Loop {
  std::string var;
  std::int64_t lower = 0;
  std::int64_t upper = 0; // exclusive
  std::int64_t step = 1;
  std::vector<BodyElem> children;
  std::optional<LoopSched> sched;

  std::int64_t tripCount() const;

  bool operator==(const Loop &) const;
};

struct BodyElem {
  std::variant<Loop, Stmt> node;

  bool isLoop() const { return std::holds_alternative<Loop>(node); }
  bool isStmt() const { return std::holds_alternative<Stmt>(node); }
  Loop &loop() { return std::get<Loop>(node); }
  const Loop &loop() const { return std::get<Loop>(node); }
  Stmt &stmt() { return std::get<Stmt>(node); }
  const Stmt &stmt() const { return std::get<Stmt>(node); }

  static BodyElem make(Loop l);
  static BodyElem make(Stmt s);

  bool operator==(const BodyElem &) const;
};

enum class Placement { External, Internal };

struct ArrayDecl {
  std::string name;
  std::vector<std::int64_t> shape;
  std::int64_t elemBits = 32;
  Placement placement = Placement::Internal;

  std::int64_t numElems() const;
  std::int64_t sizeBytes() const;

  bool operator==(const ArrayDecl &) const = default;
};

struct TaskNode {
  std::string name;
  std::vector<BodyElem> body;

  bool operator==(const TaskNode &) const = default;
};

struct Program {
  std::string name;
  std::vector<ArrayDecl> arrays;
  std::vector<TaskNode> nodes; // program order defines reference semantics

  const ArrayDecl *findArray(const std::string &name) const;
  const TaskNode *findNode(const std::string &name) const;
  TaskNode *findNode(const std::string &name);

  bool operator==(const Program &) const = default;
};

/// Checks every structural invariant (unique names, declared arrays, rank
/// agreement, positive trips, per-nest variable uniqueness, in-bounds index
/// expressions at desk scale). Throws Error{Validation} with a path-style
/// location on the first failure.
void validate(const Program &p);

//===----------------------------------------------------------------------===//
// Body traversal helpers
//===----------------------------------------------------------------------===//

/// Identifies a loop within a node body as the child-index path from the root.
using LoopPath = std::vector<int>;

/// Visit every statement with its enclosing loop chain (outermost first).
void forEachStmt(
    const std::vector<BodyElem> &body,
    const std::function<void(const Stmt &, const std::vector<const Loop *> &)>
        &fn);

/// Visit every loop with its path.
void forEachLoop(
    const std::vector<BodyElem> &body,
    const std::function<void(const Loop &, const LoopPath &)> &fn);

const Loop *loopAtPath(const TaskNode &node, const LoopPath &path);
Loop *loopAtPath(TaskNode &node, const LoopPath &path);

/// First loop encountered at the given depth (preorder), if any.
const Loop *loopAtDepth(const TaskNode &node, int depth, LoopPath *pathOut);

/// Arrays the node loads from / stores to.
std::vector<std::string> arraysRead(const TaskNode &node);
std::vector<std::string> arraysWritten(const TaskNode &node);

} // namespace sluice::ir
