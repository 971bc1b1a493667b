//===-- interp.cpp - Sequential reference interpreter ----------------------===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//

#include "ir/interp.hpp"

#include "support/error.hpp"

#include <algorithm>
#include <cmath>

namespace sluice::ir {

double applyOp(OpKind op, const std::vector<double> &args, NumericMode mode) {
  if (mode == NumericMode::ExactInt) {
    auto i = [](double v) { return static_cast<std::int64_t>(v); };
    switch (op) {
    case OpKind::Add:
      return static_cast<double>(i(args[0]) + i(args[1]));
    case OpKind::Mul:
      return static_cast<double>(i(args[0]) * i(args[1]));
    case OpKind::Mac:
      return static_cast<double>(i(args[0]) + i(args[1]) * i(args[2]));
    case OpKind::Max:
      return args[0] >= args[1] ? args[0] : args[1];
    case OpKind::Div:
      if (i(args[1]) == 0)
        fail(ErrorKind::Internal, "integer division by zero");
      return static_cast<double>(i(args[0]) / i(args[1]));
    case OpKind::Exp:
      return static_cast<double>(std::llround(std::exp(args[0])));
    case OpKind::Cmp:
      return args[0] > args[1] ? 1.0 : 0.0;
    case OpKind::Copy:
      return args[0];
    }
  }
  switch (op) {
  case OpKind::Add:
    return args[0] + args[1];
  case OpKind::Mul:
    return args[0] * args[1];
  case OpKind::Mac:
    return args[0] + args[1] * args[2];
  case OpKind::Max:
    return args[0] >= args[1] ? args[0] : args[1];
  case OpKind::Div:
    return args[0] / args[1];
  case OpKind::Exp:
    return std::exp(args[0]);
  case OpKind::Cmp:
    return args[0] > args[1] ? 1.0 : 0.0;
  case OpKind::Copy:
    return args[0];
  }
  return 0;
}

namespace {

struct Interp {
  const Program &prog;
  NumericMode mode;
  TensorMap store;

  void runNode(const TaskNode &node) {
    std::map<std::string, double> values;
    VarEnv env;
    execBody(node, node.body, env, values);
  }

  void execBody(const TaskNode &node, const std::vector<BodyElem> &body,
                VarEnv &env, std::map<std::string, double> &values) {
    for (const auto &elem : body) {
      if (elem.isLoop()) {
        const Loop &l = elem.loop();
        for (std::int64_t v = l.lower; v < l.upper; v += l.step) {
          env[l.var] = v;
          execBody(node, l.children, env, values);
        }
        env.erase(l.var);
      } else {
        execStmt(node, elem.stmt(), env, values);
      }
    }
  }

  void execStmt(const TaskNode &node, const Stmt &s, const VarEnv &env,
                std::map<std::string, double> &values) {
    if (s.guard && !s.guard->holds(env))
      return;
    switch (s.kind) {
    case StmtKind::Load: {
      Tensor &t = tensor(s.array);
      std::int64_t flat = resolve(node, s, t, env);
      const ArrayDecl *decl = prog.findArray(s.array);
      if (decl->placement == Placement::Internal && !t.isWritten(flat))
        fail(ErrorKind::Internal,
             "node '" + node.name + "': read of never-written element of '" +
                 s.array + "'");
      values[s.result] = t.at(flat);
      break;
    }
    case StmtKind::Store: {
      Tensor &t = tensor(s.array);
      std::int64_t flat = resolve(node, s, t, env);
      t.set(flat, operandValue(node, s.operands[0], values));
      break;
    }
    case StmtKind::Compute: {
      std::vector<double> args;
      args.reserve(s.operands.size());
      for (const auto &o : s.operands)
        args.push_back(operandValue(node, o, values));
      values[s.result] = applyOp(s.op, args, mode);
      break;
    }
    }
  }

  double operandValue(const TaskNode &node, const Operand &o,
                      const std::map<std::string, double> &values) {
    if (o.isConst)
      return o.constant;
    auto it = values.find(o.value);
    if (it == values.end())
      fail(ErrorKind::Internal, "node '" + node.name + "': use of value '" +
                                    o.value + "' before definition");
    return it->second;
  }

  std::int64_t resolve(const TaskNode &node, const Stmt &s, const Tensor &t,
                       const VarEnv &env) {
    std::vector<std::int64_t> idx;
    idx.reserve(s.index.size());
    for (const auto &e : s.index)
      idx.push_back(e.eval(env));
    for (size_t d = 0; d < idx.size(); ++d)
      if (idx[d] < 0 || idx[d] >= t.shape[d])
        fail(ErrorKind::Internal,
             "node '" + node.name + "': index out of bounds on array '" +
                 s.array + "' dimension " + std::to_string(d));
    return t.flatten(idx);
  }

  Tensor &tensor(const std::string &name) {
    auto it = store.find(name);
    if (it != store.end())
      return it->second;
    const ArrayDecl *decl = prog.findArray(name);
    if (!decl)
      fail(ErrorKind::Internal, "undeclared array '" + name + "'");
    return store.emplace(name, Tensor::zeros(decl->shape)).first->second;
  }
};

} // namespace

TensorMap referenceExecute(const Program &p, const TensorMap &inputs,
                           NumericMode mode) {
  Interp interp{p, mode, {}};
  for (const auto &name : externalInputs(p)) {
    auto it = inputs.find(name);
    if (it == inputs.end())
      fail(ErrorKind::Validation,
           "missing input tensor for external array '" + name + "'");
    const ArrayDecl *decl = p.findArray(name);
    if (it->second.shape != decl->shape)
      fail(ErrorKind::Validation,
           "input tensor '" + name + "' does not match the declared shape");
    Tensor t = it->second;
    t.markAllWritten();
    interp.store.emplace(name, std::move(t));
  }
  for (const auto &node : p.nodes)
    interp.runNode(node);
  return std::move(interp.store);
}

std::vector<std::string> externalOutputs(const Program &p) {
  std::vector<std::string> out;
  for (const auto &a : p.arrays) {
    if (a.placement != Placement::External)
      continue;
    for (const auto &n : p.nodes) {
      auto w = arraysWritten(n);
      if (std::find(w.begin(), w.end(), a.name) != w.end()) {
        out.push_back(a.name);
        break;
      }
    }
  }
  return out;
}

std::vector<std::string> externalInputs(const Program &p) {
  std::vector<std::string> out;
  for (const auto &a : p.arrays) {
    if (a.placement != Placement::External)
      continue;
    for (const auto &n : p.nodes) {
      auto r = arraysRead(n);
      if (std::find(r.begin(), r.end(), a.name) != r.end()) {
        out.push_back(a.name);
        break;
      }
    }
  }
  return out;
}

TensorMap randomInputs(const Program &p, std::uint64_t seed,
                       NumericMode mode) {
  // splitmix64; distribution-free so every platform draws the same values
  std::uint64_t state = seed;
  auto next = [&state]() {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  TensorMap out;
  for (const auto &name : externalInputs(p)) {
    const ArrayDecl *decl = p.findArray(name);
    Tensor t = Tensor::zeros(decl->shape);
    for (std::int64_t i = 0; i < t.numElems(); ++i) {
      if (mode == NumericMode::ExactInt)
        t.set(i, static_cast<double>(static_cast<std::int64_t>(next() % 17) -
                                     8));
      else
        t.set(i, static_cast<double>(next() >> 11) * 0x1.0p-53 * 2.0 - 1.0);
    }
    out.emplace(name, std::move(t));
  }
  return out;
}

} // namespace sluice::ir
