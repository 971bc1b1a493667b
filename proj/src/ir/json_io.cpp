//===-- json_io.cpp - Program and tensor (de)serialization ---------------===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//

#include "ir/json_io.hpp"

#include "support/error.hpp"

#include <json.hpp>

namespace sluice::ir {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void parseFail(const std::string &loc, const std::string &msg) {
  fail(ErrorKind::Parse, loc + ": " + msg);
}

std::int64_t getInt(const json &j, const char *key, const std::string &loc) {
  if (!j.contains(key) || !j[key].is_number_integer())
    parseFail(loc, std::string("expected integer field '") + key + "'");
  return j[key].get<std::int64_t>();
}

std::string getStr(const json &j, const char *key, const std::string &loc) {
  if (!j.contains(key) || !j[key].is_string())
    parseFail(loc, std::string("expected string field '") + key + "'");
  return j[key].get<std::string>();
}

// An affine expression is a flat object: variable coefficients keyed by name
// plus the reserved key "const".
AffineExpr parseAffine(const json &j, const std::string &loc) {
  if (!j.is_object())
    parseFail(loc, "affine expression must be an object");
  AffineExpr e;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_number_integer())
      parseFail(loc, "affine coefficient for '" + it.key() +
                         "' must be an integer");
    if (it.key() == "const")
      e.constant = it.value().get<std::int64_t>();
    else
      e.terms[it.key()] = it.value().get<std::int64_t>();
  }
  return e;
}

CmpKind parseCmp(const std::string &s, const std::string &loc) {
  if (s == "eq")
    return CmpKind::Eq;
  if (s == "ne")
    return CmpKind::Ne;
  if (s == "le")
    return CmpKind::Le;
  if (s == "lt")
    return CmpKind::Lt;
  if (s == "ge")
    return CmpKind::Ge;
  if (s == "gt")
    return CmpKind::Gt;
  parseFail(loc, "unknown comparison '" + s + "'");
}

const char *cmpName(CmpKind c) {
  switch (c) {
  case CmpKind::Eq:
    return "eq";
  case CmpKind::Ne:
    return "ne";
  case CmpKind::Le:
    return "le";
  case CmpKind::Lt:
    return "lt";
  case CmpKind::Ge:
    return "ge";
  case CmpKind::Gt:
    return "gt";
  }
  return "?";
}

Guard parseGuard(const json &j, const std::string &loc) {
  if (!j.is_object() || !j.contains("clauses") || !j["clauses"].is_array())
    parseFail(loc, "guard must be an object with a 'clauses' array");
  Guard g;
  int ci = 0;
  for (const auto &cj : j["clauses"]) {
    std::string cloc = loc + ".clauses[" + std::to_string(ci++) + "]";
    GuardClause clause;
    if (cj.contains("negated"))
      clause.negated = cj["negated"].get<bool>();
    if (!cj.contains("constraints") || !cj["constraints"].is_array())
      parseFail(cloc, "clause needs a 'constraints' array");
    int ki = 0;
    for (const auto &kj : cj["constraints"]) {
      std::string kloc = cloc + ".constraints[" + std::to_string(ki++) + "]";
      Constraint c;
      c.cmp = parseCmp(getStr(kj, "cmp", kloc), kloc);
      json expr = kj;
      expr.erase("cmp");
      c.expr = parseAffine(expr, kloc);
      clause.constraints.push_back(std::move(c));
    }
    g.clauses.push_back(std::move(clause));
  }
  return g;
}

std::vector<BodyElem> parseBody(const json &j, const std::string &loc);

// A "guard"-kind statement is accepted as a structured block; it is lowered
// by attaching its predicate to every statement underneath.
void attachGuard(std::vector<BodyElem> &elems, const Guard &g) {
  for (auto &e : elems) {
    if (e.isStmt()) {
      Stmt &s = e.stmt();
      if (!s.guard)
        s.guard = g;
      else
        s.guard->clauses.insert(s.guard->clauses.end(), g.clauses.begin(),
                                g.clauses.end());
    } else {
      attachGuard(e.loop().children, g);
    }
  }
}

void parseStmtInto(const json &j, const std::string &loc,
                   std::vector<BodyElem> &out) {
  std::string kind = getStr(j, "kind", loc);
  if (kind == "guard") {
    if (!j.contains("guard"))
      parseFail(loc, "guard statement needs a 'guard' predicate");
    Guard g = parseGuard(j["guard"], loc + ".guard");
    std::vector<BodyElem> children;
    if (j.contains("children"))
      children = parseBody(j["children"], loc + ".children");
    attachGuard(children, g);
    for (auto &c : children)
      out.push_back(std::move(c));
    return;
  }

  Stmt s;
  if (kind == "load")
    s.kind = StmtKind::Load;
  else if (kind == "store")
    s.kind = StmtKind::Store;
  else if (kind == "compute")
    s.kind = StmtKind::Compute;
  else
    parseFail(loc, "unknown statement kind '" + kind + "'");

  if (s.kind == StmtKind::Load || s.kind == StmtKind::Store) {
    s.array = getStr(j, "array", loc);
    if (!j.contains("index") || !j["index"].is_array())
      parseFail(loc, "load/store needs an 'index' array");
    int ii = 0;
    for (const auto &ij : j["index"])
      s.index.push_back(
          parseAffine(ij, loc + ".index[" + std::to_string(ii++) + "]"));
  }
  if (s.kind == StmtKind::Compute) {
    auto op = opKindFromName(getStr(j, "op", loc));
    if (!op)
      parseFail(loc, "unknown op '" + j["op"].get<std::string>() + "'");
    s.op = *op;
  }
  if (j.contains("operands")) {
    if (!j["operands"].is_array())
      parseFail(loc, "'operands' must be an array");
    for (const auto &oj : j["operands"]) {
      if (oj.is_string())
        s.operands.push_back(Operand::val(oj.get<std::string>()));
      else if (oj.is_number())
        s.operands.push_back(Operand::lit(oj.get<double>()));
      else
        parseFail(loc, "operand must be a value id or a number");
    }
  }
  if (j.contains("result"))
    s.result = getStr(j, "result", loc);
  if (j.contains("guard"))
    s.guard = parseGuard(j["guard"], loc + ".guard");
  out.push_back(BodyElem::make(std::move(s)));
}

std::vector<BodyElem> parseBody(const json &j, const std::string &loc) {
  if (!j.is_array())
    parseFail(loc, "body must be an array");
  std::vector<BodyElem> out;
  int i = 0;
  for (const auto &ej : j) {
    std::string eloc = loc + "[" + std::to_string(i++) + "]";
    if (!ej.is_object())
      parseFail(eloc, "body element must be an object");
    if (ej.contains("loop")) {
      const json &lj = ej["loop"];
      Loop l;
      l.var = getStr(lj, "var", eloc + ".loop");
      l.lower = getInt(lj, "lower", eloc + ".loop");
      l.upper = getInt(lj, "upper", eloc + ".loop");
      l.step = lj.contains("step") ? getInt(lj, "step", eloc + ".loop") : 1;
      if (l.var == "const")
        parseFail(eloc + ".loop", "'const' is a reserved variable name");
      if (lj.contains("children"))
        l.children = parseBody(lj["children"], eloc + ".loop.children");
      out.push_back(BodyElem::make(std::move(l)));
    } else if (ej.contains("stmt")) {
      parseStmtInto(ej["stmt"], eloc + ".stmt", out);
    } else {
      parseFail(eloc, "body element must be a 'loop' or a 'stmt'");
    }
  }
  return out;
}

ordered_json emitAffine(const AffineExpr &e) {
  ordered_json j = ordered_json::object();
  for (const auto &[v, c] : e.terms)
    if (c != 0)
      j[v] = c;
  j["const"] = e.constant;
  return j;
}

ordered_json emitGuard(const Guard &g) {
  ordered_json j;
  j["clauses"] = ordered_json::array();
  for (const auto &cl : g.clauses) {
    ordered_json cj;
    cj["constraints"] = ordered_json::array();
    for (const auto &c : cl.constraints) {
      ordered_json kj = emitAffine(c.expr);
      kj["cmp"] = cmpName(c.cmp);
      cj["constraints"].push_back(std::move(kj));
    }
    cj["negated"] = cl.negated;
    j["clauses"].push_back(std::move(cj));
  }
  return j;
}

ordered_json emitBody(const std::vector<BodyElem> &body) {
  ordered_json arr = ordered_json::array();
  for (const auto &e : body) {
    ordered_json ej;
    if (e.isLoop()) {
      const Loop &l = e.loop();
      ordered_json lj;
      lj["var"] = l.var;
      lj["lower"] = l.lower;
      lj["upper"] = l.upper;
      lj["step"] = l.step;
      lj["children"] = emitBody(l.children);
      ej["loop"] = std::move(lj);
    } else {
      const Stmt &s = e.stmt();
      ordered_json sj;
      sj["kind"] = stmtKindName(s.kind);
      if (s.kind == StmtKind::Load || s.kind == StmtKind::Store) {
        sj["array"] = s.array;
        sj["index"] = ordered_json::array();
        for (const auto &ix : s.index)
          sj["index"].push_back(emitAffine(ix));
      }
      if (s.kind == StmtKind::Compute)
        sj["op"] = opKindName(s.op);
      if (!s.operands.empty()) {
        sj["operands"] = ordered_json::array();
        for (const auto &o : s.operands) {
          if (o.isConst)
            sj["operands"].push_back(o.constant);
          else
            sj["operands"].push_back(o.value);
        }
      }
      if (!s.result.empty())
        sj["result"] = s.result;
      if (s.guard)
        sj["guard"] = emitGuard(*s.guard);
      ej["stmt"] = std::move(sj);
    }
    arr.push_back(std::move(ej));
  }
  return arr;
}

} // namespace

Program parseProgram(const std::string &text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception &e) {
    fail(ErrorKind::Parse, std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object())
    parseFail("$", "top level must be an object");

  Program p;
  p.name = root.contains("name") ? getStr(root, "name", "$") : "program";

  if (!root.contains("arrays") || !root["arrays"].is_array())
    parseFail("$", "missing 'arrays' list");
  int ai = 0;
  for (const auto &aj : root["arrays"]) {
    std::string loc = "$.arrays[" + std::to_string(ai++) + "]";
    ArrayDecl a;
    a.name = getStr(aj, "name", loc);
    if (!aj.contains("shape") || !aj["shape"].is_array())
      parseFail(loc, "array needs a 'shape' list");
    for (const auto &dj : aj["shape"]) {
      if (!dj.is_number_integer())
        parseFail(loc, "shape entries must be integers");
      a.shape.push_back(dj.get<std::int64_t>());
    }
    a.elemBits = aj.contains("elem_bits") ? getInt(aj, "elem_bits", loc) : 32;
    std::string pl =
        aj.contains("placement") ? getStr(aj, "placement", loc) : "internal";
    if (pl == "external")
      a.placement = Placement::External;
    else if (pl == "internal")
      a.placement = Placement::Internal;
    else
      parseFail(loc, "placement must be 'external' or 'internal'");
    p.arrays.push_back(std::move(a));
  }

  if (!root.contains("nodes") || !root["nodes"].is_array())
    parseFail("$", "missing 'nodes' list");
  int ni = 0;
  for (const auto &nj : root["nodes"]) {
    std::string loc = "$.nodes[" + std::to_string(ni++) + "]";
    TaskNode n;
    n.name = getStr(nj, "name", loc);
    if (!nj.contains("body") || !nj["body"].is_array())
      parseFail(loc, "node needs a 'body' list");
    n.body = parseBody(nj["body"], loc + ".body");
    p.nodes.push_back(std::move(n));
  }

  validate(p);
  return p;
}

std::string serializeProgram(const Program &p) {
  ordered_json root;
  root["name"] = p.name;
  root["arrays"] = ordered_json::array();
  for (const auto &a : p.arrays) {
    ordered_json aj;
    aj["name"] = a.name;
    aj["shape"] = a.shape;
    aj["elem_bits"] = a.elemBits;
    aj["placement"] =
        a.placement == Placement::External ? "external" : "internal";
    root["arrays"].push_back(std::move(aj));
  }
  root["nodes"] = ordered_json::array();
  for (const auto &n : p.nodes) {
    ordered_json nj;
    nj["name"] = n.name;
    nj["body"] = emitBody(n.body);
    root["nodes"].push_back(std::move(nj));
  }
  return root.dump(2) + "\n";
}

TensorMap parseTensors(const std::string &text, const Program &p) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception &e) {
    fail(ErrorKind::Parse, std::string("invalid tensor JSON: ") + e.what());
  }
  if (!root.is_object())
    fail(ErrorKind::Parse, "tensor file must map array names to value lists");
  TensorMap out;
  for (auto it = root.begin(); it != root.end(); ++it) {
    const ArrayDecl *decl = p.findArray(it.key());
    if (!decl)
      fail(ErrorKind::Parse, "tensor for undeclared array '" + it.key() + "'");
    if (!it.value().is_array())
      fail(ErrorKind::Parse, "tensor '" + it.key() + "' must be a value list");
    Tensor t = Tensor::zeros(decl->shape);
    if (static_cast<std::int64_t>(it.value().size()) != t.numElems())
      fail(ErrorKind::Parse,
           "tensor '" + it.key() + "' has " +
               std::to_string(it.value().size()) + " values, expected " +
               std::to_string(t.numElems()));
    std::int64_t i = 0;
    for (const auto &vj : it.value()) {
      if (!vj.is_number())
        fail(ErrorKind::Parse, "tensor '" + it.key() + "' has a non-number");
      t.set(i++, vj.get<double>());
    }
    out.emplace(it.key(), std::move(t));
  }
  return out;
}

std::string serializeTensors(const TensorMap &tensors) {
  ordered_json root = ordered_json::object();
  for (const auto &[name, t] : tensors)
    root[name] = t.data;
  return root.dump(2) + "\n";
}

} // namespace sluice::ir
