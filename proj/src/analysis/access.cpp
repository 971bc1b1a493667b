//===-- access.cpp - Access pattern analysis -------------------------------===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//

#include "analysis/access.hpp"

#include "support/error.hpp"

#include <algorithm>
#include <limits>

namespace sluice::analysis {

using namespace ir;

namespace {

bool matchesMode(const Stmt &s, AccessMode mode) {
  return (mode == AccessMode::Read && s.kind == StmtKind::Load) ||
         (mode == AccessMode::Write && s.kind == StmtKind::Store);
}

struct Site {
  const Stmt *stmt;
  std::vector<const Loop *> chain; // outermost first
};

std::vector<Site> collectSites(const TaskNode &node, const std::string &array,
                               AccessMode mode) {
  std::vector<Site> sites;
  forEachStmt(node.body, [&](const Stmt &s,
                             const std::vector<const Loop *> &chain) {
    if (matchesMode(s, mode) && s.array == array)
      sites.push_back({&s, chain});
  });
  return sites;
}

std::int64_t floorDiv(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b, r = a % b;
  return (r != 0 && ((r < 0) != (b < 0))) ? q - 1 : q;
}

std::int64_t ceilDiv(std::int64_t a, std::int64_t b) {
  return -floorDiv(-a, b);
}

struct Interval {
  std::int64_t lo = std::numeric_limits<std::int64_t>::min();
  std::int64_t hi = std::numeric_limits<std::int64_t>::max(); // inclusive

  void clampLo(std::int64_t v) { lo = std::max(lo, v); }
  void clampHi(std::int64_t v) { hi = std::min(hi, v); }
};

// Refine per-variable intervals from one constraint; returns false when the
// constraint is not a rectangular (single-variable) condition.
bool refine(const Constraint &c, std::map<std::string, Interval> &iv) {
  auto var = c.expr.singleVar();
  if (!var)
    return false;
  std::int64_t a = c.expr.terms.at(*var);
  std::int64_t k = c.expr.constant;
  // a*v + k CMP 0
  Interval &r = iv[*var];
  auto ge = [&](std::int64_t bound) { r.clampLo(bound); };
  auto le = [&](std::int64_t bound) { r.clampHi(bound); };
  CmpKind cmp = c.cmp;
  if (a < 0) {
    // flip: a*v + k >= 0  <=>  (-a)*v <= k
    switch (cmp) {
    case CmpKind::Ge:
      cmp = CmpKind::Le;
      break;
    case CmpKind::Gt:
      cmp = CmpKind::Lt;
      break;
    case CmpKind::Le:
      cmp = CmpKind::Ge;
      break;
    case CmpKind::Lt:
      cmp = CmpKind::Gt;
      break;
    default:
      break;
    }
    a = -a;
    k = -k;
    // now constraint is a*v - k' ... handled below via same algebra with
    // v CMP k/a after sign fix: a*v >= -k etc.
  }
  switch (cmp) {
  case CmpKind::Ge: // v >= -k/a
    ge(ceilDiv(-k, a));
    return true;
  case CmpKind::Gt:
    ge(floorDiv(-k, a) + 1);
    return true;
  case CmpKind::Le:
    le(floorDiv(-k, a));
    return true;
  case CmpKind::Lt:
    le(ceilDiv(-k, a) - 1);
    return true;
  case CmpKind::Eq:
    if ((-k) % a != 0) {
      // never satisfied
      ge(1);
      le(0);
      return true;
    }
    ge((-k) / a);
    le((-k) / a);
    return true;
  case CmpKind::Ne:
    return false;
  }
  return false;
}

std::int64_t valuesInRange(const Loop &l, const Interval &iv) {
  std::int64_t lo = std::max(l.lower, iv.lo);
  std::int64_t hi = std::min(l.upper - 1, iv.hi);
  if (hi < lo)
    return 0;
  // first loop value >= lo
  std::int64_t k0 = ceilDiv(lo - l.lower, l.step);
  std::int64_t k1 = floorDiv(hi - l.lower, l.step);
  return std::max<std::int64_t>(0, k1 - k0 + 1);
}

// Exact number of iteration points of `chain` satisfying `guard`, or nullopt
// when the guard is not expressible as rectangular clauses.
std::optional<std::int64_t>
guardedPointCount(const std::vector<const Loop *> &chain,
                  const std::optional<Guard> &guard) {
  std::int64_t total = 1;
  for (const Loop *l : chain)
    total *= l->tripCount();
  if (!guard)
    return total;

  std::map<std::string, Interval> plain;
  std::optional<std::map<std::string, Interval>> negated;
  for (const auto &cl : guard->clauses) {
    std::map<std::string, Interval> iv;
    for (const auto &c : cl.constraints)
      if (!refine(c, iv))
        return std::nullopt;
    if (!cl.negated) {
      for (auto &[v, r] : iv) {
        plain[v].clampLo(r.lo);
        plain[v].clampHi(r.hi);
      }
    } else {
      if (negated)
        return std::nullopt; // more than one negated clause
      negated = std::move(iv);
    }
  }
  auto countWith = [&](const std::map<std::string, Interval> &extra)
      -> std::int64_t {
    std::int64_t n = 1;
    for (const Loop *l : chain) {
      Interval iv;
      auto it = plain.find(l->var);
      if (it != plain.end())
        iv = it->second;
      auto ex = extra.find(l->var);
      if (ex != extra.end()) {
        iv.clampLo(ex->second.lo);
        iv.clampHi(ex->second.hi);
      }
      n *= valuesInRange(*l, iv);
    }
    return n;
  };
  std::int64_t base = countWith({});
  if (!negated)
    return base;
  // plain AND NOT(neg): |plain| - |plain AND neg|
  return base - countWith(*negated);
}

void enumerateInto(const std::vector<BodyElem> &body, const std::string &array,
                   AccessMode mode, VarEnv &env,
                   std::vector<std::vector<std::int64_t>> &out,
                   std::int64_t cap, bool &overflow) {
  for (const auto &elem : body) {
    if (overflow)
      return;
    if (elem.isStmt()) {
      const Stmt &s = elem.stmt();
      if (!matchesMode(s, mode) || s.array != array)
        continue;
      if (s.guard && !s.guard->holds(env))
        continue;
      std::vector<std::int64_t> addr;
      addr.reserve(s.index.size());
      for (const auto &e : s.index)
        addr.push_back(e.eval(env));
      out.push_back(std::move(addr));
      if (static_cast<std::int64_t>(out.size()) > cap)
        overflow = true;
    } else {
      const Loop &l = elem.loop();
      for (std::int64_t v = l.lower; v < l.upper && !overflow; v += l.step) {
        env[l.var] = v;
        enumerateInto(l.children, array, mode, env, out, cap, overflow);
      }
      env.erase(l.var);
    }
  }
}

} // namespace

bool accessesArray(const TaskNode &node, const std::string &array,
                   AccessMode mode) {
  return !collectSites(node, array, mode).empty();
}

std::optional<std::vector<std::vector<std::int64_t>>>
enumerateAddresses(const TaskNode &node, const std::string &array,
                   AccessMode mode, const EnumerationOptions &opts) {
  // Cheap domain bound first so huge nests bail before allocating.
  std::int64_t domain = 1;
  bool tooBig = false;
  forEachLoop(node.body, [&](const Loop &l, const LoopPath &) {
    domain *= std::max<std::int64_t>(1, l.tripCount());
    if (domain > opts.cap)
      tooBig = true;
  });
  if (tooBig)
    return std::nullopt;

  std::vector<std::vector<std::int64_t>> out;
  VarEnv env;
  bool overflow = false;
  enumerateInto(node.body, array, mode, env, out, opts.cap, overflow);
  if (overflow)
    return std::nullopt;
  return out;
}

AccessSummary accessSummary(const TaskNode &node, const std::string &array,
                            AccessMode mode, const EnumerationOptions &opts) {
  auto sites = collectSites(node, array, mode);
  if (sites.empty())
    fail(ErrorKind::Validation,
         "node '" + node.name + "' does not " +
             (mode == AccessMode::Read ? "read" : "write") + " array '" +
             array + "'");

  AccessSummary summary;

  // Count: sum of exact per-site counts; falls back to enumeration for
  // irregular guards.
  std::int64_t count = 0;
  bool needEnum = false;
  for (const auto &site : sites) {
    auto c = guardedPointCount(site.chain, site.stmt->guard);
    if (!c) {
      needEnum = true;
      break;
    }
    count += *c;
  }
  if (needEnum) {
    auto seq = enumerateAddresses(node, array, mode, opts);
    if (seq) {
      count = static_cast<std::int64_t>(seq->size());
    } else {
      // Past the cap with an inexpressible guard: report the unguarded bound.
      count = 0;
      for (const auto &site : sites) {
        std::int64_t n = 1;
        for (const Loop *l : site.chain)
          n *= l->tripCount();
        count += n;
      }
      summary.exact = false;
    }
  }
  summary.count = count;

  const Site &first = sites.front();
  summary.accessesPerPoint = 1;
  for (size_t i = 1; i < sites.size(); ++i)
    if (sites[i].chain == first.chain)
      ++summary.accessesPerPoint;

  // dim -> depth from the first site.
  std::map<std::string, int> depthOf;
  for (size_t d = 0; d < first.chain.size(); ++d)
    depthOf[first.chain[d]->var] = static_cast<int>(d);
  for (const auto &expr : first.stmt->index) {
    auto v = expr.singleVar();
    if (v && depthOf.count(*v))
      summary.dimToDepth.push_back(depthOf[*v]);
    else
      summary.dimToDepth.push_back(std::nullopt);
  }
  for (const Loop *l : first.chain)
    summary.orderSignature.emplace_back(l->var, l->tripCount());
  return summary;
}

std::optional<std::map<std::string, std::pair<std::int64_t, std::int64_t>>>
rectangularIntervals(const Guard &g) {
  std::map<std::string, Interval> iv;
  for (const auto &cl : g.clauses) {
    if (cl.negated)
      return std::nullopt;
    for (const auto &c : cl.constraints)
      if (!refine(c, iv))
        return std::nullopt;
  }
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> out;
  for (const auto &[v, r] : iv)
    out[v] = {r.lo, r.hi};
  return out;
}

std::optional<StreamOrder> streamOrder(const TaskNode &node,
                                       const std::string &array,
                                       AccessMode mode) {
  auto sites = collectSites(node, array, mode);
  if (sites.size() != 1)
    return std::nullopt;
  const Site &site = sites.front();
  if (site.stmt->guard)
    return std::nullopt;

  std::map<std::string, int> varToDim;
  StreamOrder so;
  so.constDims.resize(site.stmt->index.size());
  for (size_t d = 0; d < site.stmt->index.size(); ++d) {
    const AffineExpr &e = site.stmt->index[d];
    if (e.isConstant()) {
      so.constDims[d] = e.constant;
      continue;
    }
    auto v = e.singleVar();
    if (!v || e.terms.at(*v) != 1)
      return std::nullopt;
    if (varToDim.count(*v))
      return std::nullopt; // one var driving two dims
    varToDim[*v] = static_cast<int>(d);
  }
  so.starts.assign(site.stmt->index.size(), 0);
  for (const Loop *l : site.chain) {
    if (l->step != 1)
      return std::nullopt;
    auto it = varToDim.find(l->var);
    if (it == varToDim.end())
      return std::nullopt; // loop not driving a dim: repeats elements
    so.dimOrder.push_back(it->second);
    so.trips.push_back(l->tripCount());
    so.starts[it->second] =
        l->lower + site.stmt->index[it->second].constant;
    varToDim.erase(it);
  }
  if (!varToDim.empty())
    return std::nullopt; // a dim driven by a var with no enclosing loop
  return so;
}

} // namespace sluice::analysis
