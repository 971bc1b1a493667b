//===-- reuse.cpp - Line/window reuse buffer generation ---------------------===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//

#include "mem/reuse.hpp"

#include "analysis/access.hpp"
#include "support/error.hpp"
#include "xform/util.hpp"

#include <algorithm>
#include <set>

namespace sluice::mem {

using namespace ir;

namespace {

struct DimInfo {
  enum Kind { Const, Plain, Stencil } kind = Const;
  std::int64_t constant = 0; // Const
  std::string plainVar;      // Plain / Stencil outer (index) variable
  std::string windowVar;     // Stencil window (reduction) variable
  std::int64_t windowTrip = 1;
  std::int64_t outTrip = 0;   // trip of the outer variable's original loop
  std::int64_t extent = 0;    // declared dimension size
};

Loop header(const std::string &var, std::int64_t lower, std::int64_t upper) {
  Loop l;
  l.var = var;
  l.lower = lower;
  l.upper = upper;
  l.step = 1;
  return l;
}

Stmt loadStmt(const std::string &array, std::vector<AffineExpr> index,
              const std::string &result) {
  Stmt s;
  s.kind = StmtKind::Load;
  s.array = array;
  s.index = std::move(index);
  s.result = result;
  return s;
}

Stmt storeStmt(const std::string &array, std::vector<AffineExpr> index,
               Operand value) {
  Stmt s;
  s.kind = StmtKind::Store;
  s.array = array;
  s.index = std::move(index);
  s.operands = {std::move(value)};
  return s;
}

std::string freshVar(std::set<std::string> &taken, const std::string &base) {
  std::string name = base;
  int i = 0;
  while (taken.count(name))
    name = base + std::to_string(i++);
  taken.insert(name);
  return name;
}

} // namespace

std::pair<DataflowGraph, ReusePlan>
generateReuseBuffers(const DataflowGraph &g, const std::string &consumer,
                     const std::string &array, TransformLog &log) {
  Program prog = g.prog;
  TaskNode *node = prog.findNode(consumer);
  const ArrayDecl *decl = prog.findArray(array);
  if (!node || !decl)
    fail(ErrorKind::Internal, "reuse: unknown node or array");

  auto sites = xform::findSites(*node, array, StmtKind::Load);
  if (sites.size() != 1)
    fail(ErrorKind::Unresolvable,
         "reuse needs exactly one read site of '" + array + "' in '" +
             consumer + "'");
  const auto &site = sites[0];

  std::map<std::string, const Loop *> loopOf;
  for (const Loop *l : site.chain)
    loopOf[l->var] = l;

  // Reduction variables relative to this input: loop variables that do not
  // drive any dimension of the node's output stores.
  std::set<std::string> outputVars;
  forEachStmt(node->body, [&](const Stmt &s, const auto &) {
    if (s.kind != StmtKind::Store || s.array == array)
      return;
    for (const auto &e : s.index)
      for (const auto &[v, c] : e.terms)
        if (c != 0)
          outputVars.insert(v);
  });

  // Classify each dimension of the streamed array.
  std::vector<DimInfo> dims;
  int stencilCount = 0;
  for (size_t d = 0; d < site.stmt->index.size(); ++d) {
    const AffineExpr &e = site.stmt->index[d];
    DimInfo info;
    info.extent = decl->shape[d];
    std::vector<std::pair<std::string, std::int64_t>> vars;
    for (const auto &[v, c] : e.terms)
      if (c != 0)
        vars.emplace_back(v, c);
    if (vars.empty()) {
      info.kind = DimInfo::Const;
      info.constant = e.constant;
    } else if (vars.size() == 1) {
      if (vars[0].second != 1 || e.constant != 0)
        fail(ErrorKind::Unresolvable,
             "non-unit stride or offset subscript on '" + array + "'");
      info.kind = DimInfo::Plain;
      info.plainVar = vars[0].first;
      const Loop *l = loopOf[info.plainVar];
      if (!l || l->lower != 0 || l->step != 1 ||
          l->tripCount() != info.extent)
        fail(ErrorKind::Unresolvable,
             "plain dimension of '" + array + "' does not cover the extent");
    } else if (vars.size() == 2) {
      if (vars[0].second != 1 || vars[1].second != 1 || e.constant != 0)
        fail(ErrorKind::Unresolvable,
             "non-unit stride in stencil subscript of '" + array + "'");
      // The output-driving variable is the sliding index; the other is the
      // window offset.
      std::string a = vars[0].first, b = vars[1].first;
      bool aOut = outputVars.count(a) > 0;
      bool bOut = outputVars.count(b) > 0;
      std::string outer, window;
      if (aOut && !bOut) {
        outer = a;
        window = b;
      } else if (bOut && !aOut) {
        outer = b;
        window = a;
      } else {
        // fall back on trip counts: the longer loop slides
        outer = loopOf[a]->tripCount() >= loopOf[b]->tripCount() ? a : b;
        window = outer == a ? b : a;
      }
      const Loop *ol = loopOf[outer];
      const Loop *wl = loopOf[window];
      if (!ol || !wl || ol->lower != 0 || wl->lower != 0 || ol->step != 1 ||
          wl->step != 1)
        fail(ErrorKind::Unresolvable,
             "stencil loops of '" + array + "' must start at zero with unit "
             "step");
      info.kind = DimInfo::Stencil;
      info.plainVar = outer;
      info.windowVar = window;
      info.windowTrip = wl->tripCount();
      info.outTrip = ol->tripCount();
      ++stencilCount;
    } else {
      fail(ErrorKind::Unresolvable,
           "subscript of '" + array + "' mixes more than two variables");
    }
    dims.push_back(std::move(info));
  }
  if (stencilCount != 2)
    fail(ErrorKind::Unresolvable,
         "reuse generation handles exactly two stencil dimensions, found " +
             std::to_string(stencilCount));

  // Identify the row (first stencil dim) and column (second).
  int rowDim = -1, colDim = -1;
  for (size_t d = 0; d < dims.size(); ++d) {
    if (dims[d].kind != DimInfo::Stencil)
      continue;
    if (rowDim < 0)
      rowDim = static_cast<int>(d);
    else
      colDim = static_cast<int>(d);
  }
  const DimInfo &row = dims[rowDim];
  const DimInfo &col = dims[colDim];
  std::int64_t KH = row.windowTrip, KW = col.windowTrip;
  std::int64_t HIn = row.extent, WIn = col.extent;
  std::int64_t HOut = row.outTrip, WOut = col.outTrip;

  // Main-loop variables (plain and stencil index vars) must form the node's
  // outer chain; the compute region is everything below it.
  std::set<std::string> mainVars;
  for (const auto &d : dims)
    if (d.kind == DimInfo::Plain || d.kind == DimInfo::Stencil)
      mainVars.insert(d.plainVar);
  auto chain = xform::outerChain(*node);
  if (chain.size() < mainVars.size())
    fail(ErrorKind::Unresolvable,
         "stencil index loops are not the outer chain of '" + consumer + "'");
  for (size_t i = 0; i < mainVars.size(); ++i)
    if (!mainVars.count(chain[i]->var))
      fail(ErrorKind::Unresolvable,
           "loop '" + chain[i]->var + "' interleaves with the stencil chain");

  std::vector<BodyElem> region = chain[mainVars.size() - 1]->children;

  // Fresh names.
  std::set<std::string> takenVars;
  forEachLoop(node->body, [&](const Loop &l, const LoopPath &) {
    takenVars.insert(l.var);
  });
  std::string hIn = freshVar(takenVars, row.plainVar + "_in");
  std::string wIn = freshVar(takenVars, col.plainVar + "_in");
  std::string wOut = freshVar(takenVars, col.plainVar + "_out");
  std::string rShift = freshVar(takenVars, "lb_r");
  std::string rShiftW = freshVar(takenVars, "wb_r");
  std::string cShiftW = freshVar(takenVars, "wb_c");
  std::string rFill = freshVar(takenVars, "wb_f");
  std::string rInit = freshVar(takenVars, "init_r");
  std::string cInit = freshVar(takenVars, "init_c");
  std::string rInitW = freshVar(takenVars, "init_rw");
  std::string cInitW = freshVar(takenVars, "init_cw");

  std::string lb = xform::freshArrayName(prog, array + "_lb");
  std::string wb = xform::freshArrayName(prog, array + "_wb");
  {
    ArrayDecl lbd;
    lbd.name = lb;
    lbd.shape = {KH, WIn};
    lbd.elemBits = decl->elemBits;
    lbd.placement = Placement::Internal;
    prog.arrays.push_back(lbd);
    ArrayDecl wbd;
    wbd.name = wb;
    wbd.shape = {KH, KW};
    wbd.elemBits = decl->elemBits;
    wbd.placement = Placement::Internal;
    prog.arrays.push_back(wbd);
  }

  // Compute region: replace the streamed load with a window read, then remap
  // the sliding variables onto the rebuilt mains.
  {
    TaskNode shim;
    shim.body = std::move(region);
    // replace load of `array` with wb[windowRow][windowCol]
    std::function<void(std::vector<BodyElem> &)> replace =
        [&](std::vector<BodyElem> &body) {
          for (auto &el : body) {
            if (el.isLoop()) {
              replace(el.loop().children);
              continue;
            }
            Stmt &s = el.stmt();
            if (s.kind == StmtKind::Load && s.array == array) {
              s.array = wb;
              s.index = {AffineExpr::var(row.windowVar),
                         AffineExpr::var(col.windowVar)};
            }
          }
        };
    replace(shim.body);
    xform::renameLoopVar(shim.body, row.plainVar, hIn);
    xform::shiftLoopVar(shim.body, hIn, -(KH - 1));
    xform::renameLoopVar(shim.body, col.plainVar, wOut);
    xform::shiftLoopVar(shim.body, wOut, -(KW - 1));
    region = std::move(shim.body);
  }

  // Valid-window guard: h_in >= KH-1, w_out >= KW-1, and the original output
  // trip bounds.
  Guard validGuard;
  {
    GuardClause cl;
    cl.constraints.push_back(
        {AffineExpr::var(hIn, 1, -(KH - 1)), CmpKind::Ge});
    cl.constraints.push_back(
        {AffineExpr::var(hIn, 1, -(KH - 1) - (HOut - 1)), CmpKind::Le});
    cl.constraints.push_back(
        {AffineExpr::var(wOut, 1, -(KW - 1)), CmpKind::Ge});
    cl.constraints.push_back(
        {AffineExpr::var(wOut, 1, -(KW - 1) - (WOut - 1)), CmpKind::Le});
    validGuard.clauses.push_back(std::move(cl));
  }
  xform::guardStmts(region, validGuard);

  // Region A: one streamed read per element; shift the line buffer column up
  // and append the new element.
  std::vector<BodyElem> regionA;
  {
    Loop shift = header(rShift, 0, KH - 1);
    shift.children.push_back(BodyElem::make(
        loadStmt(lb,
                 {AffineExpr::var(rShift, 1, 1), AffineExpr::var(wIn)},
                 "lb_t")));
    shift.children.push_back(BodyElem::make(storeStmt(
        lb, {AffineExpr::var(rShift), AffineExpr::var(wIn)},
        Operand::val("lb_t"))));
    std::vector<BodyElem> colBody;
    if (KH > 1)
      colBody.push_back(BodyElem::make(std::move(shift)));
    // streamed read with the original subscript shape
    std::vector<AffineExpr> inIndex;
    for (size_t d = 0; d < dims.size(); ++d) {
      if (dims[d].kind == DimInfo::Const)
        inIndex.push_back(AffineExpr::constExpr(dims[d].constant));
      else if (static_cast<int>(d) == rowDim)
        inIndex.push_back(AffineExpr::var(hIn));
      else if (static_cast<int>(d) == colDim)
        inIndex.push_back(AffineExpr::var(wIn));
      else
        inIndex.push_back(AffineExpr::var(dims[d].plainVar));
    }
    colBody.push_back(BodyElem::make(loadStmt(array, inIndex, "in_x")));
    colBody.push_back(BodyElem::make(storeStmt(
        lb, {AffineExpr::constExpr(KH - 1), AffineExpr::var(wIn)},
        Operand::val("in_x"))));
    Loop colLoop = header(wIn, 0, WIn);
    colLoop.children = std::move(colBody);
    regionA.push_back(BodyElem::make(std::move(colLoop)));
  }

  // Region B: slide the window horizontally, load the new column from the
  // line buffer, then run the compute region.
  std::vector<BodyElem> regionB;
  {
    std::vector<BodyElem> colBody;
    if (KW > 1) {
      Loop shiftRows = header(rShiftW, 0, KH);
      Loop shiftCols = header(cShiftW, 0, KW - 1);
      shiftCols.children.push_back(BodyElem::make(loadStmt(
          wb, {AffineExpr::var(rShiftW), AffineExpr::var(cShiftW, 1, 1)},
          "wb_t")));
      shiftCols.children.push_back(BodyElem::make(storeStmt(
          wb, {AffineExpr::var(rShiftW), AffineExpr::var(cShiftW)},
          Operand::val("wb_t"))));
      shiftRows.children.push_back(BodyElem::make(std::move(shiftCols)));
      colBody.push_back(BodyElem::make(std::move(shiftRows)));
    }
    Loop fill = header(rFill, 0, KH);
    fill.children.push_back(BodyElem::make(loadStmt(
        lb, {AffineExpr::var(rFill), AffineExpr::var(wOut)}, "wb_n")));
    fill.children.push_back(BodyElem::make(storeStmt(
        wb, {AffineExpr::var(rFill), AffineExpr::constExpr(KW - 1)},
        Operand::val("wb_n"))));
    colBody.push_back(BodyElem::make(std::move(fill)));
    for (auto &el : region)
      colBody.push_back(std::move(el));
    Loop colLoop = header(wOut, 0, WIn);
    colLoop.children = std::move(colBody);
    regionB.push_back(BodyElem::make(std::move(colLoop)));
  }

  // Row loop encloses region A then region B; plain-dimension loops wrap the
  // row loop in array-dimension order.
  Loop rowLoop = header(hIn, 0, HIn);
  for (auto &el : regionA)
    rowLoop.children.push_back(std::move(el));
  for (auto &el : regionB)
    rowLoop.children.push_back(std::move(el));

  std::vector<BodyElem> main;
  main.push_back(BodyElem::make(std::move(rowLoop)));
  for (auto it = dims.rbegin(); it != dims.rend(); ++it) {
    if (it->kind != DimInfo::Plain)
      continue;
    Loop pl = header(it->plainVar, 0, it->extent);
    pl.children = std::move(main);
    main.clear();
    main.push_back(BodyElem::make(std::move(pl)));
  }

  // Zero-fill the buffers once at node start so early shifts never read
  // uninitialized storage.
  std::vector<BodyElem> body;
  {
    Loop li = header(rInit, 0, KH);
    Loop lj = header(cInit, 0, WIn);
    lj.children.push_back(BodyElem::make(storeStmt(
        lb, {AffineExpr::var(rInit), AffineExpr::var(cInit)},
        Operand::lit(0.0))));
    li.children.push_back(BodyElem::make(std::move(lj)));
    body.push_back(BodyElem::make(std::move(li)));
    Loop wi = header(rInitW, 0, KH);
    Loop wj = header(cInitW, 0, KW);
    wj.children.push_back(BodyElem::make(storeStmt(
        wb, {AffineExpr::var(rInitW), AffineExpr::var(cInitW)},
        Operand::lit(0.0))));
    wi.children.push_back(BodyElem::make(std::move(wj)));
    body.push_back(BodyElem::make(std::move(wi)));
  }
  for (auto &el : main)
    body.push_back(std::move(el));
  node->body = std::move(body);

  ReusePlan plan;
  plan.lineBuffer = lb;
  plan.windowBuffer = wb;
  plan.lineBufferShape = {KH, WIn};
  plan.windowBufferShape = {KH, KW};
  plan.rewrittenRegions = {"line_update", "window_shift", "compute"};

  TransformEntry entry{"reuse", "generate", array, "", consumer, "", {}};
  entry.detail = "line buffer '" + lb + "' [" + std::to_string(KH) + " x " +
                 std::to_string(WIn) + "], window '" + wb + "' [" +
                 std::to_string(KH) + " x " + std::to_string(KW) + "]";
  entry.metrics["kh"] = KH;
  entry.metrics["kw"] = KW;
  log.push_back(std::move(entry));

  return {rebuildGraph(std::move(prog), g), plan};
}

} // namespace sluice::mem
