//===-- util.hpp - Shared rewriting helpers ---------------------*- C++ -*-===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//

#pragma once

#include "ir/program.hpp"

#include <set>
#include <string>
#include <vector>

namespace sluice::xform {

std::string freshArrayName(const ir::Program &p, const std::string &base);
std::string freshNodeName(const ir::Program &p, const std::string &base);

enum class Redirect { Loads, Stores, Both };

/// Point every load/store of `from` at `to` instead (subscripts unchanged).
void redirectArray(ir::TaskNode &node, const std::string &from,
                   const std::string &to, Redirect which);

/// Prefix every value id in the body (results and non-const operands).
void prefixValueIds(std::vector<ir::BodyElem> &body, const std::string &prefix);

/// Rename a loop variable everywhere it appears in the subtree (loop headers,
/// subscripts, guards).
void renameLoopVar(std::vector<ir::BodyElem> &body, const std::string &from,
                   const std::string &to);

/// Substitute `var := var + delta` in every subscript and guard of the
/// subtree (used when a loop's origin shifts).
void shiftLoopVar(std::vector<ir::BodyElem> &body, const std::string &var,
                  std::int64_t delta);

/// The maximal chain of singleton nested loops starting at the body root:
/// body = [loop { [loop { ... }] }]. Returns pointers outermost first.
std::vector<const ir::Loop *> outerChain(const ir::TaskNode &node);

/// All loops enclosing the first statement matching (array, kind), outermost
/// first, together with the statement. Returns false when absent.
struct SiteRef {
  const ir::Stmt *stmt = nullptr;
  std::vector<const ir::Loop *> chain;
};
std::vector<SiteRef> findSites(const ir::TaskNode &node,
                               const std::string &array, ir::StmtKind kind);

/// Deep copy of a body subtree.
std::vector<ir::BodyElem> cloneBody(const std::vector<ir::BodyElem> &body);

/// Conjoin `g` onto every statement in the subtree.
void guardStmts(std::vector<ir::BodyElem> &body, const ir::Guard &g);

} // namespace sluice::xform
