//===-- buffers.cpp - Communication buffer determination --------------------===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//

#include "mem/buffers.hpp"

#include "analysis/access.hpp"
#include "support/error.hpp"
#include "xform/util.hpp"

#include <algorithm>
#include <map>

namespace sluice::mem {

using namespace ir;
using analysis::AccessMode;

namespace {

// Elements the producer writes per iteration of its outermost enclosing
// loop; this is the natural block granularity for a ping-pong buffer.
std::int64_t producerBlockElems(const TaskNode &producer,
                                const std::string &array,
                                std::int64_t totalWrites) {
  auto sites = xform::findSites(producer, array, StmtKind::Store);
  if (sites.empty() || sites[0].chain.empty())
    return totalWrites;
  std::int64_t outerTrip = sites[0].chain[0]->tripCount();
  if (outerTrip <= 0)
    return totalWrites;
  return std::max<std::int64_t>(1, totalWrites / outerTrip);
}

// A ping-pong consumer may roam only within the two live blocks. Returns
// true when the enumerated read sequence stays within that window.
bool readsFitTwoBanks(const std::vector<std::vector<std::int64_t>> &writes,
                      const std::vector<std::vector<std::int64_t>> &reads,
                      std::int64_t blockElems) {
  std::map<std::vector<std::int64_t>, std::int64_t> blockOf;
  for (size_t i = 0; i < writes.size(); ++i) {
    auto key = writes[i];
    if (!blockOf.count(key))
      blockOf[key] = static_cast<std::int64_t>(i) / blockElems;
  }
  std::int64_t oldest = 0;
  for (const auto &addr : reads) {
    auto it = blockOf.find(addr);
    if (it == blockOf.end())
      return false; // reading something never written
    std::int64_t b = it->second;
    if (b < oldest)
      return false; // needs a retired block
    if (b > oldest + 1)
      oldest = b - 1; // slide the window forward
  }
  return true;
}

} // namespace

DataflowGraph determineBuffers(const DataflowGraph &g, TransformLog &log,
                               const BufferOptions &opts) {
  DataflowGraph out = g;
  for (auto &e : out.edges) {
    const ArrayDecl *decl = out.prog.findArray(e.array);
    BufferSpec spec;
    spec.widthBits = decl->elemBits;

    switch (e.state) {
    case EdgeState::Clean:
    case EdgeState::NeedsReuse: {
      spec.kind = BufferKind::Fifo;
      auto ov = opts.depthOverride.find(e.key());
      spec.depth = ov != opts.depthOverride.end() ? ov->second : opts.fifoDepth;
      spec.depth = std::max<std::int64_t>(2, spec.depth);
      break;
    }
    case EdgeState::PingPongOnly: {
      spec.kind = BufferKind::PingPong;
      const TaskNode *prod = out.prog.findNode(e.producer);
      const TaskNode *cons = out.prog.findNode(e.consumer);
      auto wseq = analysis::enumerateAddresses(*prod, e.array,
                                               AccessMode::Write);
      std::int64_t total = wseq ? static_cast<std::int64_t>(wseq->size())
                                : decl->numElems();
      spec.blockElems = producerBlockElems(*prod, e.array, total);
      if (wseq) {
        auto rseq =
            analysis::enumerateAddresses(*cons, e.array, AccessMode::Read);
        if (!rseq || !readsFitTwoBanks(*wseq, *rseq, spec.blockElems)) {
          // Random access beyond two banks: coarsen to whole-tensor blocks.
          spec.blockElems = total;
          log.push_back({"buffers", "block_coarsen", e.array, e.producer,
                         e.consumer,
                         "consumer reads straddle more than two blocks; "
                         "block set to the full tensor",
                         {}});
        }
      }
      break;
    }
    case EdgeState::Sequential:
      spec.kind = BufferKind::Sequential;
      break;
    }
    e.spec = spec;

    TransformEntry entry{"buffers", "assign", e.array, e.producer, e.consumer,
                         bufferKindName(spec.kind), {}};
    if (spec.kind == BufferKind::Fifo)
      entry.metrics["depth"] = spec.depth;
    if (spec.kind == BufferKind::PingPong)
      entry.metrics["block_elems"] = spec.blockElems;
    log.push_back(std::move(entry));
  }
  return out;
}

} // namespace sluice::mem
