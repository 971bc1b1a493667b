//===-- hbm.cpp - Off-chip transfer planning --------------------------------===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//

#include "mem/hbm.hpp"

#include "support/error.hpp"

#include <algorithm>

namespace sluice::mem {

using namespace ir;

TransferPlan assignHbmChannels(const DataflowGraph &g, int channels) {
  if (channels < 1)
    fail(ErrorKind::Validation, "channel count must be positive");

  TransferPlan plan;
  plan.channels = channels;
  plan.channelBytes.assign(channels, 0);

  std::vector<const ArrayDecl *> ext;
  for (const auto &a : g.prog.arrays)
    if (a.placement == Placement::External)
      ext.push_back(&a);
  std::stable_sort(ext.begin(), ext.end(),
                   [](const ArrayDecl *a, const ArrayDecl *b) {
                     return a->sizeBytes() > b->sizeBytes();
                   });

  for (const ArrayDecl *a : ext) {
    int lightest = 0;
    for (int c = 1; c < channels; ++c)
      if (plan.channelBytes[c] < plan.channelBytes[lightest])
        lightest = c;
    plan.assignment[a->name] = lightest;
    plan.channelBytes[lightest] += a->sizeBytes();
    plan.bursts.push_back({a->name, 0, a->sizeBytes(), lightest});
  }
  return plan;
}

} // namespace sluice::mem
