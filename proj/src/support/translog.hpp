//===-- translog.hpp - Transformation log ------------------------*- C++ -*-===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace sluice {

/// One record per transformation or downgrade, consumed by the CLI report.
struct TransformEntry {
  std::string pass;   // "coarse", "fine", "reuse", "buffers", "dse"
  std::string action; // "split", "fuse", "duplicate", "reduction_rewrite", ...
  std::string array;
  std::string producer;
  std::string consumer;
  std::string detail;
  std::map<std::string, std::int64_t> metrics;
};

using TransformLog = std::vector<TransformEntry>;

} // namespace sluice
