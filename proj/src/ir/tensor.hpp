//===-- tensor.hpp - Dense tensors keyed by array name ----------*- C++ -*-===//
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

namespace sluice::ir {

/// Dense row-major tensor. Elements are stored as doubles; in exact-integer
/// mode all values stay within the exactly-representable integer range.
struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<double> data;
  std::vector<std::uint8_t> written; // per-element init tracking

  static Tensor zeros(std::vector<std::int64_t> shape);
  static Tensor filled(std::vector<std::int64_t> shape, double value);

  std::int64_t numElems() const;
  std::int64_t flatten(const std::vector<std::int64_t> &idx) const;

  double at(std::int64_t flat) const { return data[flat]; }
  void set(std::int64_t flat, double v) {
    data[flat] = v;
    written[flat] = 1;
  }
  bool isWritten(std::int64_t flat) const { return written[flat] != 0; }
  void markAllWritten();
};

using TensorMap = std::map<std::string, Tensor>;

} // namespace sluice::ir
