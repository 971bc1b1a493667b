//===-- tensor.cpp --------------------------------------------------------===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//

#include "ir/tensor.hpp"

#include "support/error.hpp"

#include <algorithm>

namespace sluice::ir {

Tensor Tensor::zeros(std::vector<std::int64_t> shape) {
  Tensor t;
  t.shape = std::move(shape);
  std::int64_t n = t.numElems();
  t.data.assign(n, 0.0);
  t.written.assign(n, 0);
  return t;
}

Tensor Tensor::filled(std::vector<std::int64_t> shape, double value) {
  Tensor t = zeros(std::move(shape));
  std::fill(t.data.begin(), t.data.end(), value);
  t.markAllWritten();
  return t;
}

std::int64_t Tensor::numElems() const {
  std::int64_t n = 1;
  for (std::int64_t d : shape)
    n *= d;
  return n;
}

std::int64_t Tensor::flatten(const std::vector<std::int64_t> &idx) const {
  if (idx.size() != shape.size())
    fail(ErrorKind::Internal, "tensor index rank mismatch");
  std::int64_t flat = 0;
  for (size_t d = 0; d < shape.size(); ++d) {
    if (idx[d] < 0 || idx[d] >= shape[d])
      fail(ErrorKind::Internal, "tensor index out of bounds");
    flat = flat * shape[d] + idx[d];
  }
  return flat;
}

void Tensor::markAllWritten() { std::fill(written.begin(), written.end(), 1); }

} // namespace sluice::ir
