// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include "forge/graph_ir.hpp"

namespace forge {

/// Host-side dense tensor. Values are always held as fp32; fp16 tensors hold
/// fp16-representable values.
struct Tensor {
  Shape shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(Shape s, float fill = 0.0f)
      : shape(std::move(s)), data(static_cast<size_t>(shape.numel()), fill) {}
  Tensor(Shape s, std::vector<float> values) : shape(std::move(s)), data(std::move(values)) {}

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  float& operator[](size_t i) { return data[i]; }
  float operator[](size_t i) const { return data[i]; }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

using TensorMap = std::map<std::string, Tensor>;

/// Bitwise equality (distinguishes -0/+0 and compares NaN payloads).
bool bit_equal(const Tensor& a, const Tensor& b);

}  // namespace forge
