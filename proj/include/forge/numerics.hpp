// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "forge/graph_ir.hpp"
#include "forge/tensor.hpp"

namespace forge {

inline constexpr float kFp16Max = 65504.0f;

/// IEEE 754 binary16 bit pattern.
struct F16Value {
  uint16_t bits = 0;

  float to_float() const;
  bool is_nan() const { return (bits & 0x7C00) == 0x7C00 && (bits & 0x03FF) != 0; }
  bool is_inf() const { return (bits & 0x7FFF) == 0x7C00; }

  friend bool operator==(F16Value, F16Value) = default;
};

/// Clamp bounds applied before softmax and normalization.
struct ClampBounds {
  float lo = -kFp16Max;
  float hi = kFp16Max;
};

/// Round-to-nearest-even. Overflow becomes +/-Inf; denormals are preserved.
F16Value f32_to_f16_rne(float x);
float f16_to_f32(F16Value h);
/// f16_to_f32(f32_to_f16_rne(x))
float round_to_f16(float x);
void round_to_f16(Tensor& t);

/// NaN passes through unchanged.
float clamp_fp16(float x, ClampBounds bounds = {});
Tensor clamp_fp16(const Tensor& x, ClampBounds bounds = {});

/// 0.5x(1 + tanh[sqrt(2/pi)(x + 0.044715x^3)]) evaluated in fp32.
float gelu_tanh(float x);
Tensor gelu_tanh(const Tensor& x);

/// clamp, subtract the per-slice max, exponentiate, normalize.
Tensor softmax_stable(const Tensor& x, int64_t axis);

enum class Precision { fp32, fp16 };

const char* precision_name(Precision p);

/// Executes `graph` in topological order. In fp16 mode each node's result is
/// rounded to its dtype (fp16 via RNE); matmul/conv/reductions accumulate in
/// fp32 and round once. fp32 mode never rounds and serves as the oracle.
///
/// `weights` supplies const-node values; graph-owned fixed weights are used
/// when the map has no entry.
TensorMap interpret_graph(const Graph& graph, const TensorMap& inputs,
                          const TensorMap& weights, Precision precision);

}  // namespace forge
