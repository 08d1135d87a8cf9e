// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "forge/graph_ir.hpp"
#include "forge/tensor.hpp"

namespace testing_support {

struct RandomGraphOptions {
  int ops = 12;
  // Adds no-op casts/reshapes/transposes, fp16->fp32->fp16 round trips and
  // dead branches for the optimizer to remove.
  bool noise = true;
  // Keeps every op device-compatible (no fp32 graph outputs).
  bool device_safe = true;
};

/// Valid rank-4 [1,C,1,16] graph with fp16 inputs "x" (and sometimes "y"),
/// caller-bound conv weights "w<i>" and 1 to 3 outputs.
forge::Graph random_graph(uint64_t seed, const RandomGraphOptions& options = {});

/// Uniform values in [lo, hi], rounded to fp16.
forge::TensorMap random_inputs(const forge::Graph& graph, uint64_t seed, float lo = -1.0f,
                               float hi = 1.0f);

/// Values for every non-fixed weight spec, scaled by 1/sqrt(fan-in).
forge::TensorMap random_weights(const forge::Graph& graph, uint64_t seed);

}  // namespace testing_support
