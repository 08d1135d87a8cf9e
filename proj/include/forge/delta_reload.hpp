// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "forge/npu_sim.hpp"
#include "forge/tensor.hpp"

namespace forge {

inline constexpr int kDefaultQos = 21;

/// New weight values for a loaded program, keyed by weight name. The key set
/// must equal the program's manifest.
struct ReloadPlan {
  CompiledProgram* program = nullptr;
  TensorMap patches;
  int qos = kDefaultQos;  // carried for the trace only
};

/// unload -> write sanitized blobs into tmp_dir -> load. Never compiles.
/// Returns the simulated milliseconds charged.
double reload_weights(DeviceContext& ctx, const ReloadPlan& plan);

/// Hands tmp_dir ownership from `from` to `to`; both must share an identity.
void transfer_tmpdir_ownership(CompiledProgram& from, CompiledProgram& to);

}  // namespace forge
