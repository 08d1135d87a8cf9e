// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

// Per-step cost comparison of the two weight-refresh regimes.

#pragma once

#include <string>

#include "forge/npu_sim.hpp"
#include "forge/train.hpp"

namespace forge {

struct BenchParams {
  int weight_bearing_kernels = 60;
  // Measured device compute per step (forward + backward) for each regime.
  double compute_ms_v1 = 908.0;
  double compute_ms_v2 = 849.0;
  CostModel cost;
};

/// 60 weight-bearing kernels, 70 ms per recompile, 494 ms per 60-kernel
/// reload, 908 / 849 ms compute, restart folded into the recompile figure.
BenchParams table7_params();

struct RegimeCost {
  double compute_ms = 0.0;
  double refresh_ms = 0.0;
  double restart_ms = 0.0;

  double total_ms() const { return compute_ms + refresh_ms + restart_ms; }
};

struct BenchReport {
  std::string source;  // "table7", "cost-model" or "measured"
  int kernels = 0;
  RegimeCost v1;
  RegimeCost v2;

  /// v1 / v2; 1.0 when both are zero.
  double refresh_speedup() const;
  double total_speedup() const;
  /// Fraction of a v1 step spent refreshing weights.
  double v1_refresh_share() const;
};

/// v1 refresh = kernels x (parse + compile + load), plus an exec restart
/// whenever the compile budget cannot hold another full refresh; v2 refresh
/// = kernels x reload.
BenchReport bench_from_params(const BenchParams& params, int compile_limit = 119);

/// Runs `steps` training steps under each regime and averages the ledgers.
BenchReport bench_measured(const TrainConfig& config, int steps);

/// Human-readable table followed by one CSV line per regime.
std::string format_bench(const BenchReport& report);

}  // namespace forge
