// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/bench.hpp"

#include <cstdio>
#include <sstream>

#include "forge/error.hpp"

namespace forge {

namespace {

double ratio(double a, double b) {
  if (a == 0.0 && b == 0.0) return 1.0;
  return a / b;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

BenchParams table7_params() {
  BenchParams p;
  p.weight_bearing_kernels = 60;
  p.compute_ms_v1 = 908.0;
  p.compute_ms_v2 = 849.0;
  p.cost.mil_parse_ms_per_kernel = 0.0;
  p.cost.compile_ms_per_kernel = 70.0;
  p.cost.load_ms_per_kernel = 0.0;
  p.cost.reload_ms_per_kernel = 494.0 / 60.0;
  p.cost.exec_restart_ms = 0.0;
  return p;
}

double BenchReport::refresh_speedup() const { return ratio(v1.refresh_ms, v2.refresh_ms); }
double BenchReport::total_speedup() const { return ratio(v1.total_ms(), v2.total_ms()); }
double BenchReport::v1_refresh_share() const {
  return v1.total_ms() == 0.0 ? 0.0 : v1.refresh_ms / v1.total_ms();
}

BenchReport bench_from_params(const BenchParams& params, int compile_limit) {
  if (params.weight_bearing_kernels < 0)
    throw Error(ErrorCode::ConfigInvalid, "kernel count must be non-negative");
  const double k = params.weight_bearing_kernels;
  BenchReport r;
  r.source = "cost-model";
  r.kernels = params.weight_bearing_kernels;
  r.v1.compute_ms = params.compute_ms_v1;
  r.v1.refresh_ms = k * params.cost.full_compile_ms();
  if (params.weight_bearing_kernels > 0) {
    // Refreshes that fit in one process before the compile budget runs out.
    int per_process = compile_limit / params.weight_bearing_kernels;
    r.v1.restart_ms = params.cost.exec_restart_ms / (per_process > 0 ? per_process : 1);
  }
  r.v2.compute_ms = params.compute_ms_v2;
  r.v2.refresh_ms = k * params.cost.reload_ms_per_kernel;
  return r;
}

BenchReport bench_measured(const TrainConfig& config, int steps) {
  if (steps < 1) throw Error(ErrorCode::ConfigInvalid, "bench needs at least one step");
  BenchReport r;
  r.source = "measured";
  for (Regime regime : {Regime::full_recompile_v1, Regime::delta_reload_v2}) {
    TrainConfig c = config;
    c.regime = regime;
    Trainer t(c);
    r.kernels = t.weight_bearing_kernels();
    RegimeCost& cost = regime == Regime::full_recompile_v1 ? r.v1 : r.v2;
    for (int i = 0; i < steps; ++i) {
      StepResult s = t.step();
      cost.compute_ms += s.timing.compute_ms / steps;
      cost.refresh_ms += s.timing.refresh_ms / steps;
      cost.restart_ms += s.timing.restart_ms / steps;
    }
  }
  return r;
}

std::string format_bench(const BenchReport& r) {
  std::ostringstream os;
  os << "source: " << r.source << ", weight-bearing kernels: " << r.kernels << "\n";
  os << "regime  compute_ms  refresh_ms  restart_ms  total_ms\n";
  auto row = [&](const char* name, const RegimeCost& c) {
    os << name << "  " << fixed(c.compute_ms, 1) << "  " << fixed(c.refresh_ms, 1) << "  "
       << fixed(c.restart_ms, 1) << "  " << fixed(c.total_ms(), 1) << "\n";
  };
  row("v1", r.v1);
  row("v2", r.v2);
  os << "refresh speedup: " << fixed(r.refresh_speedup(), 2) << "x\n";
  os << "total speedup: " << fixed(r.total_speedup(), 2) << "x\n";
  os << "v1 refresh share: " << fixed(100.0 * r.v1_refresh_share(), 1) << "%\n";
  os << "csv,regime,compute_ms,refresh_ms,restart_ms,total_ms\n";
  os << "csv,v1," << fixed(r.v1.compute_ms, 3) << "," << fixed(r.v1.refresh_ms, 3) << ","
     << fixed(r.v1.restart_ms, 3) << "," << fixed(r.v1.total_ms(), 3) << "\n";
  os << "csv,v2," << fixed(r.v2.compute_ms, 3) << "," << fixed(r.v2.refresh_ms, 3) << ","
     << fixed(r.v2.restart_ms, 3) << "," << fixed(r.v2.total_ms(), 3) << "\n";
  return os.str();
}

}  // namespace forge
