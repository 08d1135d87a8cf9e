// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

// Host-orchestrated training. The device runs the forward kernels (fwd_attn,
// fwd_ffn, classifier_fwd) and the backward dx kernels (ffn_bwd, sdpa_bwd1,
// sdpa_bwd2, qkv_bwd); the host does the embedding gather, the loss, the
// classifier and final-norm backward, weight gradients and Adam.

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "forge/config.hpp"
#include "forge/frontends.hpp"
#include "forge/npu_sim.hpp"
#include "forge/tensor.hpp"

namespace forge {

enum class Regime {
  full_recompile_v1,  // recompile every weight-bearing kernel after each update
  delta_reload_v2,    // patch weight files and reload
};

const char* regime_name(Regime regime);
/// Accepts v1, v2 and the full names.
std::optional<Regime> parse_regime(const std::string& text);

enum class DataOrder {
  shuffled,  // window position depends on (seed, step, micro)
  fixed,     // every step sees the step-0 windows
};

/// The three NaN fixes. All on by default; tests switch them off.
struct NumericFixes {
  // Compile device programs only after checkpoint weights are loaded.
  bool deferred_compile = true;
  // Clamp to the fp16 range before softmax and normalization.
  bool clamp = true;
  // Sanitize gradients on the host before they reach the optimizer.
  bool sanitize = true;
};

struct TrainConfig {
  ModelConfig model = llama_toy_config();
  int64_t seq = 64;
  int grad_accum = 4;
  float lr = 3e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  uint64_t seed = 42;
  Regime regime = Regime::delta_reload_v2;
  NumericFixes fixes;
  // 1-based step whose embedding activations are multiplied by
  // inject_scale; -1 disables fault injection.
  int64_t inject_step = -1;
  double inject_scale = 1e6;
  DataOrder data_order = DataOrder::shuffled;
  bool strict = true;
  int compile_limit = 119;
  int64_t corpus_bytes = 1 << 16;

  /// Throws ConfigInvalid for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  void apply(const KeyValues& values);
  void validate() const;
};

struct StepTiming {
  double compute_ms = 0.0;
  double refresh_ms = 0.0;
  double restart_ms = 0.0;

  double total_ms() const { return compute_ms + refresh_ms + restart_ms; }
};

struct StepResult {
  int64_t step = 0;  // 1-based
  double loss = 0.0;
  StepTiming timing;
  int compiles = 0;
  int reloads = 0;
};

struct AdamState {
  TensorMap m;
  TensorMap v;
  int64_t t = 0;
};

struct TrainState {
  int64_t step = 0;  // completed steps
  TensorMap params;
  AdamState adam;
  std::vector<double> loss_history;
};

struct TrainKernel;

class Trainer {
 public:
  /// Fresh initialization from config.seed; compiles every kernel.
  explicit Trainer(TrainConfig config);
  ~Trainer();
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  /// Restores a step_<N> directory. With deferred compilation the programs
  /// are compiled from the restored weights; without it they are compiled
  /// first, from a fresh initialization, and keep those stale weights until
  /// the next refresh.
  static std::unique_ptr<Trainer> resume(TrainConfig config, const std::string& checkpoint_dir);

  /// Throws NanDetected when the loss is not finite.
  StepResult step();

  /// Writes <root>/step_<N>/ and returns its path.
  std::string save_checkpoint(const std::string& root) const;

  const TrainState& state() const { return state_; }
  const TrainConfig& config() const { return config_; }
  const DeviceContext& device() const { return *ctx_; }
  int weight_bearing_kernels() const;
  int static_kernels() const;

 private:
  struct ResumeTag {};
  Trainer(TrainConfig config, ResumeTag);

  void build_kernels();
  void compile_all();
  double refresh();
  TensorMap run(TrainKernel& k, const TensorMap& inputs);

  TrainConfig config_;
  TrainState state_;
  std::string corpus_;
  std::unique_ptr<DeviceContext> ctx_;
  std::vector<std::unique_ptr<TrainKernel>> kernels_;
  double restart_ms_pending_ = 0.0;
};

/// Reads a checkpoint directory into `state`; optimizer hyperparameters and
/// the seed are written back into `config`.
void load_checkpoint(const std::string& dir, TrainState& state, TrainConfig& config);

/// step,loss,compute_ms,refresh_ms,total_ms
std::string loss_csv(const std::vector<StepResult>& results);

struct StressReport {
  int chains = 0;
  int steps = 0;
  int nan_count = 0;
  std::vector<std::vector<double>> losses;  // [chain][step]
  std::vector<bool> non_increasing;
  std::vector<double> mean;    // per step across chains
  std::vector<double> stddev;  // per step across chains (population)

  int monotone_chains() const;
};

/// Every step runs in a fresh DeviceContext that resumes from the previous
/// step's on-disk checkpoint under `work_dir`.
StressReport stress_test(const TrainConfig& config, int chains, int steps_per_chain,
                         const std::string& work_dir);

std::string format_stress_report(const StressReport& report);

}  // namespace forge
