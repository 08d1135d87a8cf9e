// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

// Bucketed prefill followed by autoregressive decode. The device runs the
// projections, FFNs and the final norm; the host keeps the KV cache, does
// decode attention, the tied output head and sampling.

#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "forge/config.hpp"
#include "forge/frontends.hpp"
#include "forge/npu_sim.hpp"
#include "forge/numerics.hpp"
#include "forge/tensor.hpp"

namespace forge {

enum class SamplerKind { greedy, temperature, top_p };

struct SamplerConfig {
  SamplerKind kind = SamplerKind::greedy;
  float temperature = 1.0f;
  float top_p = 0.9f;
  uint64_t seed = 0;
};

struct InferConfig {
  ModelConfig model = [] {
    ModelConfig c = gpt2_toy_config();
    c.max_seq = 1024 + 64;
    return c;
  }();
  uint64_t seed = 7;  // parameter initialization
  int max_new_tokens = 64;
  // fp16 runs every kernel on the simulated device; fp32 interprets the same
  // graphs on the host.
  Precision precision = Precision::fp16;
  SamplerConfig sampler;

  void set(const std::string& key, const std::string& value);
  void apply(const KeyValues& values);
};

/// {32, 64, 128, 256, 512, 1024}.
const std::vector<int64_t>& prefill_buckets();
/// Smallest bucket >= prompt_len; throws PromptTooLong.
int64_t prefill_bucket(int64_t prompt_len);

/// Decode surfaces pad the sequence dimension to this width.
inline constexpr int64_t kDecodeSeq = 16;

std::vector<int> tokenize_bytes(const std::string& text);
std::string detokenize_bytes(const std::vector<int>& tokens);

struct InferResult {
  std::vector<int> tokens;  // generated tokens only
  int64_t bucket = 0;
  double prefill_ms = 0.0;
  double decode_ms = 0.0;
  double compile_ms = 0.0;
  int compiles = 0;
};

class InferenceSession {
 public:
  InferenceSession(InferConfig config, TensorMap params);
  explicit InferenceSession(InferConfig config);
  ~InferenceSession();
  InferenceSession(const InferenceSession&) = delete;
  InferenceSession& operator=(const InferenceSession&) = delete;

  /// Throws PromptTooLong.
  InferResult generate(const std::vector<int>& prompt);

  const InferConfig& config() const { return config_; }
  const TensorMap& params() const { return params_; }

 private:
  struct Kernel;
  Kernel& kernel(const std::string& kind, int layer, int64_t seq);
  TensorMap run(Kernel& k, const TensorMap& inputs);
  std::vector<float> logits_at(const Tensor& xf, int64_t seq, int64_t col) const;

  InferConfig config_;
  TensorMap params_;
  std::unique_ptr<DeviceContext> ctx_;
  std::vector<std::unique_ptr<Kernel>> kernels_;
};

/// Index of the largest value; the lowest index wins ties.
int argmax(const std::vector<float>& logits);

/// Greedy, temperature or nucleus sampling.
int sample(const std::vector<float>& logits, const SamplerConfig& config, std::mt19937_64& rng);

}  // namespace forge
