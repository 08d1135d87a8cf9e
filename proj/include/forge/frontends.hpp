// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "forge/graph_ir.hpp"
#include "forge/tensor.hpp"

namespace forge {

enum class NormKind { layernorm, rmsnorm };
enum class Activation { gelu_tanh, swiglu };

struct ModelConfig {
  int64_t d_model = 64;
  int64_t n_heads = 4;
  int64_t n_layers = 2;
  int64_t d_ff = 256;
  int64_t vocab_size = 256;
  int64_t max_seq = 64;
  NormKind norm = NormKind::rmsnorm;
  Activation activation = Activation::swiglu;
  // Linear layers carry a bias (emitted as a separate add).
  bool bias = false;
  int64_t channel_limit = 16'384;

  int64_t head_dim() const { return d_model / n_heads; }
  /// Throws ConfigInvalid.
  void validate() const;
};

/// GPT-2 style: LayerNorm, tanh-GELU, biases.
ModelConfig gpt2_toy_config();
/// Llama style: RMSNorm, SwiGLU, no biases.
ModelConfig llama_toy_config();

enum class MaskMode {
  additive,   // explicit mask tensor added to the scores
  attribute,  // causal flag on softmax only; the device ignores it
};

struct FrontendOptions {
  int64_t seq = 64;
  int layer = 0;
  // Clamp to the fp16 range before every softmax and normalization.
  bool clamp = true;
  MaskMode mask = MaskMode::additive;
};

inline constexpr double kNormEps = 1e-5;

/// prefill_attn, prefill_ffn, decode_proj, decode_ffn, final_ln, fwd_attn,
/// fwd_ffn, ffn_bwd, sdpa_bwd1, sdpa_bwd2, qkv_bwd, classifier_fwd,
/// vocab_softmax.
const std::vector<std::string>& frontend_kinds();

/// Throws UnsupportedKind or ConfigInvalid.
Graph build_frontend(const std::string& kind, const ModelConfig& config,
                     const FrontendOptions& options = {});

/// "l<layer>.<base>", or "<base>" for model-level weights (layer < 0).
std::string weight_name(int layer, const std::string& base);

/// [1,1,S,S]: 0 on and below the diagonal, -65504 above.
std::vector<float> causal_mask_values(int64_t seq);

/// Y = X W + alpha (X A) B with W baked and A [1,1,d,r], B [1,1,r,d] bound
/// as inputs "a0_A" and "a1_B". X is input "x".
Graph build_lora_linear(const ModelConfig& config, int64_t rank, double alpha,
                        const FrontendOptions& options = {});

/// Attention block with adapters on the q, k, v and o projections, bound as
/// a0_qA, a1_qB, a2_kA, a3_kB, a4_vA, a5_vB, a6_oA, a7_oB (sorted order is
/// binding order). Output "y" matches fwd_attn's "y".
Graph build_lora_attention(const ModelConfig& config, int64_t rank, double alpha,
                           const FrontendOptions& options = {});

std::vector<std::string> lora_adapter_inputs(bool attention);

/// Adapter matrices keyed by input name, stored in BLOBFILE format.
struct LoraAdapter {
  int64_t rank = 0;
  double alpha = 1.0;
  TensorMap matrices;
};

void save_adapter(const LoraAdapter& adapter, const std::string& path);
LoraAdapter load_adapter(const std::string& path);

}  // namespace forge
