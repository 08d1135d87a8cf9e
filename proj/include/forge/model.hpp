// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

// Toy transformer parameters, synthetic data and the mapping from host
// parameters to the weights each device kernel bakes.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "forge/frontends.hpp"
#include "forge/graph_ir.hpp"
#include "forge/tensor.hpp"

namespace forge {

/// fp32 host parameters keyed by weight name. Matrices are stored in conv
/// form [cout, cin]; vectors as [n]. Llama layout: embed [V,d], wcls [V,d],
/// final_norm, and per layer attn_norm, ffn_norm, wq, wk, wv, wo, w1, w3, w2.
TensorMap init_llama_params(const ModelConfig& config, uint64_t seed);

/// GPT-2 layout: embed [V,d] (tied with the output head), wpe [max_seq,d],
/// final_norm(+_b), and per layer attn_norm(+_b), ffn_norm(+_b), wq, wk, wv,
/// wo, w_fc, w_proj, each with a "_b" bias.
TensorMap init_gpt2_params(const ModelConfig& config, uint64_t seed);

/// Norm gains are frozen during training.
bool is_trainable(const std::string& name);

/// Resolves every weight the graph declares: fixed values come from the
/// graph, "<w>_t" is the transpose of "<w>", and matrices are reshaped to
/// the declared [cout, cin, 1, 1]. Throws MissingWeight / ShapeMismatch.
TensorMap device_weights(const Graph& graph, const TensorMap& params);

/// [a, b] -> [b, a].
Tensor transpose2d(const Tensor& t);

/// Deterministic character-level text from a small word Markov source.
std::string synthetic_corpus(uint64_t seed, size_t bytes = 1 << 16);

struct Batch {
  std::vector<int> tokens;
  std::vector<int> targets;
};

/// A window of seq+1 bytes whose position is a pure function of
/// (seed, step, micro).
Batch make_batch(const std::string& corpus, uint64_t seed, int64_t step, int micro, int64_t seq);

/// Host [1, d, 1, S] activations: column s = embed[tokens[s]] (+ wpe[s]).
Tensor embed_tokens(const Tensor& embed, const std::vector<int>& tokens, int64_t seq,
                    const Tensor* wpe = nullptr, int64_t position_offset = 0);

/// Simple mixing hash used for data order and seeds.
uint64_t splitmix64(uint64_t x);

}  // namespace forge
