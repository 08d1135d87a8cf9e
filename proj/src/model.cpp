// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/model.hpp"

#include <array>
#include <cmath>
#include <random>

#include "forge/error.hpp"

namespace forge {

namespace {

Tensor normal(std::mt19937_64& rng, Shape shape, double stddev) {
  std::normal_distribution<float> dist(0.0f, static_cast<float>(stddev));
  Tensor t(std::move(shape));
  for (float& v : t.data) v = dist(rng);
  return t;
}

Tensor matrix(std::mt19937_64& rng, int64_t cout, int64_t cin) {
  return normal(rng, Shape{cout, cin}, 0.5 / std::sqrt(static_cast<double>(cin)));
}

Tensor ones(int64_t n) { return Tensor(Shape{n}, 1.0f); }
Tensor zeros(int64_t n) { return Tensor(Shape{n}, 0.0f); }

}  // namespace

uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

TensorMap init_llama_params(const ModelConfig& c, uint64_t seed) {
  c.validate();
  std::mt19937_64 rng(splitmix64(seed));
  const int64_t d = c.d_model;
  TensorMap p;
  p["embed"] = normal(rng, Shape{c.vocab_size, d}, 0.5);
  for (int l = 0; l < c.n_layers; ++l) {
    p[weight_name(l, "attn_norm")] = ones(d);
    p[weight_name(l, "ffn_norm")] = ones(d);
    for (const char* w : {"wq", "wk", "wv", "wo"}) p[weight_name(l, w)] = matrix(rng, d, d);
    p[weight_name(l, "w1")] = matrix(rng, c.d_ff, d);
    p[weight_name(l, "w3")] = matrix(rng, c.d_ff, d);
    p[weight_name(l, "w2")] = matrix(rng, d, c.d_ff);
  }
  p["final_norm"] = ones(d);
  p["wcls"] = normal(rng, Shape{c.vocab_size, d}, 0.02);
  return p;
}

TensorMap init_gpt2_params(const ModelConfig& c, uint64_t seed) {
  c.validate();
  std::mt19937_64 rng(splitmix64(seed ^ 0x6770ull));
  const int64_t d = c.d_model;
  TensorMap p;
  // Small token embeddings relative to the blocks keep the tied head from
  // simply echoing the last token.
  p["embed"] = normal(rng, Shape{c.vocab_size, d}, 0.1);
  p["wpe"] = normal(rng, Shape{c.max_seq, d}, 0.1);
  for (int l = 0; l < c.n_layers; ++l) {
    for (const char* n : {"attn_norm", "ffn_norm"}) {
      p[weight_name(l, n)] = ones(d);
      p[weight_name(l, std::string(n) + "_b")] = zeros(d);
    }
    for (const char* w : {"wq", "wk", "wv", "wo"}) {
      p[weight_name(l, w)] = normal(rng, Shape{d, d}, 1.0 / std::sqrt(static_cast<double>(d)));
      p[weight_name(l, std::string(w) + "_b")] = normal(rng, Shape{d}, 0.02);
    }
    p[weight_name(l, "w_fc")] = normal(rng, Shape{c.d_ff, d}, 1.0 / std::sqrt(static_cast<double>(d)));
    p[weight_name(l, "w_fc_b")] = normal(rng, Shape{c.d_ff}, 0.02);
    p[weight_name(l, "w_proj")] = matrix(rng, d, c.d_ff);
    p[weight_name(l, "w_proj_b")] = normal(rng, Shape{d}, 0.02);
  }
  p["final_norm"] = ones(d);
  p["final_norm_b"] = zeros(d);
  return p;
}

bool is_trainable(const std::string& name) {
  return name.find("norm") == std::string::npos;
}

Tensor transpose2d(const Tensor& t) {
  if (t.shape.rank() != 2) throw Error(ErrorCode::ShapeMismatch, "transpose2d needs a matrix");
  const int64_t a = t.shape[0], b = t.shape[1];
  Tensor out(Shape{b, a});
  for (int64_t i = 0; i < a; ++i)
    for (int64_t j = 0; j < b; ++j) out.data[j * a + i] = t.data[i * b + j];
  return out;
}

TensorMap device_weights(const Graph& graph, const TensorMap& params) {
  TensorMap out;
  for (const auto& [name, spec] : graph.weight_specs()) {
    if (!spec.fixed.empty()) {
      out[name] = Tensor(spec.shape, spec.fixed);
      continue;
    }
    Tensor src;
    if (auto it = params.find(name); it != params.end()) {
      src = it->second;
    } else if (name.size() > 2 && name.compare(name.size() - 2, 2, "_t") == 0 &&
               params.count(name.substr(0, name.size() - 2))) {
      src = transpose2d(params.at(name.substr(0, name.size() - 2)));
    } else {
      throw Error(ErrorCode::MissingWeight, "no parameter for device weight '" + name + "'");
    }
    if (src.numel() != spec.shape.numel())
      throw Error(ErrorCode::ShapeMismatch, "parameter '" + name + "' has " +
                                                std::to_string(src.numel()) + " elements, kernel expects " +
                                                spec.shape.str());
    src.shape = spec.shape;
    out[name] = std::move(src);
  }
  return out;
}

std::string synthetic_corpus(uint64_t seed, size_t bytes) {
  static const char* kWords[] = {
      "the",   "a",     "neural", "engine", "runs",  "fast",  "slow",   "model", "weights",
      "are",   "baked", "into",   "every",  "graph", "we",    "train",  "on",    "device",
      "with",  "small", "steps",  "loss",   "falls", "and",   "rises",  "when",  "tensors",
      "flow",  "from",  "host",   "to",     "chip",  "cache", "reload", "patch", "file"};
  constexpr int kCount = static_cast<int>(sizeof(kWords) / sizeof(kWords[0]));
  std::mt19937_64 rng(splitmix64(seed ^ 0xC0C0ull));
  // Each word prefers three successors, which gives the text learnable
  // structure.
  std::vector<std::array<int, 3>> next(kCount);
  for (auto& n : next)
    for (int& v : n) v = static_cast<int>(rng() % kCount);
  std::string out;
  out.reserve(bytes + 16);
  int w = 0;
  while (out.size() < bytes) {
    out += kWords[w];
    out += (rng() % 9 == 0) ? ". " : " ";
    w = (rng() % 8 == 0) ? static_cast<int>(rng() % kCount) : next[w][rng() % 3];
  }
  out.resize(bytes);
  return out;
}

Batch make_batch(const std::string& corpus, uint64_t seed, int64_t step, int micro, int64_t seq) {
  if (static_cast<int64_t>(corpus.size()) < seq + 2)
    throw Error(ErrorCode::ConfigInvalid, "corpus shorter than one training window");
  uint64_t h = splitmix64(seed ^ splitmix64(static_cast<uint64_t>(step) * 1315423911ull +
                                            static_cast<uint64_t>(micro)));
  size_t span = corpus.size() - static_cast<size_t>(seq) - 1;
  size_t off = static_cast<size_t>(h % span);
  Batch b;
  for (int64_t s = 0; s < seq; ++s) {
    b.tokens.push_back(static_cast<unsigned char>(corpus[off + s]));
    b.targets.push_back(static_cast<unsigned char>(corpus[off + s + 1]));
  }
  return b;
}

Tensor embed_tokens(const Tensor& embed, const std::vector<int>& tokens, int64_t seq,
                    const Tensor* wpe, int64_t position_offset) {
  const int64_t d = embed.shape[1];
  Tensor x(device_shape(d, seq));
  for (size_t s = 0; s < tokens.size() && static_cast<int64_t>(s) < seq; ++s) {
    const int64_t tok = tokens[s];
    for (int64_t c = 0; c < d; ++c) {
      float v = embed.data[tok * d + c];
      if (wpe) v += wpe->data[(position_offset + static_cast<int64_t>(s)) * d + c];
      x.data[c * seq + static_cast<int64_t>(s)] = v;
    }
  }
  return x;
}

}  // namespace forge
