// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/infer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "forge/error.hpp"
#include "forge/mil_codegen.hpp"
#include "forge/model.hpp"
#include "forge/opt_passes.hpp"

namespace forge {

struct InferenceSession::Kernel {
  std::string kind;
  int layer = 0;
  int64_t seq = 0;
  Graph graph;
  TensorMap weights;  // fp32 host weights for the interpreter path
  ProgramPtr program;
};

void InferConfig::set(const std::string& key, const std::string& value) {
  if (apply_model_key(model, key, value)) return;
  if (key == "seed") seed = static_cast<uint64_t>(parse_int(key, value));
  else if (key == "max_new_tokens") max_new_tokens = static_cast<int>(parse_int(key, value));
  else if (key == "precision") {
    if (value == "fp16") precision = Precision::fp16;
    else if (value == "fp32") precision = Precision::fp32;
    else throw Error(ErrorCode::ConfigInvalid, "'precision': expected fp16 or fp32");
  } else if (key == "sampler") {
    if (value == "greedy") sampler.kind = SamplerKind::greedy;
    else if (value == "temperature") sampler.kind = SamplerKind::temperature;
    else if (value == "top_p") sampler.kind = SamplerKind::top_p;
    else throw Error(ErrorCode::ConfigInvalid, "'sampler': expected greedy, temperature or top_p");
  } else if (key == "temperature") sampler.temperature = static_cast<float>(parse_double(key, value));
  else if (key == "top_p") sampler.top_p = static_cast<float>(parse_double(key, value));
  else if (key == "sampler_seed") sampler.seed = static_cast<uint64_t>(parse_int(key, value));
  else throw Error(ErrorCode::ConfigInvalid, "unknown inference key '" + key + "'");
}

void InferConfig::apply(const KeyValues& values) {
  for (const auto& [k, v] : values) set(k, v);
}

const std::vector<int64_t>& prefill_buckets() {
  static const std::vector<int64_t> b = {32, 64, 128, 256, 512, 1024};
  return b;
}

int64_t prefill_bucket(int64_t prompt_len) {
  for (int64_t b : prefill_buckets())
    if (b >= prompt_len) return b;
  throw Error(ErrorCode::PromptTooLong, "prompt of " + std::to_string(prompt_len) +
                                            " tokens exceeds the largest prefill bucket (1024)");
}

std::vector<int> tokenize_bytes(const std::string& text) {
  std::vector<int> out;
  for (unsigned char c : text) out.push_back(c);
  return out;
}

std::string detokenize_bytes(const std::vector<int>& tokens) {
  std::string out;
  for (int t : tokens) out.push_back(static_cast<char>(t & 0xFF));
  return out;
}

int argmax(const std::vector<float>& logits) {
  int best = 0;
  for (size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = static_cast<int>(i);
  return best;
}

int sample(const std::vector<float>& logits, const SamplerConfig& config, std::mt19937_64& rng) {
  if (config.kind == SamplerKind::greedy) return argmax(logits);
  const double t = config.temperature > 0.0f ? config.temperature : 1.0;
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) sum += p[i] = std::exp((logits[i] - mx) / t);
  for (double& v : p) v /= sum;
  std::vector<int> order(logits.size());
  std::iota(order.begin(), order.end(), 0);
  size_t keep = order.size();
  if (config.kind == SamplerKind::top_p) {
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return p[a] > p[b]; });
    double cum = 0.0;
    for (size_t i = 0; i < order.size(); ++i) {
      cum += p[order[i]];
      if (cum >= config.top_p) {
        keep = i + 1;
        break;
      }
    }
  }
  double mass = 0.0;
  for (size_t i = 0; i < keep; ++i) mass += p[order[i]];
  double u = std::uniform_real_distribution<double>(0.0, mass)(rng);
  for (size_t i = 0; i < keep; ++i) {
    u -= p[order[i]];
    if (u <= 0.0) return order[i];
  }
  return order[keep - 1];
}

InferenceSession::InferenceSession(InferConfig config, TensorMap params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.model.validate();
  if (config_.model.norm != NormKind::layernorm || config_.model.activation != Activation::gelu_tanh ||
      !config_.model.bias)
    throw Error(ErrorCode::ConfigInvalid, "inference uses the GPT-2 configuration");
  ctx_ = std::make_unique<DeviceContext>(CostModel::from_env());
}

InferenceSession::InferenceSession(InferConfig config)
    : InferenceSession(config, init_gpt2_params(config.model, config.seed)) {}

InferenceSession::~InferenceSession() = default;

InferenceSession::Kernel& InferenceSession::kernel(const std::string& kind, int layer, int64_t seq) {
  for (auto& k : kernels_)
    if (k->kind == kind && k->layer == layer && k->seq == seq) return *k;
  auto k = std::make_unique<Kernel>();
  k->kind = kind;
  k->layer = layer;
  k->seq = seq;
  FrontendOptions o;
  o.seq = seq;
  o.layer = layer;
  k->graph = run_pipeline(build_frontend(kind, config_.model, o)).graph;
  k->weights = device_weights(k->graph, params_);
  if (config_.precision == Precision::fp16) {
    CacheKey key{"gpt2:" + kind, layer, static_cast<int>(seq), 0};
    k->program = cache_get_or_compile(*ctx_, key, emit_mil(k->graph), &k->weights);
  }
  kernels_.push_back(std::move(k));
  return *kernels_.back();
}

TensorMap InferenceSession::run(Kernel& k, const TensorMap& inputs) {
  if (config_.precision == Precision::fp16) return run_program(*ctx_, *k.program, inputs);
  return interpret_graph(k.graph, inputs, k.weights, Precision::fp32);
}

std::vector<float> InferenceSession::logits_at(const Tensor& xf, int64_t seq, int64_t col) const {
  const Tensor& e = params_.at("embed");
  const int64_t V = e.shape[0], d = e.shape[1];
  std::vector<float> out(static_cast<size_t>(V));
  for (int64_t v = 0; v < V; ++v) {
    float acc = 0.0f;
    for (int64_t c = 0; c < d; ++c) acc += e.data[v * d + c] * xf.data[c * seq + col];
    out[v] = acc;
  }
  return out;
}

InferResult InferenceSession::generate(const std::vector<int>& prompt) {
  const int64_t n = static_cast<int64_t>(prompt.size());
  if (n == 0) throw Error(ErrorCode::ConfigInvalid, "empty prompt");
  InferResult res;
  res.bucket = prefill_bucket(n);
  if (n + config_.max_new_tokens > config_.model.max_seq)
    throw Error(ErrorCode::PromptTooLong, "prompt plus " + std::to_string(config_.max_new_tokens) +
                                              " new tokens exceeds max_seq " +
                                              std::to_string(config_.model.max_seq));
  for (int t : prompt)
    if (t < 0 || t >= config_.model.vocab_size)
      throw Error(ErrorCode::ConfigInvalid, "token " + std::to_string(t) + " outside the vocabulary");

  const SimLedger start = ctx_->ledger();
  const int L = static_cast<int>(config_.model.n_layers);
  const int64_t d = config_.model.d_model;
  const int64_t H = config_.model.n_heads;
  const int64_t hd = config_.model.head_dim();
  const Tensor& embed = params_.at("embed");
  const Tensor& wpe = params_.at("wpe");

  // KV cache: [layer][position * d + channel].
  std::vector<std::vector<float>> kc(L), vc(L);

  // Prefill at the bucket width; padding columns sit after the prompt and
  // the causal mask keeps them out of every real position.
  const int64_t B = res.bucket;
  Tensor x = embed_tokens(embed, prompt, B, &wpe, 0);
  for (int l = 0; l < L; ++l) {
    TensorMap a = run(kernel("prefill_attn", l, B), {{"x", x}});
    const Tensor& k = a.at("k");
    const Tensor& v = a.at("v");
    for (int64_t s = 0; s < n; ++s)
      for (int64_t c = 0; c < d; ++c) {
        kc[l].push_back(k.data[c * B + s]);
        vc[l].push_back(v.data[c * B + s]);
      }
    x = run(kernel("prefill_ffn", l, B), {{"x", a.at("y")}}).at("y");
  }
  Tensor xf = run(kernel("final_ln", -1, B), {{"x", x}}).at("y");
  std::mt19937_64 rng(config_.sampler.seed);
  int tok = sample(logits_at(xf, B, n - 1), config_.sampler, rng);
  const SimLedger after_prefill = ctx_->ledger();

  const int64_t S = kDecodeSeq;
  for (int i = 0; i < config_.max_new_tokens; ++i) {
    res.tokens.push_back(tok);
    if (i + 1 == config_.max_new_tokens) break;
    const int64_t pos = n + i;
    Tensor xd = embed_tokens(embed, {tok}, S, &wpe, pos);
    for (int l = 0; l < L; ++l) {
      TensorMap proj = run(kernel("decode_proj", l, S), {{"x", xd}});
      const Tensor& q = proj.at("q");
      for (int64_t c = 0; c < d; ++c) {
        kc[l].push_back(proj.at("k").data[c * S]);
        vc[l].push_back(proj.at("v").data[c * S]);
      }
      const int64_t T = pos + 1;
      Tensor att(device_shape(d, S));
      const float scale = 1.0f / std::sqrt(static_cast<float>(hd));
      for (int64_t h = 0; h < H; ++h) {
        std::vector<float> sc(static_cast<size_t>(T));
        float mx = -INFINITY;
        for (int64_t t = 0; t < T; ++t) {
          float acc = 0.0f;
          for (int64_t j = 0; j < hd; ++j) acc += q.data[(h * hd + j) * S] * kc[l][t * d + h * hd + j];
          sc[t] = acc * scale;
          mx = std::max(mx, sc[t]);
        }
        float sum = 0.0f;
        for (float& s : sc) sum += s = std::exp(s - mx);
        for (int64_t j = 0; j < hd; ++j) {
          float acc = 0.0f;
          for (int64_t t = 0; t < T; ++t) acc += sc[t] / sum * vc[l][t * d + h * hd + j];
          att.data[(h * hd + j) * S] = acc;
        }
      }
      xd = run(kernel("decode_ffn", l, S), {{"a", att}, {"x", xd}}).at("y");
    }
    Tensor xfd = run(kernel("final_ln", -1, S), {{"x", xd}}).at("y");
    tok = sample(logits_at(xfd, S, 0), config_.sampler, rng);
  }

  const SimLedger end = ctx_->ledger();
  res.prefill_ms = after_prefill.eval_ms - start.eval_ms;
  res.decode_ms = end.eval_ms - after_prefill.eval_ms;
  res.compile_ms = end.compile_ms - start.compile_ms;
  res.compiles = end.compiles - start.compiles;
  return res;
}

}  // namespace forge
