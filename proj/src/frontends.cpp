// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/frontends.hpp"

#include <cmath>
#include <set>

#include "forge/blobfile.hpp"
#include "forge/error.hpp"
#include "forge/numerics.hpp"

namespace forge {

ModelConfig gpt2_toy_config() {
  ModelConfig c;
  c.norm = NormKind::layernorm;
  c.activation = Activation::gelu_tanh;
  c.bias = true;
  return c;
}

ModelConfig llama_toy_config() { return ModelConfig{}; }

void ModelConfig::validate() const {
  auto bad = [](const std::string& msg) { throw Error(ErrorCode::ConfigInvalid, msg); };
  if (d_model <= 0 || n_heads <= 0 || n_layers <= 0 || d_ff <= 0 || vocab_size <= 0 || max_seq <= 0)
    bad("model dimensions must be positive");
  if (d_model % n_heads != 0) bad("d_model must be divisible by n_heads");
}

const std::vector<std::string>& frontend_kinds() {
  static const std::vector<std::string> kinds = {
      "prefill_attn", "prefill_ffn", "decode_proj", "decode_ffn",  "final_ln",
      "fwd_attn",     "fwd_ffn",     "ffn_bwd",     "sdpa_bwd1",   "sdpa_bwd2",
      "qkv_bwd",      "classifier_fwd", "vocab_softmax"};
  return kinds;
}

std::string weight_name(int layer, const std::string& base) {
  return layer < 0 ? base : "l" + std::to_string(layer) + "." + base;
}

std::vector<float> causal_mask_values(int64_t seq) {
  std::vector<float> m(static_cast<size_t>(seq * seq), 0.0f);
  for (int64_t i = 0; i < seq; ++i)
    for (int64_t j = i + 1; j < seq; ++j) m[i * seq + j] = -kFp16Max;
  return m;
}

namespace {

struct AttnOut {
  Edge ao;
  Edge p;
};

class Fb {
 public:
  Fb(const ModelConfig& c, const FrontendOptions& o) : c_(c), o_(o) {}

  GraphBuilder b;

  int64_t d() const { return c_.d_model; }
  int64_t s() const { return o_.seq; }
  Shape act(int64_t channels) const { return device_shape(channels, o_.seq); }
  std::string wn(const std::string& base) const { return weight_name(o_.layer, base); }

  Edge maybe_clamp(Edge x) { return o_.clamp ? b.clamp(x, -kFp16Max, kFp16Max) : x; }

  Edge vec(const std::string& name, int64_t n) { return b.weight(wn(name), Shape{1, n, 1, 1}); }

  Edge linear(Edge x, const std::string& name, int64_t cout, int64_t cin, bool bias) {
    Edge y = b.conv(x, b.weight(wn(name), Shape{cout, cin, 1, 1}));
    if (bias) y = b.add(y, vec(name + "_b", cout));
    return y;
  }

  Edge norm(Edge x, const std::string& name) {
    x = maybe_clamp(x);
    Edge eps = b.scalar(kNormEps);
    if (c_.norm == NormKind::rmsnorm) {
      Edge r = b.rsqrt(b.add(b.reduce_mean(b.mul(x, x), 1), eps));
      return b.mul(b.mul(x, r), vec(name, d()));
    }
    Edge xc = b.sub(x, b.reduce_mean(x, 1));
    Edge r = b.rsqrt(b.add(b.reduce_mean(b.mul(xc, xc), 1), eps));
    return b.add(b.mul(b.mul(xc, r), vec(name, d())), vec(name + "_b", d()));
  }

  // Gradient of rmsnorm(x) * g with respect to x, given the gradient of its
  // output.
  Edge rms_backward(Edge x, Edge dy, const std::string& name) {
    x = maybe_clamp(x);
    Edge u = b.mul(dy, vec(name, d()));
    Edge r = b.rsqrt(b.add(b.reduce_mean(b.mul(x, x), 1), b.scalar(kNormEps)));
    Edge m = b.reduce_mean(b.mul(u, x), 1);
    Edge r3 = b.mul(b.mul(r, r), r);
    return b.sub(b.mul(u, r), b.mul(x, b.mul(m, r3)));
  }

  Edge heads(Edge x) { return b.reshape(x, Shape{1, c_.n_heads, c_.head_dim(), s()}); }
  Edge merge(Edge x) { return b.reshape(x, act(d())); }
  Edge attn_scale() { return b.scalar(1.0 / std::sqrt(static_cast<double>(c_.head_dim()))); }

  AttnOut attention(Edge q, Edge k, Edge v) {
    Edge scores = b.mul(b.matmul(heads(q), heads(k), true, false), attn_scale());
    if (o_.mask == MaskMode::additive)
      scores = b.add(scores, b.weight(wn("mask"), Shape{1, 1, s(), s()}, DType::fp16,
                                      causal_mask_values(s())));
    scores = maybe_clamp(scores);
    AttrMap attrs{{"axis", int64_t{3}}};
    if (o_.mask == MaskMode::attribute) attrs["causal"] = int64_t{1};
    Edge p = b.op(OpKind::softmax, {scores}, attrs);
    Edge ao = merge(b.matmul(heads(v), p, false, true));
    return {ao, p};
  }

  // 0.5x(1 + tanh[sqrt(2/pi)(x + 0.044715x^3)])
  Edge gelu(Edge x) {
    Edge inner = b.add(x, b.mul(b.pow(x, 3.0), b.scalar(0.044715)));
    Edge t = b.tanh(b.mul(inner, b.scalar(std::sqrt(2.0 / M_PI))));
    return b.mul(b.mul(x, b.scalar(0.5)), b.add(t, b.scalar(1.0)));
  }

  struct FfnOut {
    Edge o;
    std::vector<std::pair<std::string, Edge>> saved;
  };

  FfnOut ffn(Edge xn) {
    if (c_.activation == Activation::swiglu) {
      Edge h1 = linear(xn, "w1", c_.d_ff, d(), c_.bias);
      Edge h3 = linear(xn, "w3", c_.d_ff, d(), c_.bias);
      Edge g = b.mul(b.mul(h1, b.sigmoid(h1)), h3);
      return {linear(g, "w2", d(), c_.d_ff, c_.bias), {{"h1", h1}, {"h3", h3}, {"g", g}}};
    }
    Edge h = linear(xn, "w_fc", c_.d_ff, d(), c_.bias);
    Edge g = gelu(h);
    return {linear(g, "w_proj", d(), c_.d_ff, c_.bias), {{"h", h}, {"g", g}}};
  }

  // Projection with an optional low-rank adapter bound through inputs.
  Edge adapted(Edge x, const std::string& name, Edge a, Edge bmat, Edge alpha) {
    Edge base = linear(x, name, d(), d(), c_.bias);
    Edge xr = b.reshape(x, Shape{1, 1, d(), s()});
    Edge t = b.matmul(a, xr, true, false);
    Edge u = b.mul(b.matmul(bmat, t, true, false), alpha);
    return b.add(base, b.reshape(u, act(d())));
  }

 private:
  const ModelConfig& c_;
  const FrontendOptions& o_;
};

void require_training_config(const ModelConfig& c, const std::string& kind) {
  if (c.norm != NormKind::rmsnorm || c.activation != Activation::swiglu || c.bias)
    throw Error(ErrorCode::ConfigInvalid,
                kind + " is defined for the RMSNorm/SwiGLU bias-free configuration");
}

}  // namespace

Graph build_frontend(const std::string& kind, const ModelConfig& config,
                     const FrontendOptions& options) {
  config.validate();
  if (options.seq <= 0) throw Error(ErrorCode::ConfigInvalid, "sequence length must be positive");
  Fb f(config, options);
  GraphBuilder& b = f.b;
  const int64_t d = config.d_model;
  const int64_t h = config.n_heads;
  const int64_t S = options.seq;

  if (kind == "fwd_attn" || kind == "prefill_attn") {
    Edge x = b.input("x", f.act(d));
    Edge xn = f.norm(x, "attn_norm");
    Edge q = f.linear(xn, "wq", d, d, config.bias);
    Edge k = f.linear(xn, "wk", d, d, config.bias);
    Edge v = f.linear(xn, "wv", d, d, config.bias);
    AttnOut a = f.attention(q, k, v);
    Edge y = b.add(x, f.linear(a.ao, "wo", d, d, config.bias));
    b.output("y", y);
    b.output("k", k);
    b.output("v", v);
    if (kind == "fwd_attn") {
      b.output("xn", xn);
      b.output("q", q);
      b.output("ao", a.ao);
      b.output("p", a.p);
    }
  } else if (kind == "fwd_ffn" || kind == "prefill_ffn") {
    Edge x = b.input("x", f.act(d));
    Edge xn = f.norm(x, "ffn_norm");
    auto ffn = f.ffn(xn);
    b.output("y", b.add(x, ffn.o));
    if (kind == "fwd_ffn") {
      b.output("xn", xn);
      for (const auto& [name, e] : ffn.saved) b.output(name, e);
    }
  } else if (kind == "decode_proj") {
    Edge x = b.input("x", f.act(d));
    Edge xn = f.norm(x, "attn_norm");
    b.output("q", f.linear(xn, "wq", d, d, config.bias));
    b.output("k", f.linear(xn, "wk", d, d, config.bias));
    b.output("v", f.linear(xn, "wv", d, d, config.bias));
  } else if (kind == "decode_ffn") {
    Edge a = b.input("a", f.act(d));
    Edge x = b.input("x", f.act(d));
    Edge hres = b.add(x, f.linear(a, "wo", d, d, config.bias));
    auto ffn = f.ffn(f.norm(hres, "ffn_norm"));
    b.output("y", b.add(hres, ffn.o));
  } else if (kind == "final_ln") {
    FrontendOptions o = options;
    o.layer = -1;
    Fb g(config, o);
    Edge x = g.b.input("x", g.act(d));
    g.b.output("y", g.norm(x, "final_norm"));
    return g.b.take();
  } else if (kind == "vocab_softmax") {
    Edge logits = b.input("logits", f.act(config.vocab_size));
    b.output("probs", b.softmax(f.maybe_clamp(logits), 1));
  } else if (kind == "classifier_fwd") {
    if (config.vocab_size > config.channel_limit)
      throw Error(ErrorCode::ConfigInvalid,
                  "vocabulary of " + std::to_string(config.vocab_size) +
                      " exceeds the device channel limit; run the classifier on the host",
                  16);
    FrontendOptions o = options;
    o.layer = -1;
    Fb g(config, o);
    Edge x = g.b.input("x", g.act(d));
    Edge xf = g.norm(x, "final_norm");
    g.b.output("logits", g.linear(xf, "wcls", config.vocab_size, d, false));
    g.b.output("xf", xf);
    return g.b.take();
  } else if (kind == "ffn_bwd") {
    require_training_config(config, kind);
    Edge dy = b.input("dy", f.act(d));
    Edge h1 = b.input("h1", f.act(config.d_ff));
    Edge h3 = b.input("h3", f.act(config.d_ff));
    Edge x = b.input("x", f.act(d));
    Edge dg = f.linear(dy, "w2_t", config.d_ff, d, false);
    Edge sg = b.sigmoid(h1);
    Edge one = b.scalar(1.0);
    Edge dh3 = b.mul(dg, b.mul(h1, sg));
    Edge dh1 = b.mul(b.mul(dg, h3), b.mul(sg, b.add(one, b.mul(h1, b.sub(one, sg)))));
    Edge dxn = b.add(f.linear(dh1, "w1_t", d, config.d_ff, false),
                     f.linear(dh3, "w3_t", d, config.d_ff, false));
    b.output("dx", b.add(dy, f.rms_backward(x, dxn, "ffn_norm")));
    b.output("dh1", dh1);
    b.output("dh3", dh3);
  } else if (kind == "sdpa_bwd1") {
    require_training_config(config, kind);
    Edge dy = b.input("dy", f.act(d));
    Edge p = b.input("p", Shape{1, h, S, S});
    Edge v = b.input("v", f.act(d));
    Edge da = f.heads(f.linear(dy, "wo_t", d, d, false));
    b.output("dv", f.merge(b.matmul(da, p)));
    b.output("dp", b.matmul(da, f.heads(v), true, false));
  } else if (kind == "sdpa_bwd2") {
    require_training_config(config, kind);
    Edge dp = b.input("dp", Shape{1, h, S, S});
    Edge k = b.input("k", f.act(d));
    Edge p = b.input("p", Shape{1, h, S, S});
    Edge q = b.input("q", f.act(d));
    Edge t = b.reduce_sum(b.mul(dp, p), 3);
    Edge ds = b.mul(b.mul(p, b.sub(dp, t)), f.attn_scale());
    b.output("dq", f.merge(b.matmul(f.heads(k), ds, false, true)));
    b.output("dk", f.merge(b.matmul(f.heads(q), ds)));
  } else if (kind == "qkv_bwd") {
    require_training_config(config, kind);
    Edge dk = b.input("dk", f.act(d));
    Edge dq = b.input("dq", f.act(d));
    Edge dv = b.input("dv", f.act(d));
    Edge dy = b.input("dy", f.act(d));
    Edge x = b.input("x", f.act(d));
    Edge dxn = b.add(b.add(f.linear(dq, "wq_t", d, d, false), f.linear(dk, "wk_t", d, d, false)),
                     f.linear(dv, "wv_t", d, d, false));
    b.output("dx", b.add(dy, f.rms_backward(x, dxn, "attn_norm")));
  } else {
    throw Error(ErrorCode::UnsupportedKind, "unknown frontend '" + kind + "'");
  }
  return b.take();
}

std::vector<std::string> lora_adapter_inputs(bool attention) {
  if (!attention) return {"a0_A", "a1_B"};
  return {"a0_qA", "a1_qB", "a2_kA", "a3_kB", "a4_vA", "a5_vB", "a6_oA", "a7_oB"};
}

namespace {

void check_rank(const ModelConfig& c, int64_t rank) {
  if (rank <= 0 || rank >= c.d_model)
    throw Error(ErrorCode::ConfigInvalid, "adapter rank must satisfy 0 < r < d_model");
}

}  // namespace

Graph build_lora_linear(const ModelConfig& config, int64_t rank, double alpha,
                        const FrontendOptions& options) {
  config.validate();
  check_rank(config, rank);
  Fb f(config, options);
  const int64_t d = config.d_model;
  Edge x = f.b.input("x", f.act(d));
  Edge a = f.b.input("a0_A", Shape{1, 1, d, rank}, DType::fp16, true);
  Edge bm = f.b.input("a1_B", Shape{1, 1, rank, d}, DType::fp16, true);
  f.b.output("y", f.adapted(x, "w_base", a, bm, f.b.scalar(alpha)));
  return f.b.take();
}

Graph build_lora_attention(const ModelConfig& config, int64_t rank, double alpha,
                           const FrontendOptions& options) {
  config.validate();
  check_rank(config, rank);
  Fb f(config, options);
  GraphBuilder& b = f.b;
  const int64_t d = config.d_model;
  Edge x = b.input("x", f.act(d));
  std::vector<Edge> ad;
  for (const std::string& name : lora_adapter_inputs(true)) {
    bool is_a = name.back() == 'A';
    ad.push_back(b.input(name, is_a ? Shape{1, 1, d, rank} : Shape{1, 1, rank, d}, DType::fp16, true));
  }
  Edge alpha_c = b.scalar(alpha);
  Edge xn = f.norm(x, "attn_norm");
  Edge q = f.adapted(xn, "wq", ad[0], ad[1], alpha_c);
  Edge k = f.adapted(xn, "wk", ad[2], ad[3], alpha_c);
  Edge v = f.adapted(xn, "wv", ad[4], ad[5], alpha_c);
  AttnOut a = f.attention(q, k, v);
  b.output("y", b.add(x, f.adapted(a.ao, "wo", ad[6], ad[7], alpha_c)));
  return b.take();
}

void save_adapter(const LoraAdapter& adapter, const std::string& path) {
  TensorMap entries = adapter.matrices;
  entries["alpha"] = Tensor(Shape{1}, {static_cast<float>(adapter.alpha)});
  entries["rank"] = Tensor(Shape{1}, {static_cast<float>(adapter.rank)});
  write_blobfile(entries, path, {"alpha", "rank"});
}

LoraAdapter load_adapter(const std::string& path) {
  TensorMap entries = read_blobfile(path);
  LoraAdapter a;
  auto it = entries.find("alpha");
  if (it == entries.end()) throw Error(ErrorCode::MissingWeight, path + ": adapter has no alpha entry");
  a.alpha = it->second.data.at(0);
  entries.erase(it);
  if (auto r = entries.find("rank"); r != entries.end()) {
    a.rank = static_cast<int64_t>(r->second.data.at(0));
    entries.erase(r);
  }
  a.matrices = std::move(entries);
  for (const auto& [name, t] : a.matrices) {
    (void)t;
    if (name.empty() || name[0] != 'a')
      throw Error(ErrorCode::MissingWeight, path + ": unexpected adapter entry '" + name + "'");
  }
  return a;
}

}  // namespace forge
