// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/train.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <sstream>

#include "forge/blobfile.hpp"
#include "forge/delta_reload.hpp"
#include "forge/error.hpp"
#include "forge/mil_codegen.hpp"
#include "forge/model.hpp"
#include "forge/numerics.hpp"
#include "forge/opt_passes.hpp"
#include "text_util.hpp"

namespace fs = std::filesystem;

namespace forge {

const char* regime_name(Regime regime) {
  return regime == Regime::full_recompile_v1 ? "full_recompile_v1" : "delta_reload_v2";
}

std::optional<Regime> parse_regime(const std::string& text) {
  if (text == "v1" || text == "full_recompile_v1") return Regime::full_recompile_v1;
  if (text == "v2" || text == "delta_reload_v2") return Regime::delta_reload_v2;
  return std::nullopt;
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  if (apply_model_key(model, key, value)) return;
  if (key == "seq") seq = parse_int(key, value);
  else if (key == "grad_accum") grad_accum = static_cast<int>(parse_int(key, value));
  else if (key == "lr") lr = static_cast<float>(parse_double(key, value));
  else if (key == "beta1") beta1 = static_cast<float>(parse_double(key, value));
  else if (key == "beta2") beta2 = static_cast<float>(parse_double(key, value));
  else if (key == "eps") eps = static_cast<float>(parse_double(key, value));
  else if (key == "seed") seed = static_cast<uint64_t>(parse_int(key, value));
  else if (key == "regime") {
    auto r = parse_regime(value);
    if (!r) throw Error(ErrorCode::ConfigInvalid, "'regime': expected v1 or v2, got '" + value + "'");
    regime = *r;
  } else if (key == "fix_deferred_compile") fixes.deferred_compile = parse_bool(key, value);
  else if (key == "fix_clamp") fixes.clamp = parse_bool(key, value);
  else if (key == "fix_sanitize") fixes.sanitize = parse_bool(key, value);
  else if (key == "fixes") {
    bool on = parse_bool(key, value);
    fixes = NumericFixes{on, on, on};
  } else if (key == "inject_step") inject_step = parse_int(key, value);
  else if (key == "inject_scale") inject_scale = parse_double(key, value);
  else if (key == "data_order") {
    if (value == "shuffled") data_order = DataOrder::shuffled;
    else if (value == "fixed") data_order = DataOrder::fixed;
    else throw Error(ErrorCode::ConfigInvalid, "'data_order': expected shuffled or fixed");
  } else if (key == "strict") strict = parse_bool(key, value);
  else if (key == "compile_limit") compile_limit = static_cast<int>(parse_int(key, value));
  else if (key == "corpus_bytes") corpus_bytes = parse_int(key, value);
  else throw Error(ErrorCode::ConfigInvalid, "unknown training key '" + key + "'");
}

void TrainConfig::apply(const KeyValues& values) {
  for (const auto& [k, v] : values) set(k, v);
}

void TrainConfig::validate() const {
  model.validate();
  auto bad = [](const std::string& m) { throw Error(ErrorCode::ConfigInvalid, m); };
  if (model.norm != NormKind::rmsnorm || model.activation != Activation::swiglu || model.bias)
    bad("training uses the RMSNorm/SwiGLU bias-free configuration");
  if (seq < 16) bad("seq must be >= 16 (minimum device surface)");
  if (grad_accum < 1) bad("grad_accum must be >= 1");
  if (!(lr >= 0.0f)) bad("lr must be non-negative");
  if (corpus_bytes < seq + 2) bad("corpus_bytes too small for one window");
  if (compile_limit < 1) bad("compile_limit must be positive");
}

struct TrainKernel {
  std::string kind;
  int layer = 0;
  bool weight_bearing = true;
  Graph graph;
  MilProgram mil;
  ProgramPtr program;
};

namespace {

const char* kLayerKinds[] = {"fwd_attn", "fwd_ffn", "ffn_bwd", "sdpa_bwd1", "sdpa_bwd2", "qkv_bwd"};

// g[i, j] += sum_s dy[i, s] * x[j, s] for device-layout activations.
void accumulate_outer(Tensor& g, const Tensor& dy, const Tensor& x, int64_t seq) {
  const int64_t a = g.shape[0], b = g.shape[1];
  for (int64_t i = 0; i < a; ++i) {
    const float* dyr = &dy.data[i * seq];
    for (int64_t j = 0; j < b; ++j) {
      const float* xr = &x.data[j * seq];
      float acc = 0.0f;
      for (int64_t s = 0; s < seq; ++s) acc += dyr[s] * xr[s];
      g.data[i * b + j] += acc;
    }
  }
}

// Gradient of rmsnorm(x) * gamma with respect to x, in fp32 on the host.
Tensor rms_backward_host(const Tensor& x_in, const Tensor& dy, const Tensor& gamma, int64_t seq,
                         bool clamp) {
  const int64_t d = gamma.numel();
  Tensor x = clamp ? clamp_fp16(x_in) : x_in;
  Tensor dx(x.shape);
  for (int64_t s = 0; s < seq; ++s) {
    float ms = 0.0f, mux = 0.0f;
    for (int64_t c = 0; c < d; ++c) ms += x.data[c * seq + s] * x.data[c * seq + s];
    ms /= static_cast<float>(d);
    const float r = 1.0f / std::sqrt(ms + static_cast<float>(kNormEps));
    for (int64_t c = 0; c < d; ++c) mux += dy.data[c * seq + s] * gamma.data[c] * x.data[c * seq + s];
    mux /= static_cast<float>(d);
    for (int64_t c = 0; c < d; ++c) {
      const float u = dy.data[c * seq + s] * gamma.data[c];
      dx.data[c * seq + s] = u * r - x.data[c * seq + s] * mux * r * r * r;
    }
  }
  return dx;
}

bool all_finite(const Tensor& t) {
  for (float v : t.data)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace

Trainer::Trainer(TrainConfig config, ResumeTag) : config_(std::move(config)) {
  config_.validate();
  corpus_ = synthetic_corpus(config_.seed, static_cast<size_t>(config_.corpus_bytes));
  ctx_ = std::make_unique<DeviceContext>(CostModel::from_env());
  ctx_->compile_limit = config_.compile_limit;
  ctx_->strict_mode = config_.strict;
  build_kernels();
}

Trainer::Trainer(TrainConfig config) : Trainer(std::move(config), ResumeTag{}) {
  state_.params = init_llama_params(config_.model, config_.seed);
  compile_all();
}

Trainer::~Trainer() = default;

std::unique_ptr<Trainer> Trainer::resume(TrainConfig config, const std::string& checkpoint_dir) {
  TrainState loaded;
  load_checkpoint(checkpoint_dir, loaded, config);
  std::unique_ptr<Trainer> t(new Trainer(std::move(config), ResumeTag{}));
  if (t->config_.fixes.deferred_compile) {
    t->state_ = std::move(loaded);
    t->compile_all();
  } else {
    // Programs built before the checkpoint is read bake the fresh-init
    // weights; the host state then moves on without them.
    t->state_.params = init_llama_params(t->config_.model, t->config_.seed);
    t->compile_all();
    t->state_ = std::move(loaded);
  }
  return t;
}

void Trainer::build_kernels() {
  FrontendOptions opts;
  opts.seq = config_.seq;
  opts.clamp = config_.fixes.clamp;
  auto add = [&](const std::string& kind, int layer, bool weight_bearing) {
    auto k = std::make_unique<TrainKernel>();
    k->kind = kind;
    k->layer = layer;
    k->weight_bearing = weight_bearing;
    FrontendOptions o = opts;
    o.layer = layer < 0 ? 0 : layer;
    k->graph = run_pipeline(build_frontend(kind, config_.model, o)).graph;
    k->mil = emit_mil(k->graph);
    kernels_.push_back(std::move(k));
  };
  for (int l = 0; l < config_.model.n_layers; ++l)
    for (const char* kind : kLayerKinds) add(kind, l, std::string(kind) != "sdpa_bwd2");
  add("classifier_fwd", -1, true);
}

int Trainer::weight_bearing_kernels() const {
  int n = 0;
  for (const auto& k : kernels_) n += k->weight_bearing ? 1 : 0;
  return n;
}

int Trainer::static_kernels() const { return static_cast<int>(kernels_.size()) - weight_bearing_kernels(); }

void Trainer::compile_all() {
  for (auto& k : kernels_) {
    k->program.reset();
    TensorMap w = device_weights(k->graph, state_.params);
    k->program = compile(*ctx_, k->mil, &w);
  }
}

double Trainer::refresh() {
  SimLedger before = ctx_->ledger();
  if (config_.regime == Regime::delta_reload_v2) {
    for (auto& k : kernels_) {
      if (!k->weight_bearing) continue;
      ReloadPlan plan;
      plan.program = k->program.get();
      plan.patches = device_weights(k->graph, state_.params);
      reload_weights(*ctx_, plan);
    }
    SimLedger after = ctx_->ledger();
    return after.reload_ms - before.reload_ms;
  }
  const int needed = weight_bearing_kernels();
  if (ctx_->compile_count + needed > ctx_->compile_limit) {
    // exec() restart: a fresh context resets the per-process compile count.
    for (auto& k : kernels_) k->program.reset();
    ctx_ = std::make_unique<DeviceContext>(ctx_->cost);
    ctx_->compile_limit = config_.compile_limit;
    ctx_->strict_mode = config_.strict;
    ctx_->charge(&SimLedger::restart_ms, ctx_->cost.exec_restart_ms, "exec restart");
    ctx_->count(&SimLedger::restarts);
    restart_ms_pending_ += ctx_->cost.exec_restart_ms;
    compile_all();
    return ctx_->ledger().compile_ms;
  }
  for (auto& k : kernels_) {
    if (!k->weight_bearing) continue;
    // Drop the old program first so the new one owns the shared tmp dir.
    k->program.reset();
    TensorMap w = device_weights(k->graph, state_.params);
    k->program = compile(*ctx_, k->mil, &w);
  }
  return ctx_->ledger().compile_ms - before.compile_ms;
}

TensorMap Trainer::run(TrainKernel& k, const TensorMap& inputs) {
  return run_program(*ctx_, *k.program, inputs);
}

StepResult Trainer::step() {
  const int64_t S = config_.seq;
  const int64_t d = config_.model.d_model;
  const int64_t V = config_.model.vocab_size;
  const int L = static_cast<int>(config_.model.n_layers);
  const int64_t step_no = state_.step + 1;
  const int64_t data_step = config_.data_order == DataOrder::fixed ? 0 : state_.step;
  const SimLedger start = ctx_->ledger();
  restart_ms_pending_ = 0.0;

  auto kernel = [&](const std::string& kind, int layer) -> TrainKernel& {
    for (auto& k : kernels_)
      if (k->kind == kind && (k->layer == layer || kind == "classifier_fwd")) return *k;
    throw Error(ErrorCode::UnsupportedKind, "no kernel " + kind);
  };

  TensorMap grads;
  for (const auto& [name, p] : state_.params)
    if (is_trainable(name)) grads[name] = Tensor(p.shape, 0.0f);

  double loss_sum = 0.0;
  for (int micro = 0; micro < config_.grad_accum; ++micro) {
    Batch batch = make_batch(corpus_, config_.seed, data_step, micro, S);
    Tensor x = embed_tokens(state_.params.at("embed"), batch.tokens, S);
    if (config_.inject_step == step_no)
      for (float& v : x.data) v = static_cast<float>(v * config_.inject_scale);

    // Forward on the device.
    std::vector<Tensor> layer_in, ffn_in;
    std::vector<TensorMap> attn_out, ffn_out;
    for (int l = 0; l < L; ++l) {
      layer_in.push_back(x);
      attn_out.push_back(run(kernel("fwd_attn", l), {{"x", x}}));
      ffn_in.push_back(attn_out.back().at("y"));
      ffn_out.push_back(run(kernel("fwd_ffn", l), {{"x", ffn_in.back()}}));
      x = ffn_out.back().at("y");
    }
    TensorMap cls = run(kernel("classifier_fwd", -1), {{"x", x}});
    const Tensor& logits = cls.at("logits");
    const Tensor& xf = cls.at("xf");

    // Loss and dlogits on the host; the vocabulary gather is not a device op.
    Tensor dlogits(logits.shape);
    double micro_loss = 0.0;
    for (int64_t s = 0; s < S; ++s) {
      double mx = -INFINITY;
      for (int64_t v = 0; v < V; ++v) mx = std::max(mx, static_cast<double>(logits.data[v * S + s]));
      double sum = 0.0;
      for (int64_t v = 0; v < V; ++v) sum += std::exp(logits.data[v * S + s] - mx);
      const int tgt = batch.targets[s];
      micro_loss += mx + std::log(sum) - logits.data[tgt * S + s];
      for (int64_t v = 0; v < V; ++v) {
        double p = std::exp(logits.data[v * S + s] - mx) / sum;
        dlogits.data[v * S + s] = static_cast<float>(p - (v == tgt ? 1.0 : 0.0));
      }
    }
    micro_loss /= static_cast<double>(S);
    if (!std::isfinite(micro_loss) || !all_finite(logits))
      throw Error(ErrorCode::NanDetected,
                  "non-finite loss at step " + std::to_string(step_no) + " (micro-batch " +
                      std::to_string(micro) + ")");
    loss_sum += micro_loss;

    // Classifier and final norm backward on the host.
    const Tensor& wcls = state_.params.at("wcls");
    accumulate_outer(grads.at("wcls"), dlogits, xf, S);
    Tensor dxf(device_shape(d, S));
    for (int64_t v = 0; v < V; ++v)
      for (int64_t c = 0; c < d; ++c) {
        const float w = wcls.data[v * d + c];
        for (int64_t s = 0; s < S; ++s) dxf.data[c * S + s] += w * dlogits.data[v * S + s];
      }
    Tensor dx = rms_backward_host(x, dxf, state_.params.at("final_norm"), S, config_.fixes.clamp);

    // Layer backward: dx on the device, dW on the host.
    for (int l = L - 1; l >= 0; --l) {
      const TensorMap& fo = ffn_out[l];
      const TensorMap& ao = attn_out[l];
      TensorMap fb = run(kernel("ffn_bwd", l),
                         {{"dy", dx}, {"h1", fo.at("h1")}, {"h3", fo.at("h3")}, {"x", ffn_in[l]}});
      accumulate_outer(grads.at(weight_name(l, "w2")), dx, fo.at("g"), S);
      accumulate_outer(grads.at(weight_name(l, "w1")), fb.at("dh1"), fo.at("xn"), S);
      accumulate_outer(grads.at(weight_name(l, "w3")), fb.at("dh3"), fo.at("xn"), S);
      const Tensor dmid = fb.at("dx");

      TensorMap s1 = run(kernel("sdpa_bwd1", l), {{"dy", dmid}, {"p", ao.at("p")}, {"v", ao.at("v")}});
      accumulate_outer(grads.at(weight_name(l, "wo")), dmid, ao.at("ao"), S);
      TensorMap s2 = run(kernel("sdpa_bwd2", l),
                         {{"dp", s1.at("dp")}, {"k", ao.at("k")}, {"p", ao.at("p")}, {"q", ao.at("q")}});
      TensorMap qb = run(kernel("qkv_bwd", l), {{"dk", s2.at("dk")},
                                                {"dq", s2.at("dq")},
                                                {"dv", s1.at("dv")},
                                                {"dy", dmid},
                                                {"x", layer_in[l]}});
      accumulate_outer(grads.at(weight_name(l, "wq")), s2.at("dq"), ao.at("xn"), S);
      accumulate_outer(grads.at(weight_name(l, "wk")), s2.at("dk"), ao.at("xn"), S);
      accumulate_outer(grads.at(weight_name(l, "wv")), s1.at("dv"), ao.at("xn"), S);
      dx = qb.at("dx");
    }
    Tensor& gemb = grads.at("embed");
    for (int64_t s = 0; s < S; ++s)
      for (int64_t c = 0; c < d; ++c) gemb.data[batch.tokens[s] * d + c] += dx.data[c * S + s];
  }

  // Adam on the host.
  const float scale = 1.0f / static_cast<float>(S * config_.grad_accum);
  AdamState& adam = state_.adam;
  adam.t += 1;
  const float bc1 = 1.0f - std::pow(config_.beta1, static_cast<float>(adam.t));
  const float bc2 = 1.0f - std::pow(config_.beta2, static_cast<float>(adam.t));
  for (auto& [name, g] : grads) {
    Tensor& w = state_.params.at(name);
    Tensor& m = adam.m.try_emplace(name, Tensor(w.shape, 0.0f)).first->second;
    Tensor& v = adam.v.try_emplace(name, Tensor(w.shape, 0.0f)).first->second;
    for (size_t i = 0; i < g.data.size(); ++i) {
      float gi = g.data[i] * scale;
      if (config_.fixes.sanitize) gi = sanitize_value(gi);
      m.data[i] = config_.beta1 * m.data[i] + (1.0f - config_.beta1) * gi;
      v.data[i] = config_.beta2 * v.data[i] + (1.0f - config_.beta2) * gi * gi;
      const float mh = m.data[i] / bc1;
      const float vh = v.data[i] / bc2;
      w.data[i] -= config_.lr * mh / (std::sqrt(vh) + config_.eps);
    }
  }

  const SimLedger mid = ctx_->ledger();
  StepResult r;
  r.step = step_no;
  r.loss = loss_sum / config_.grad_accum;
  r.timing.compute_ms = mid.eval_ms - start.eval_ms;
  r.timing.refresh_ms = refresh();
  r.timing.restart_ms = restart_ms_pending_;
  const SimLedger end = ctx_->ledger();
  if (restart_ms_pending_ > 0.0) {
    r.compiles = end.compiles + (mid.compiles - start.compiles);
    r.reloads = 0;
  } else {
    r.compiles = end.compiles - start.compiles;
    r.reloads = end.reloads - start.reloads;
  }
  state_.step = step_no;
  state_.loss_history.push_back(r.loss);
  return r;
}

std::string Trainer::save_checkpoint(const std::string& root) const {
  fs::path dir = fs::path(root) / ("step_" + std::to_string(state_.step));
  fs::create_directories(dir);
  std::set<std::string> all;
  for (const auto& [name, t] : state_.params) all.insert(name);
  write_blobfile(state_.params, (dir / "weights.blob").string(), all);
  TensorMap adam;
  std::set<std::string> adam_names;
  for (const auto& [name, t] : state_.adam.m) adam["m." + name] = t;
  for (const auto& [name, t] : state_.adam.v) adam["v." + name] = t;
  for (const auto& [name, t] : adam) adam_names.insert(name);
  write_blobfile(adam, (dir / "adam.blob").string(), adam_names);

  std::ostringstream os;
  os << "step = " << state_.step << "\n";
  os << "seed = " << config_.seed << "\n";
  os << "data_counter = " << state_.step << "\n";
  os << "adam_t = " << state_.adam.t << "\n";
  os << "lr = " << text::format_float(config_.lr) << "\n";
  os << "beta1 = " << text::format_float(config_.beta1) << "\n";
  os << "beta2 = " << text::format_float(config_.beta2) << "\n";
  os << "eps = " << text::format_float(config_.eps) << "\n";
  os << "loss_history = ";
  for (size_t i = 0; i < state_.loss_history.size(); ++i)
    os << (i ? "," : "") << text::format_double(state_.loss_history[i]);
  os << "\n";
  std::string s = os.str();
  write_file_atomic((dir / "manifest.txt").string(), std::vector<uint8_t>(s.begin(), s.end()));
  return dir.string();
}

void load_checkpoint(const std::string& dir, TrainState& state, TrainConfig& config) {
  fs::path p(dir);
  KeyValues kv = read_key_values((p / "manifest.txt").string());
  state = TrainState{};
  for (const auto& [k, v] : kv) {
    if (k == "step") state.step = parse_int(k, v);
    else if (k == "seed") config.seed = static_cast<uint64_t>(parse_int(k, v));
    else if (k == "adam_t") state.adam.t = parse_int(k, v);
    else if (k == "lr") config.lr = std::strtof(v.c_str(), nullptr);
    else if (k == "beta1") config.beta1 = std::strtof(v.c_str(), nullptr);
    else if (k == "beta2") config.beta2 = std::strtof(v.c_str(), nullptr);
    else if (k == "eps") config.eps = std::strtof(v.c_str(), nullptr);
    else if (k == "loss_history") {
      std::stringstream ss(v);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!item.empty()) state.loss_history.push_back(parse_double(k, item));
    }
  }
  TensorMap shapes = init_llama_params(config.model, config.seed);
  TensorMap weights = read_blobfile((p / "weights.blob").string());
  for (auto& [name, t] : shapes) {
    auto it = weights.find(name);
    if (it == weights.end())
      throw Error(ErrorCode::MissingWeight, dir + ": checkpoint lacks '" + name + "'");
    if (it->second.numel() != t.numel())
      throw Error(ErrorCode::ShapeMismatch, dir + ": '" + name + "' has the wrong size");
    t.data = it->second.data;
  }
  state.params = std::move(shapes);
  TensorMap adam = read_blobfile((p / "adam.blob").string());
  for (auto& [name, t] : adam) {
    const std::string base = name.substr(2);
    auto w = state.params.find(base);
    if (w == state.params.end()) continue;
    t.shape = w->second.shape;
    (name[0] == 'm' ? state.adam.m : state.adam.v)[base] = std::move(t);
  }
}

std::string loss_csv(const std::vector<StepResult>& results) {
  std::ostringstream os;
  os << "step,loss,compute_ms,refresh_ms,total_ms\n";
  for (const StepResult& r : results)
    os << r.step << "," << text::format_double(r.loss) << "," << text::format_double(r.timing.compute_ms)
       << "," << text::format_double(r.timing.refresh_ms) << ","
       << text::format_double(r.timing.total_ms()) << "\n";
  return os.str();
}

int StressReport::monotone_chains() const {
  int n = 0;
  for (bool b : non_increasing) n += b ? 1 : 0;
  return n;
}

StressReport stress_test(const TrainConfig& config, int chains, int steps_per_chain,
                         const std::string& work_dir) {
  if (chains < 1 || steps_per_chain < 0)
    throw Error(ErrorCode::ConfigInvalid, "stress test needs chains >= 1 and steps >= 0");
  StressReport rep;
  rep.chains = chains;
  rep.steps = steps_per_chain;
  for (int c = 0; c < chains; ++c) {
    const std::string root = (fs::path(work_dir) / ("chain_" + std::to_string(c))).string();
    fs::remove_all(root);
    std::string ckpt;
    {
      Trainer init(config);
      ckpt = init.save_checkpoint(root);
    }
    std::vector<double> losses;
    for (int s = 0; s < steps_per_chain; ++s) {
      // A fresh context per step stands in for a fresh process.
      std::unique_ptr<Trainer> t = Trainer::resume(config, ckpt);
      double loss = NAN;
      try {
        loss = t->step().loss;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NanDetected) throw;
      }
      if (!std::isfinite(loss)) {
        ++rep.nan_count;
        losses.push_back(loss);
        break;
      }
      losses.push_back(loss);
      ckpt = t->save_checkpoint(root);
    }
    bool mono = true;
    for (size_t i = 1; i < losses.size(); ++i) mono = mono && losses[i] <= losses[i - 1];
    for (double l : losses) mono = mono && std::isfinite(l);
    rep.non_increasing.push_back(mono);
    rep.losses.push_back(std::move(losses));
  }
  for (int s = 0; s < steps_per_chain; ++s) {
    double sum = 0.0;
    int n = 0;
    for (const auto& l : rep.losses)
      if (s < static_cast<int>(l.size())) {
        sum += l[s];
        ++n;
      }
    double mean = n ? sum / n : NAN;
    double var = 0.0;
    for (const auto& l : rep.losses)
      if (s < static_cast<int>(l.size())) var += (l[s] - mean) * (l[s] - mean);
    rep.mean.push_back(mean);
    rep.stddev.push_back(n ? std::sqrt(var / n) : NAN);
  }
  return rep;
}

std::string format_stress_report(const StressReport& r) {
  std::ostringstream os;
  os << "chains=" << r.chains << " steps=" << r.steps << " nan=" << r.nan_count << "/"
     << r.chains * r.steps << " monotone=" << r.monotone_chains() << "/" << r.chains << "\n";
  os << "step,mean,std\n";
  for (size_t s = 0; s < r.mean.size(); ++s)
    os << s + 1 << "," << text::format_double(r.mean[s]) << "," << text::format_double(r.stddev[s])
       << "\n";
  for (size_t c = 0; c < r.losses.size(); ++c) {
    os << "chain_" << c << ":";
    for (double l : r.losses[c]) os << " " << text::format_double(l);
    os << "\n";
  }
  return os.str();
}

}  // namespace forge
