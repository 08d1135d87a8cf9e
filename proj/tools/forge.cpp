// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

// forge: command-line driver for the compiler, simulator and pipelines.
//
// Exit codes: 0 success, 1 other failure (or diff mismatch), 2 usage,
// 3 constraint violation, 4 I/O, 5 numerical failure.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "forge/bench.hpp"
#include "forge/blobfile.hpp"
#include "forge/config.hpp"
#include "forge/error.hpp"
#include "forge/frontends.hpp"
#include "forge/infer.hpp"
#include "forge/mil_codegen.hpp"
#include "forge/model.hpp"
#include "forge/npu_sim.hpp"
#include "forge/numerics.hpp"
#include "forge/opt_passes.hpp"
#include "forge/train.hpp"

namespace fs = std::filesystem;
using namespace forge;

namespace {

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::UsageError: return 2;
    case ErrorCode::IoFailure:
    case ErrorCode::TmpDirMissing: return 4;
    case ErrorCode::NanDetected: return 5;
    default: break;
  }
  if (e.constraint() || e.code() == ErrorCode::ConstraintViolation) return 3;
  if (e.code() == ErrorCode::ConfigInvalid || e.code() == ErrorCode::UnsupportedKind) return 2;
  return 1;
}

std::string read_text(const std::string& path) {
  std::vector<uint8_t> b = read_file(path);
  return std::string(b.begin(), b.end());
}

void write_text(const std::string& path, const std::string& text) {
  write_file_atomic(path, std::vector<uint8_t>(text.begin(), text.end()));
}

void emit_output(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") std::cout << text;
  else write_text(out, text);
}

std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

bool is_training_kind(const std::string& k) {
  return k == "fwd_attn" || k == "fwd_ffn" || k == "ffn_bwd" || k == "sdpa_bwd1" ||
         k == "sdpa_bwd2" || k == "qkv_bwd" || k == "classifier_fwd";
}

struct Common {
  std::string config;
  uint64_t seed = 42;
  bool seed_set = false;
  std::string precision = "fp16";
  std::string regime = "v2";
  bool emulate_silent = false;
  std::string out;
};

void add_common(CLI::App* app, Common& c, bool with_regime) {
  app->add_option("--config", c.config, "key=value configuration file");
  app->add_option_function<uint64_t>(
      "--seed", [&c](uint64_t s) { c.seed = s; c.seed_set = true; }, "random seed");
  app->add_option("--precision", c.precision, "fp16 (device) or fp32 (host)")
      ->check(CLI::IsMember({"fp16", "fp32"}));
  if (with_regime)
    app->add_option("--regime", c.regime, "weight refresh regime")
        ->check(CLI::IsMember({"v1", "v2", "full_recompile_v1", "delta_reload_v2"}));
  app->add_flag("--emulate-silent", c.emulate_silent,
                "over-limit compiles return a sentinel instead of failing");
  app->add_flag("--strict", [&c](int64_t) { c.emulate_silent = false; }, "fail fast (default)");
  app->add_option("--out", c.out, "output path");
}

TrainConfig train_config(const Common& c) {
  TrainConfig cfg;
  if (!c.config.empty()) cfg.apply(read_key_values(c.config));
  if (c.seed_set) cfg.seed = c.seed;
  cfg.regime = *parse_regime(c.regime);
  cfg.strict = !c.emulate_silent;
  return cfg;
}

ModelConfig model_for(const std::string& model, const std::string& kind) {
  if (model == "gpt2") return gpt2_toy_config();
  if (model == "llama") return llama_toy_config();
  return is_training_kind(kind) ? llama_toy_config() : gpt2_toy_config();
}

std::string tensor_summary(const std::string& name, const Tensor& t) {
  double sum = 0.0, abs_sum = 0.0;
  int non_finite = 0;
  for (float v : t.data) {
    if (!std::isfinite(v)) {
      ++non_finite;
      continue;
    }
    sum += v;
    abs_sum += std::fabs(v);
  }
  std::ostringstream os;
  os << name << " " << t.shape.str() << " sum=" << fmt(sum, 9) << " abs_sum=" << fmt(abs_sum, 9)
     << " non_finite=" << non_finite << " head=[";
  for (size_t i = 0; i < t.data.size() && i < 4; ++i) os << (i ? ", " : "") << fmt(t.data[i]);
  os << "]\n";
  return os.str();
}

Graph load_graph_any(const std::string& path) {
  std::string text = read_text(path);
  if (path.size() > 4 && path.compare(path.size() - 4, 4, ".mil") == 0)
    return mil_to_graph(parse_mil_text(text));
  return parse_graph(text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"forge: simulated NPU compiler and runtime"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // emit
  Common emit_c;
  std::string emit_kind, emit_model = "auto";
  int64_t emit_seq = 64;
  int emit_layer = 0;
  bool emit_no_clamp = false, emit_weights = false;
  CLI::App* emit = app.add_subcommand("emit", "build a frontend kind and print its MIL");
  emit->add_option("kind", emit_kind, "frontend kind")->required();
  emit->add_option("--model", emit_model, "gpt2, llama or auto")
      ->check(CLI::IsMember({"gpt2", "llama", "auto"}));
  emit->add_option("--seq", emit_seq, "sequence length");
  emit->add_option("--layer", emit_layer, "layer index");
  emit->add_flag("--no-clamp", emit_no_clamp, "omit fp16 range clamps");
  emit->add_flag("--with-weights", emit_weights,
                 "write seeded random weight blobs next to --out");
  add_common(emit, emit_c, false);

  // opt
  Common opt_c;
  std::string opt_in;
  CLI::App* opt = app.add_subcommand("opt", "run the optimization pipeline on a graph");
  opt->add_option("graph", opt_in, "graph text or .mil file")->required();
  add_common(opt, opt_c, false);

  // run
  Common run_c;
  std::string run_in, run_inputs;
  CLI::App* run = app.add_subcommand("run", "compile and evaluate a MIL program");
  run->add_option("program", run_in, ".mil file; weights resolve relative to it")->required();
  run->add_option("--inputs", run_inputs, "blob file with one entry per input");
  add_common(run, run_c, false);

  // train
  Common train_c;
  int train_steps = 10;
  std::string train_ckpt, train_csv;
  CLI::App* train = app.add_subcommand("train", "train the toy model");
  train->add_option("--steps", train_steps, "number of steps")->check(CLI::NonNegativeNumber);
  train->add_option("--checkpoint-dir", train_ckpt, "write a checkpoint after the last step");
  train->add_option("--csv", train_csv, "loss log path");
  add_common(train, train_c, true);

  // resume
  Common resume_c;
  int resume_steps = 10;
  std::string resume_dir, resume_ckpt, resume_csv;
  bool resume_compile_first = false;
  CLI::App* resume = app.add_subcommand("resume", "continue training from a checkpoint");
  resume->add_option("checkpoint", resume_dir, "step_<N> directory")->required();
  resume->add_option("--steps", resume_steps, "number of steps")->check(CLI::NonNegativeNumber);
  resume->add_option("--checkpoint-dir", resume_ckpt, "write a checkpoint after the last step");
  resume->add_option("--csv", resume_csv, "loss log path");
  resume->add_flag("--compile-before-load", resume_compile_first,
                   "compile programs before reading the checkpoint (stale weights)");
  add_common(resume, resume_c, true);

  // stress
  Common stress_c;
  int stress_chains = 5, stress_steps = 5;
  double stress_lr = 1e-4;
  std::string stress_work;
  CLI::App* stress = app.add_subcommand("stress", "resume-chain stability test");
  stress->add_option("--chains", stress_chains, "independent chains");
  stress->add_option("--steps", stress_steps, "steps per chain");
  stress->add_option("--lr", stress_lr, "learning rate");
  stress->add_option("--work-dir", stress_work, "checkpoint directory");
  add_common(stress, stress_c, false);

  // bench
  Common bench_c;
  std::string bench_preset = "table7";
  int bench_steps = 3, bench_kernels = -1;
  CLI::App* bench = app.add_subcommand("bench", "compare weight refresh regimes");
  bench->add_option("--preset", bench_preset, "table7, cost-model or measured")
      ->check(CLI::IsMember({"table7", "cost-model", "measured"}));
  bench->add_option("--steps", bench_steps, "steps per regime for --preset measured");
  bench->add_option("--kernels", bench_kernels, "weight-bearing kernel count");
  add_common(bench, bench_c, true);

  // blob-inspect (also "blob inspect")
  std::string inspect_path;
  CLI::App* inspect = app.add_subcommand("blob-inspect", "list the chunks of a weight file");
  inspect->add_option("file", inspect_path, "blob file")->required();
  std::string blob_inspect_path;
  CLI::App* blob = app.add_subcommand("blob", "weight file tools");
  blob->require_subcommand(1);
  CLI::App* blob_inspect = blob->add_subcommand("inspect", "list the chunks of a weight file");
  blob_inspect->add_option("file", blob_inspect_path, "blob file")->required();

  // validate
  std::string validate_path;
  int64_t validate_limit = kDefaultChannelLimit;
  CLI::App* validate = app.add_subcommand("validate", "check a program, graph or weight file");
  validate->add_option("file", validate_path, ".mil, graph text or .blob")->required();
  validate->add_option("--channel-limit", validate_limit, "conv output channel limit");

  // diff
  std::string diff_a, diff_b;
  CLI::App* diff = app.add_subcommand("diff", "compare two MIL programs up to renaming");
  diff->add_option("a", diff_a)->required();
  diff->add_option("b", diff_b)->required();

  // infer
  Common infer_c;
  std::string infer_prompt = "the neural engine runs";
  int infer_tokens = 64;
  std::string infer_sampler = "greedy";
  CLI::App* infer = app.add_subcommand("infer", "generate from the toy GPT-2 model");
  infer->add_option("--prompt", infer_prompt, "prompt text (byte tokens)");
  infer->add_option("--max-new-tokens", infer_tokens, "tokens to generate");
  infer->add_option("--sampler", infer_sampler, "greedy, temperature or top_p")
      ->check(CLI::IsMember({"greedy", "temperature", "top_p"}));
  add_common(infer, infer_c, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*emit) {
      ModelConfig mc = model_for(emit_model, emit_kind);
      if (!emit_c.config.empty())
        for (const auto& [k, v] : read_key_values(emit_c.config))
          if (!apply_model_key(mc, k, v))
            throw Error(ErrorCode::ConfigInvalid, "unknown model key '" + k + "'");
      FrontendOptions o;
      o.seq = emit_seq;
      o.layer = emit_layer;
      o.clamp = !emit_no_clamp;
      Graph g = run_pipeline(build_frontend(emit_kind, mc, o)).graph;
      MilProgram mil = emit_mil(g);
      emit_output(emit_c.out, from_bytes(mil.text_bytes));
      if (emit_weights) {
        if (emit_c.out.empty() || emit_c.out == "-")
          throw Error(ErrorCode::UsageError, "--with-weights needs --out");
        fs::path root = fs::path(emit_c.out).parent_path();
        std::mt19937_64 rng(emit_c.seed);
        for (const auto& [name, spec] : g.weight_specs()) {
          if (!spec.fixed.empty()) continue;
          std::normal_distribution<float> dist(0.0f, 0.05f);
          Tensor t(spec.shape);
          for (float& v : t.data) v = dist(rng);
          write_blobfile({{name, t}}, (root / weight_blob_path(name)).string());
        }
      }
      return 0;
    }

    if (*opt) {
      Graph g = load_graph_any(opt_in);
      PipelineResult r = run_pipeline(std::move(g));
      std::ostringstream os;
      os << "iterations=" << r.iterations << "\n";
      for (const PassReport& rep : r.reports) os << format_report(rep) << "\n";
      std::cerr << os.str();
      emit_output(opt_c.out, to_text(r.graph));
      return 0;
    }

    if (*run) {
      MilProgram mil = parse_mil(read_text(run_in));
      mil.weight_root = fs::absolute(run_in).parent_path().string();
      DeviceContext ctx;
      ctx.strict_mode = !run_c.emulate_silent;
      TensorMap none;
      ProgramPtr prog = compile(ctx, mil, &none);
      TensorMap inputs;
      if (!run_inputs.empty()) {
        inputs = read_blobfile(run_inputs);
        for (auto& [name, t] : inputs) {
          auto it = mil.param_types.find(name);
          if (it == mil.param_types.end())
            throw Error(ErrorCode::BindingMismatch, "input file has unknown entry '" + name + "'");
          t.shape = it->second.shape;
        }
      } else {
        std::mt19937_64 rng(run_c.seed);
        std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
        for (const std::string& name : mil.input_params) {
          Tensor t(mil.param_types.at(name).shape);
          for (float& v : t.data) v = round_to_f16(dist(rng));
          inputs[name] = std::move(t);
        }
      }
      TensorMap out;
      double ms = 0.0;
      if (run_c.precision == "fp32") {
        TensorMap w = prog->baked_weights;
        out = interpret_graph(prog->graph, inputs, w, Precision::fp32);
      } else {
        out = run_program(ctx, *prog, inputs, &ms);
      }
      std::ostringstream os;
      for (const auto& [name, t] : out) os << tensor_summary(name, t);
      os << "sim_ms=" << fmt(ms) << "\n";
      emit_output(run_c.out, os.str());
      return 0;
    }

    if (*train || *resume) {
      const bool is_resume = resume->parsed();
      Common& c = is_resume ? resume_c : train_c;
      TrainConfig cfg = train_config(c);
      if (is_resume && resume_compile_first) cfg.fixes.deferred_compile = false;
      const int steps = is_resume ? resume_steps : train_steps;
      if (steps == 0 && !is_resume) {
        std::cout << "step,loss,compute_ms,refresh_ms,total_ms\n";
        return 0;
      }
      std::unique_ptr<Trainer> t =
          is_resume ? Trainer::resume(cfg, resume_dir) : std::make_unique<Trainer>(cfg);
      std::vector<StepResult> results;
      int exit = 0;
      try {
        for (int i = 0; i < steps; ++i) results.push_back(t->step());
      } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        exit = exit_code_for(e);
      }
      std::string csv = loss_csv(results);
      std::cout << csv;
      const std::string& csv_path = is_resume ? resume_csv : train_csv;
      if (!csv_path.empty()) write_text(csv_path, csv);
      const std::string& ck = is_resume ? resume_ckpt : train_ckpt;
      std::string ck_root = !ck.empty() ? ck : c.out;
      if (!ck_root.empty() && exit == 0) std::cerr << "checkpoint: " << t->save_checkpoint(ck_root) << "\n";
      return exit;
    }

    if (*stress) {
      TrainConfig cfg = train_config(stress_c);
      cfg.lr = static_cast<float>(stress_lr);
      cfg.data_order = DataOrder::fixed;
      std::string work = stress_work.empty()
                             ? (fs::temp_directory_path() / "forge-stress").string()
                             : stress_work;
      StressReport r = stress_test(cfg, stress_chains, stress_steps, work);
      emit_output(stress_c.out, format_stress_report(r));
      return r.nan_count == 0 ? 0 : 5;
    }

    if (*bench) {
      BenchReport r;
      if (bench_preset == "measured") {
        r = bench_measured(train_config(bench_c), bench_steps);
      } else {
        BenchParams p = bench_preset == "table7" ? table7_params() : BenchParams{};
        if (std::getenv("FORGE_COST_MODEL")) p.cost = CostModel::from_env();
        if (bench_kernels >= 0) p.weight_bearing_kernels = bench_kernels;
        r = bench_from_params(p);
        r.source = bench_preset;
      }
      std::ostringstream os;
      os << "regime: " << regime_name(*parse_regime(bench_c.regime)) << "\n" << format_bench(r);
      emit_output(bench_c.out, os.str());
      return 0;
    }

    if (*inspect || *blob) {
      const std::string& path = inspect->parsed() ? inspect_path : blob_inspect_path;
      BlobFile f = load_blobfile(path);
      ValidationReport v = validate_weights(f);
      std::cout << "file: " << path << "\nchunks: " << f.chunks.size() << "\n";
      std::cout << "name,dtype,elements,payload_bytes,status\n";
      for (const WeightEntry& e : f.chunks) {
        bool bad = std::find(v.corrupted.begin(), v.corrupted.end(), e.name) != v.corrupted.end();
        std::cout << e.name << "," << dtype_name(e.dtype) << "," << e.element_count << ","
                  << e.payload.size() << "," << (bad ? "corrupt" : "ok") << "\n";
      }
      return v.clean() ? 0 : 5;
    }

    if (*validate) {
      if (validate_path.size() > 5 && validate_path.compare(validate_path.size() - 5, 5, ".blob") == 0) {
        ValidationReport v = validate_weights(load_blobfile(validate_path));
        for (const std::string& n : v.corrupted) std::cout << "corrupt: " << n << "\n";
        std::cout << (v.clean() ? "ok\n" : "corrupted\n");
        return v.clean() ? 0 : 5;
      }
      Graph g = load_graph_any(validate_path);
      PassOptions po;
      po.channel_limit = validate_limit;
      PassReport r = pass_constraint_validate(g, po);
      for (const Violation& v : r.violations)
        std::cout << "constraint #" << v.constraint << " (node " << v.node << "): " << v.message << "\n";
      if (!r.violations.empty()) return 3;
      std::cout << "ok\n";
      return 0;
    }

    if (*diff) {
      MilDiffReport r = mil_diff(read_text(diff_a), read_text(diff_b));
      if (r.equivalent) {
        std::cout << "equivalent\n";
        return 0;
      }
      std::cout << "differ at statement " << r.first_divergence << ": " << r.detail << "\n";
      return 1;
    }

    if (*infer) {
      InferConfig cfg;
      if (!infer_c.config.empty()) cfg.apply(read_key_values(infer_c.config));
      if (infer_c.seed_set) cfg.seed = infer_c.seed;
      cfg.max_new_tokens = infer_tokens;
      cfg.precision = infer_c.precision == "fp32" ? Precision::fp32 : Precision::fp16;
      cfg.set("sampler", infer_sampler);
      InferenceSession s(cfg);
      InferResult r = s.generate(tokenize_bytes(infer_prompt));
      std::ostringstream os;
      os << "bucket=" << r.bucket << " prefill_ms=" << fmt(r.prefill_ms) << " decode_ms=" << fmt(r.decode_ms)
         << " compiles=" << r.compiles << "\ntokens:";
      for (int t : r.tokens) os << " " << t;
      os << "\n";
      emit_output(infer_c.out, os.str());
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
