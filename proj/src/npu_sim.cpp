// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/npu_sim.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <openssl/evp.h>
#include <unistd.h>

#include "forge/blobfile.hpp"
#include "forge/error.hpp"
#include "forge/numerics.hpp"

namespace forge {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Cost model

namespace {

const std::map<std::string, double CostModel::*>& cost_fields() {
  static const std::map<std::string, double CostModel::*> fields = {
      {"mil_parse_ms_per_kernel", &CostModel::mil_parse_ms_per_kernel},
      {"compile_ms_per_kernel", &CostModel::compile_ms_per_kernel},
      {"load_ms_per_kernel", &CostModel::load_ms_per_kernel},
      {"reload_ms_per_kernel", &CostModel::reload_ms_per_kernel},
      {"dispatch_ms", &CostModel::dispatch_ms},
      {"iosurface_roundtrip_ms", &CostModel::iosurface_roundtrip_ms},
      {"exec_restart_ms", &CostModel::exec_restart_ms},
      {"conv_ms_per_gmac", &CostModel::conv_ms_per_gmac},
      {"matmul_penalty", &CostModel::matmul_penalty},
  };
  return fields;
}

}  // namespace

void CostModel::set(const std::string& key, double value) {
  auto it = cost_fields().find(key);
  if (it == cost_fields().end())
    throw Error(ErrorCode::ConfigInvalid, "unknown cost parameter '" + key + "'");
  if (!(value >= 0.0))
    throw Error(ErrorCode::ConfigInvalid, "cost parameter '" + key + "' must be nonnegative");
  this->*(it->second) = value;
}

std::map<std::string, double> CostModel::fields() const {
  std::map<std::string, double> out;
  for (const auto& [k, p] : cost_fields()) out[k] = this->*p;
  return out;
}

CostModel CostModel::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open cost model '" + path + "'");
  CostModel cm;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    auto eq = line.find('=');
    auto trim = [](std::string s) {
      size_t b = s.find_first_not_of(" \t\r");
      size_t e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    if (trim(line).empty()) continue;
    if (eq == std::string::npos)
      throw Error(ErrorCode::ConfigInvalid, path + ":" + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    char* end = nullptr;
    double v = std::strtod(val.c_str(), &end);
    if (val.empty() || *end != '\0')
      throw Error(ErrorCode::ConfigInvalid, path + ":" + std::to_string(lineno) + ": bad number '" + val + "'");
    cm.set(key, v);
  }
  return cm;
}

CostModel CostModel::from_env() {
  const char* path = std::getenv("FORGE_COST_MODEL");
  if (path == nullptr || *path == '\0') return CostModel{};
  return from_file(path);
}

// ---------------------------------------------------------------------------
// Surfaces, identity

Surface Surface::allocate(const std::string& name, const Shape& nominal, int64_t alloc_bytes) {
  Surface s;
  s.name = name;
  s.nominal_shape = nominal;
  s.alloc_bytes = alloc_bytes;
  s.data.assign(static_cast<size_t>(alloc_bytes), 0);
  return s;
}

std::string CompileOptions::canonical() const {
  return "channel_limit=" + std::to_string(channel_limit) + "\ntarget=" + target + "\n";
}

namespace {

std::array<uint8_t, 32> sha256(const void* data, size_t size) {
  std::array<uint8_t, 32> out{};
  unsigned int len = 0;
  if (EVP_Digest(data, size, out.data(), &len, EVP_sha256(), nullptr) != 1 || len != 32)
    throw Error(ErrorCode::IoFailure, "sha256 digest failed");
  return out;
}

}  // namespace

ProgramIdentity compute_identity(const std::vector<uint8_t>& text_bytes,
                                 const std::vector<std::string>& sorted_weight_keys,
                                 const CompileOptions& options) {
  ProgramIdentity id;
  id.text = sha256(text_bytes.data(), text_bytes.size());
  std::string keys;
  for (const std::string& k : sorted_weight_keys) keys += k + '\n';
  id.keys = sha256(keys.data(), keys.size());
  std::string opts = options.canonical();
  id.options = sha256(opts.data(), opts.size());
  return id;
}

std::string ProgramIdentity::hex() const {
  static const char* digits = "0123456789abcdef";
  std::string out;
  for (const auto* part : {&text, &keys, &options})
    for (uint8_t b : *part) {
      out += digits[b >> 4];
      out += digits[b & 15];
    }
  return out;
}

// ---------------------------------------------------------------------------
// Program, cache, context

CompiledProgram::~CompiledProgram() { release(); }

void CompiledProgram::release() {
  loaded = false;
  if (owns_tmp_dir && !tmp_dir.empty()) {
    std::error_code ec;
    fs::remove_all(tmp_dir, ec);
    owns_tmp_dir = false;
  }
}

std::vector<std::string> CompiledProgram::weight_keys() const {
  std::vector<std::string> keys;
  for (const auto& [k, ref] : mil.weight_manifest) keys.push_back(k);
  return keys;
}

ProgramPtr ProgramCache::find(const CacheKey& key) const {
  std::shared_lock lock(mu_);
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : it->second;
}

void ProgramCache::insert(const CacheKey& key, ProgramPtr program) {
  std::unique_lock lock(mu_);
  entries_[key] = std::move(program);
}

void ProgramCache::erase(const CacheKey& key) {
  std::unique_lock lock(mu_);
  entries_.erase(key);
}

void ProgramCache::clear() {
  std::unique_lock lock(mu_);
  entries_.clear();
}

size_t ProgramCache::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

namespace {

std::string fresh_tmp_root() {
  static std::atomic<uint64_t> serial{0};
  fs::path base = fs::temp_directory_path();
  if (const char* env = std::getenv("FORGE_TMPDIR"); env && *env) base = env;
  return (base / ("forge-" + std::to_string(::getpid()) + "-" + std::to_string(serial++))).string();
}

}  // namespace

DeviceContext::DeviceContext() : DeviceContext(CostModel{}) {}

DeviceContext::DeviceContext(CostModel c) : cost(c), tmp_root(fresh_tmp_root()) {}

DeviceContext::~DeviceContext() {
  cache.clear();
  std::error_code ec;
  fs::remove(tmp_root, ec);  // only succeeds once every program released its directory
}

void DeviceContext::charge(double SimLedger::*bucket, double ms, const std::string& what) {
  std::lock_guard lock(ledger_mu_);
  ledger_.*bucket += ms;
  if (!what.empty()) ledger_.trace.push_back({ledger_.total_ms(), what});
}

void DeviceContext::count(int SimLedger::*counter) {
  std::lock_guard lock(ledger_mu_);
  ++(ledger_.*counter);
}

SimLedger DeviceContext::ledger() const {
  std::lock_guard lock(ledger_mu_);
  return ledger_;
}

// ---------------------------------------------------------------------------
// Compile / load / evaluate

namespace {

bool valid_utf8(const std::vector<uint8_t>& s) {
  size_t i = 0;
  while (i < s.size()) {
    uint8_t c = s[i];
    int extra = 0;
    uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + static_cast<size_t>(extra) >= s.size()) return false;
    for (int k = 1; k <= extra; ++k) {
      if ((s[i + k] & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (s[i + k] & 0x3F);
    }
    static const uint32_t min_cp[] = {0, 0x80, 0x800, 0x10000};
    if (cp < min_cp[extra] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    i += static_cast<size_t>(extra) + 1;
  }
  return true;
}

void count_macs(CompiledProgram& p) {
  for (const auto& [id, n] : p.graph.nodes) {
    if (n.kind == OpKind::conv1x1) {
      p.conv_macs += static_cast<double>(n.out_shape.numel()) *
                     static_cast<double>(p.graph.shape_of(n.inputs[0])[1]);
    } else if (n.kind == OpKind::matmul) {
      const Shape& a = p.graph.shape_of(n.inputs[0]);
      int64_t k = n.int_attr_or("transpose_x", 0) ? a.dims[a.rank() - 2] : a.dims.back();
      p.matmul_macs += static_cast<double>(n.out_shape.numel()) * static_cast<double>(k);
    }
  }
}

}  // namespace

ProgramPtr compile(DeviceContext& ctx, const MilProgram& mil, const TensorMap* weights,
                   const CompileOptions& options) {
  if (weights == nullptr)
    throw Error(ErrorCode::MissingWeightDict,
                "weight dictionary is nil; pass an empty dictionary instead", 11);
  if (!valid_utf8(mil.text_bytes))
    throw Error(ErrorCode::InvalidEncoding, "program text is not valid UTF-8 data", 9);
  if (ctx.compile_count >= ctx.compile_limit) {
    if (ctx.strict_mode)
      throw Error(ErrorCode::CompileLimitExceeded,
                  "compile " + std::to_string(ctx.compile_count + 1) + " exceeds the per-process limit of " +
                      std::to_string(ctx.compile_limit) + "; restart the process",
                  5);
    ++ctx.compile_count;
    auto sentinel = std::make_shared<CompiledProgram>();
    sentinel->mil = mil;
    sentinel->sentinel = true;
    sentinel->loaded = true;
    return sentinel;
  }
  ++ctx.compile_count;
  ctx.count(&SimLedger::compiles);

  const std::string text = from_bytes(mil.text_bytes);
  MilFunction fn;
  try {
    fn = parse_mil_text(text);
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidProgram, std::string("program does not parse: ") + e.what());
  }
  for (const MilStatement& s : fn.body) {
    if (s.op == "concat")
      throw Error(ErrorCode::BannedOp, "%" + s.var + ": concat is rejected; split into separate programs", 1);
    if (s.op == "gelu")
      throw Error(ErrorCode::BannedOp, "%" + s.var + ": gelu is not a valid activation; use the tanh form", 10);
  }

  auto prog = std::make_shared<CompiledProgram>();
  prog->graph = mil_to_graph(fn);
  for (const auto& [id, n] : prog->graph.nodes) {
    if (n.kind == OpKind::conv1x1 && n.out_shape[1] > options.channel_limit)
      throw Error(ErrorCode::BannedOp,
                  "conv with " + std::to_string(n.out_shape[1]) + " output channels exceeds the " +
                      std::to_string(options.channel_limit) + "-channel limit; fall back to the host",
                  16);
  }

  MilProgram parsed = parse_mil(text);
  prog->mil = parsed;
  prog->mil.embedded = mil.embedded;
  prog->mil.weight_root = mil.weight_root;
  prog->options = options;
  prog->identity = compute_identity(mil.text_bytes, prog->weight_keys(), options);
  count_macs(*prog);

  // Resolve weight values before touching the filesystem.
  TensorMap resolved;
  for (const auto& [name, ref] : parsed.weight_manifest) {
    if (auto it = weights->find(name); it != weights->end()) {
      if (it->second.numel() != ref.count)
        throw Error(ErrorCode::ShapeMismatch, "weight '" + name + "' has " +
                                                  std::to_string(it->second.numel()) +
                                                  " elements, program expects " + std::to_string(ref.count));
      resolved[name] = Tensor(ref.shape, it->second.data);
    } else if (auto e = mil.embedded.find(name); e != mil.embedded.end()) {
      resolved[name] = Tensor(ref.shape, e->second.data);
    } else if (!mil.weight_root.empty() && fs::exists(fs::path(mil.weight_root) / ref.path)) {
      TensorMap file = read_blobfile((fs::path(mil.weight_root) / ref.path).string());
      auto f = file.find(name);
      if (f == file.end() || f->second.numel() != ref.count)
        throw Error(ErrorCode::MissingWeight, "blob for weight '" + name + "' does not hold it");
      resolved[name] = Tensor(ref.shape, f->second.data);
    } else {
      throw Error(ErrorCode::MissingWeight, "no value for weight '" + name + "'");
    }
  }

  prog->tmp_dir = (fs::path(ctx.tmp_root) / prog->identity.hex()).string();
  std::error_code ec;
  prog->owns_tmp_dir = !fs::exists(prog->tmp_dir);
  fs::create_directories(prog->tmp_dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create '" + prog->tmp_dir + "'");
  for (const auto& [name, t] : resolved)
    write_blobfile({{name, t}}, (fs::path(prog->tmp_dir) / parsed.weight_manifest.at(name).path).string());

  load(*prog);
  const CostModel& c = ctx.cost;
  ctx.charge(&SimLedger::compile_ms, prog->kernels * c.full_compile_ms(), "compile");
  return prog;
}

void load(CompiledProgram& program) {
  if (program.loaded) throw Error(ErrorCode::DoubleLoad, "program is already loaded");
  if (program.sentinel) {
    program.loaded = true;
    return;
  }
  if (program.tmp_dir.empty() || !fs::is_directory(program.tmp_dir))
    throw Error(ErrorCode::TmpDirMissing, "program directory '" + program.tmp_dir + "' no longer exists");
  TensorMap baked;
  for (const auto& [name, ref] : program.mil.weight_manifest) {
    std::string path = (fs::path(program.tmp_dir) / ref.path).string();
    std::vector<uint8_t> bytes = read_file(path);
    decode_blobfile(bytes, path);
    // The device honours the offset written in the program text; a wrong
    // offset yields garbage rather than an error.
    uint64_t need = ref.offset + static_cast<uint64_t>(ref.count) * 2;
    if (need > bytes.size())
      throw Error(ErrorCode::TruncatedChunk, path + ": weight '" + name + "' extends past end of file");
    Tensor t(ref.shape);
    for (int64_t i = 0; i < ref.count; ++i) {
      uint16_t bits = static_cast<uint16_t>(bytes[ref.offset + 2 * i] | (bytes[ref.offset + 2 * i + 1] << 8));
      t.data[i] = f16_to_f32(F16Value{bits});
    }
    baked[name] = std::move(t);
  }
  ProgramIdentity now = compute_identity(program.mil.text_bytes, program.weight_keys(), program.options);
  if (!(now == program.identity))
    throw Error(ErrorCode::IdentityMismatch, "program identity changed across load");
  program.baked_weights = std::move(baked);
  program.loaded = true;
}

void unload(CompiledProgram& program) {
  if (!program.loaded) throw Error(ErrorCode::DoubleUnload, "program is not loaded");
  program.loaded = false;
}

EvalResult evaluate(DeviceContext& ctx, const CompiledProgram& program,
                    const std::vector<Surface>& inputs, std::vector<Surface>& outputs) {
  if (program.sentinel)
    throw Error(ErrorCode::SilentFailureTriggered,
                "program came from a compile past the per-process limit", 5);
  if (!program.loaded) throw Error(ErrorCode::NotLoaded, "program is not loaded");

  auto check_min = [&](const Surface& s, const char* role) {
    if (s.alloc_bytes < ctx.min_surface_bytes)
      throw Error(ErrorCode::Error0x1d,
                  std::string("0x1d: ") + role + " surface '" + s.name + "' is " +
                      std::to_string(s.alloc_bytes) + " bytes, below the " +
                      std::to_string(ctx.min_surface_bytes) + "-byte minimum",
                  4);
  };
  for (const Surface& s : inputs) check_min(s, "input");
  for (const Surface& s : outputs) check_min(s, "output");
  for (const Surface& s : outputs)
    if (s.alloc_bytes != outputs.front().alloc_bytes)
      throw Error(ErrorCode::Error0x1d, "0x1d: output surfaces have non-uniform sizes", 2);
  for (const Surface& s : inputs)
    if (s.alloc_bytes != inputs.front().alloc_bytes)
      throw Error(ErrorCode::Error0x1d, "0x1d: input surfaces have non-uniform allocation sizes", 18);

  const MilProgram& mil = program.mil;
  if (inputs.size() != mil.input_params.size() || outputs.size() != mil.output_vars.size())
    throw Error(ErrorCode::BindingMismatch,
                "program takes " + std::to_string(mil.input_params.size()) + " inputs and " +
                    std::to_string(mil.output_vars.size()) + " outputs; got " +
                    std::to_string(inputs.size()) + " and " + std::to_string(outputs.size()));

  TensorMap bound;
  for (size_t i = 0; i < inputs.size(); ++i) {
    const std::string& param = mil.input_params[i];
    const TensorType& type = mil.param_types.at(param);
    size_t payload = static_cast<size_t>(type.shape.numel() * 2);
    if (inputs[i].data.size() < payload || static_cast<int64_t>(inputs[i].data.size()) != inputs[i].alloc_bytes)
      throw Error(ErrorCode::BindingMismatch, "surface bound to '" + param + "' is too small");
    std::vector<uint8_t> head(inputs[i].data.begin(), inputs[i].data.begin() + static_cast<std::ptrdiff_t>(payload));
    bound[param] = unpack_fp16(head, type.shape);
  }

  TensorMap result = interpret_graph(program.graph, bound, program.baked_weights, Precision::fp16);

  for (size_t i = 0; i < outputs.size(); ++i) {
    const Tensor& t = result.at(mil.output_vars[i]);
    std::vector<uint8_t> bytes = pack_fp16(t);
    Surface& s = outputs[i];
    if (s.data.size() < bytes.size() || static_cast<int64_t>(s.data.size()) != s.alloc_bytes)
      throw Error(ErrorCode::BindingMismatch, "surface bound to '" + mil.output_vars[i] + "' is too small");
    std::fill(s.data.begin(), s.data.end(), 0);
    std::copy(bytes.begin(), bytes.end(), s.data.begin());
  }

  const CostModel& c = ctx.cost;
  double ms = c.dispatch_ms + c.iosurface_roundtrip_ms +
              c.conv_ms_per_gmac * (program.conv_macs + c.matmul_penalty * program.matmul_macs) / 1e9;
  ctx.count(&SimLedger::evaluations);
  ctx.charge(&SimLedger::eval_ms, ms, "");
  return {ms};
}

ProgramPtr cache_get_or_compile(DeviceContext& ctx, const CacheKey& key, const MilProgram& mil,
                                const TensorMap* weights, const CompileOptions& options) {
  if (ProgramPtr hit = ctx.cache.find(key)) return hit;
  ProgramPtr p = compile(ctx, mil, weights, options);
  ctx.cache.insert(key, p);
  return p;
}

}  // namespace forge
