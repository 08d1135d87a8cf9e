// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include "forge/graph_ir.hpp"
#include "forge/mil_codegen.hpp"
#include "forge/tensor.hpp"

namespace forge {

/// Simulated timing table. Every figure is per kernel unless noted.
struct CostModel {
  double mil_parse_ms_per_kernel = 3.0;
  double compile_ms_per_kernel = 70.0;
  double load_ms_per_kernel = 30.0;
  double reload_ms_per_kernel = 8.0;
  double dispatch_ms = 0.095;
  double iosurface_roundtrip_ms = 2.3;
  double exec_restart_ms = 50.0;
  // Compute term of an evaluation: conv1x1 MACs cost conv_ms_per_gmac per
  // 1e9; matmul MACs cost matmul_penalty times as much.
  double conv_ms_per_gmac = 0.1;
  double matmul_penalty = 3.0;

  double full_compile_ms() const {
    return mil_parse_ms_per_kernel + compile_ms_per_kernel + load_ms_per_kernel;
  }

  /// Sets one field by name; throws ConfigInvalid for unknown keys or
  /// negative values.
  void set(const std::string& key, double value);
  std::map<std::string, double> fields() const;
  /// Reads key=value lines ('#' comments allowed).
  static CostModel from_file(const std::string& path);
  /// from_file($FORGE_COST_MODEL) when the variable is set, else defaults.
  static CostModel from_env();
};

struct TraceEvent {
  double t_ms = 0.0;
  std::string what;
};

/// Simulated-time accounting for one context.
struct SimLedger {
  int compiles = 0;
  int reloads = 0;
  int evaluations = 0;
  int restarts = 0;
  double compile_ms = 0.0;
  double reload_ms = 0.0;
  double eval_ms = 0.0;
  double restart_ms = 0.0;
  std::vector<TraceEvent> trace;

  double total_ms() const { return compile_ms + reload_ms + eval_ms + restart_ms; }
};

/// Shared-memory tensor buffer. Only alloc_bytes and data matter to the
/// device; nominal_shape is informational.
struct Surface {
  std::string name;
  int64_t alloc_bytes = 0;
  Shape nominal_shape;
  std::vector<uint8_t> data;

  static Surface allocate(const std::string& name, const Shape& nominal, int64_t alloc_bytes);
};

struct CompileOptions {
  std::string target = "forge-sim";
  int64_t channel_limit = 16'384;

  std::string canonical() const;
};

struct ProgramIdentity {
  std::array<uint8_t, 32> text{};
  std::array<uint8_t, 32> keys{};
  std::array<uint8_t, 32> options{};

  std::string hex() const;
  friend bool operator==(const ProgramIdentity&, const ProgramIdentity&) = default;
};

ProgramIdentity compute_identity(const std::vector<uint8_t>& text_bytes,
                                 const std::vector<std::string>& sorted_weight_keys,
                                 const CompileOptions& options);

class CompiledProgram {
 public:
  CompiledProgram() = default;
  CompiledProgram(const CompiledProgram&) = delete;
  CompiledProgram& operator=(const CompiledProgram&) = delete;
  ~CompiledProgram();

  ProgramIdentity identity;
  MilProgram mil;
  CompileOptions options;
  Graph graph;
  TensorMap baked_weights;
  std::string tmp_dir;
  bool owns_tmp_dir = false;
  bool loaded = false;
  // Returned by an over-limit compile in emulation mode.
  bool sentinel = false;
  int kernels = 1;
  // MAC counts used by the cost model.
  double conv_macs = 0.0;
  double matmul_macs = 0.0;

  /// Deletes tmp_dir when this program owns it. Idempotent.
  void release();
  std::vector<std::string> weight_keys() const;
};

using ProgramPtr = std::shared_ptr<CompiledProgram>;

struct CacheKey {
  std::string model;
  int layer = 0;
  int seq = 0;
  int version = 0;

  friend auto operator<=>(const CacheKey&, const CacheKey&) = default;
};

/// Concurrent reads, exclusive insertion.
class ProgramCache {
 public:
  ProgramPtr find(const CacheKey& key) const;
  void insert(const CacheKey& key, ProgramPtr program);
  void erase(const CacheKey& key);
  void clear();
  size_t size() const;

 private:
  mutable std::shared_mutex mu_;
  std::map<CacheKey, ProgramPtr> entries_;
};

class DeviceContext {
 public:
  DeviceContext();
  explicit DeviceContext(CostModel cost);
  DeviceContext(const DeviceContext&) = delete;
  DeviceContext& operator=(const DeviceContext&) = delete;
  ~DeviceContext();

  int compile_count = 0;
  int compile_limit = 119;
  bool strict_mode = true;
  int64_t min_surface_bytes = 49'152;
  CostModel cost;
  ProgramCache cache;
  std::string tmp_root;

  void charge(double SimLedger::*bucket, double ms, const std::string& what);
  SimLedger ledger() const;
  void count(int SimLedger::*counter);

 private:
  mutable std::mutex ledger_mu_;
  SimLedger ledger_;
};

/// `weights` == nullptr models a nil dictionary and is rejected even for
/// weightless programs. Weights missing from the map are taken from the
/// program's embedded values, then from `mil.weight_root`.
ProgramPtr compile(DeviceContext& ctx, const MilProgram& mil, const TensorMap* weights,
                   const CompileOptions& options = {});

struct EvalResult {
  double sim_ms = 0.0;
};

/// Binds surfaces positionally to the bytewise-sorted parameter and output
/// names; surface names are not consulted.
EvalResult evaluate(DeviceContext& ctx, const CompiledProgram& program,
                    const std::vector<Surface>& inputs, std::vector<Surface>& outputs);

/// Re-reads every weight blob from tmp_dir into baked_weights.
void load(CompiledProgram& program);
void unload(CompiledProgram& program);

ProgramPtr cache_get_or_compile(DeviceContext& ctx, const CacheKey& key, const MilProgram& mil,
                                const TensorMap* weights, const CompileOptions& options = {});

// ---------------------------------------------------------------------------
// Surface I/O

/// Host [seq, d_model] fp32 -> device [1, d_model, 1, seq] fp16, S fastest.
std::vector<uint8_t> layout_pack(const Tensor& host);
/// Inverse of layout_pack.
Tensor layout_unpack(const std::vector<uint8_t>& packed, int64_t seq, int64_t d_model);

/// Row-major fp16 encoding of a tensor already in device layout.
std::vector<uint8_t> pack_fp16(const Tensor& t);
Tensor unpack_fp16(const std::vector<uint8_t>& bytes, const Shape& shape);

/// Smallest legal uniform allocation for payloads of the given sizes.
int64_t uniform_alloc_bytes(const std::vector<int64_t>& payload_bytes, int64_t min_surface_bytes);

/// Allocates uniform surfaces in sorted-name order, evaluates and unpacks
/// the outputs by name. The workaround for constraints #2-4 and #18-20.
TensorMap run_program(DeviceContext& ctx, const CompiledProgram& program, const TensorMap& inputs,
                      double* sim_ms = nullptr);

}  // namespace forge
