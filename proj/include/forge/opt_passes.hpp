// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "forge/graph_ir.hpp"

namespace forge {

inline constexpr int64_t kSramBudgetBytes = 33'554'432;  // 32 MiB
inline constexpr int64_t kDefaultChannelLimit = 16'384;
inline constexpr int64_t kMinSeqDim = 16;
inline constexpr int kMaxFixpointIterations = 20;

struct PassWarning {
  std::string text;
  NodeId node = -1;
};

struct Violation {
  int constraint = 0;
  NodeId node = -1;
  std::string message;
};

struct SramEstimate {
  int64_t working_set_bytes = 0;
  int64_t budget_bytes = kSramBudgetBytes;
  bool exceeded = false;
};

struct PassReport {
  std::string pass_name;
  int nodes_removed = 0;
  int nodes_rewritten = 0;
  std::vector<PassWarning> warnings;
  bool changed = false;
  std::optional<SramEstimate> sram;
  std::vector<Violation> violations;
};

struct PassOptions {
  int64_t sram_budget_bytes = kSramBudgetBytes;
  int64_t channel_limit = kDefaultChannelLimit;
  // Minimum sequence (last) dimension of every graph input/output tensor.
  int64_t min_seq_dim = kMinSeqDim;
};

struct PipelineResult {
  Graph graph;
  std::vector<PassReport> reports;
  int iterations = 0;
};

/// Removes nodes not backward-reachable from any output. Graph inputs are
/// part of the program signature and are always kept.
PassReport pass_dce(Graph& graph);
/// Removes same-type casts, same-shape reshapes and identity transposes.
PassReport pass_identity_elim(Graph& graph);
/// Collapses fp16->fp32->fp16 cast round trips.
PassReport pass_cast_fusion(Graph& graph);
PassReport pass_sram_annotate(const Graph& graph, const PassOptions& options = {});
/// Never mutates the graph.
PassReport pass_constraint_validate(const Graph& graph, const PassOptions& options = {});

SramEstimate estimate_sram(const Graph& graph, int64_t budget_bytes = kSramBudgetBytes);

/// DCE -> identity-elim -> cast-fusion -> SRAM-annotate -> constraint-validate,
/// repeated until no pass changes the graph (at most 20 iterations). Throws
/// Error(ConstraintViolation) carrying the first violated constraint number.
PipelineResult run_pipeline(Graph graph, const PassOptions& options = {});

std::string format_report(const PassReport& report);

}  // namespace forge
