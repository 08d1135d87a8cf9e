// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "forge/graph_ir.hpp"
#include "forge/tensor.hpp"

namespace forge {

/// Location of one weight inside the BLOBFILE set a program references.
struct WeightRef {
  std::string path;     // relative to the program's weight root
  uint64_t offset = 0;  // 64 past the chunk header
  int64_t count = 0;
  DType dtype = DType::fp16;
  Shape shape;

  friend bool operator==(const WeightRef&, const WeightRef&) = default;
};

using WeightManifest = std::map<std::string, WeightRef>;

struct TensorType {
  DType dtype = DType::fp16;
  Shape shape;

  friend bool operator==(const TensorType&, const TensorType&) = default;
};

/// A program in the MIL dialect. The text is held as bytes; there is no
/// string-typed accessor on purpose.
struct MilProgram {
  std::vector<uint8_t> text_bytes;
  WeightManifest weight_manifest;
  std::vector<std::string> input_params;  // bytewise ascending
  std::map<std::string, TensorType> param_types;
  std::vector<std::string> output_vars;  // bytewise ascending
  // Values of graph-owned weights (e.g. the causal mask).
  TensorMap embedded;
  // Directory that manifest paths are resolved against when no value is
  // supplied at compile time. Empty means "none".
  std::string weight_root;
};

std::vector<uint8_t> to_bytes(std::string_view text);
std::string from_bytes(const std::vector<uint8_t>& bytes);

inline constexpr uint64_t kBlobChunkStart = 64;
inline constexpr uint64_t kBlobPayloadOffset = kBlobChunkStart + 64;

/// "weights/<name>.blob"
std::string weight_blob_path(const std::string& weight_name);

/// One MIL statement per node in topological order.
MilProgram emit_mil(const Graph& graph);

// ---------------------------------------------------------------------------
// Parsed form of the dialect, shared by the device compiler and mil_diff.

struct BlobRef {
  std::string path;
  uint64_t offset = 0;

  friend bool operator==(const BlobRef&, const BlobRef&) = default;
};

using MilAttr = std::variant<int64_t, double, std::vector<int64_t>, std::string, bool, BlobRef>;

struct MilArg {
  std::string var;
  int slot = 0;

  friend bool operator==(const MilArg&, const MilArg&) = default;
};

struct MilStatement {
  std::string var;
  std::string op;
  std::vector<MilArg> args;
  std::vector<std::pair<std::string, MilAttr>> attrs;  // as written

  const MilAttr* attr(const std::string& key) const;
};

struct MilFunction {
  std::vector<std::pair<std::string, TensorType>> params;
  std::vector<std::string> header_outputs;
  std::vector<MilStatement> body;
  std::vector<std::pair<std::string, MilArg>> returns;
};

/// Throws ParseError on malformed text.
MilFunction parse_mil_text(std::string_view text);
std::string format_mil(const MilFunction& fn);

/// Rebuilds a graph from dialect text. Variables named v<digits> keep that
/// node id. Throws InvalidProgram for unknown ops or undefined variables and
/// MilRejected for inline matmul transpose flags (#12) or conv bias (#13).
Graph mil_to_graph(const MilFunction& fn);

/// Parses text into a program (manifest, params, outputs) without values.
MilProgram parse_mil(std::string_view text);

struct MilDiffReport {
  bool equivalent = true;
  // Statement index of the first divergence; -1 when the signature or the
  // return list differs.
  int first_divergence = -1;
  std::string detail;
};

/// Equality up to renaming of intermediate variables and whitespace.
MilDiffReport mil_diff(const MilProgram& a, const MilProgram& b);
MilDiffReport mil_diff(std::string_view a, std::string_view b);

}  // namespace forge
