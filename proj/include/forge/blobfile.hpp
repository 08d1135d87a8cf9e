// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "forge/graph_ir.hpp"
#include "forge/tensor.hpp"

namespace forge {

// File layout (little-endian):
//   [0, 64)   magic "ORBLOB01", u32 chunk count, zero padding
//   per chunk, 64-byte aligned:
//     header  u32 name_len | name | u8 dtype | u64 element_count | zeros |
//             u64 payload_offset at bytes 56..63 (always 64)
//     payload at header_start + 64, zero padded to a 64-byte boundary
inline constexpr char kBlobMagic[8] = {'O', 'R', 'B', 'L', 'O', 'B', '0', '1'};
inline constexpr uint64_t kBlobAlign = 64;
inline constexpr uint64_t kChunkPayloadOffset = 64;
inline constexpr size_t kMaxBlobNameBytes = 43;

struct WeightEntry {
  std::string name;
  DType dtype = DType::fp16;
  int64_t element_count = 0;
  std::vector<uint8_t> payload;

  Tensor to_tensor() const;
};

struct BlobFile {
  std::string path;
  std::vector<WeightEntry> chunks;

  const WeightEntry* find(const std::string& name) const;
};

/// NaN -> 0, +/-Inf and |x| > 65504 -> +/-65504.
float sanitize_value(float x);

/// fp16 entries are sanitized then rounded to nearest even. fp32 entries
/// (optimizer state, master weights) keep every finite value bit-exact and
/// only replace NaN/Inf.
WeightEntry make_entry(const std::string& name, const Tensor& values, DType dtype = DType::fp16);

std::vector<uint8_t> encode_blobfile(const std::vector<WeightEntry>& entries,
                                     uint64_t payload_offset = kChunkPayloadOffset);
BlobFile decode_blobfile(const std::vector<uint8_t>& bytes, const std::string& path = "");

/// Writes atomically (temp file + rename). `fp32_entries` selects names
/// stored as fp32; every other entry is stored as fp16.
BlobFile write_blobfile(const TensorMap& entries, const std::string& path,
                        const std::set<std::string>& fp32_entries = {});
BlobFile load_blobfile(const std::string& path);
TensorMap read_blobfile(const std::string& path);

struct ValidationReport {
  std::vector<std::string> corrupted;  // entry names with NaN/Inf encodings
  bool clean() const { return corrupted.empty(); }
};

ValidationReport validate_weights(const BlobFile& file);

void write_file_atomic(const std::string& path, const std::vector<uint8_t>& bytes);
std::vector<uint8_t> read_file(const std::string& path);

}  // namespace forge
