// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/blobfile.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "forge/error.hpp"
#include "forge/numerics.hpp"

namespace forge {

namespace fs = std::filesystem;

namespace {

uint8_t dtype_tag(DType d) {
  switch (d) {
    case DType::fp16: return 0;
    case DType::fp32: return 1;
    case DType::int32: return 2;
  }
  return 0;
}

DType tag_dtype(uint8_t t, const std::string& path) {
  switch (t) {
    case 0: return DType::fp16;
    case 1: return DType::fp32;
    case 2: return DType::int32;
  }
  throw Error(ErrorCode::TruncatedChunk, path + ": unknown dtype tag " + std::to_string(t));
}

template <typename T>
void put(std::vector<uint8_t>& out, size_t at, T v) {
  std::memcpy(out.data() + at, &v, sizeof(T));
}

template <typename T>
T get(const std::vector<uint8_t>& in, size_t at) {
  T v;
  std::memcpy(&v, in.data() + at, sizeof(T));
  return v;
}

uint64_t align_up(uint64_t v) { return (v + kBlobAlign - 1) / kBlobAlign * kBlobAlign; }

}  // namespace

float sanitize_value(float x) {
  if (std::isnan(x)) return 0.0f;
  if (x > kFp16Max) return kFp16Max;
  if (x < -kFp16Max) return -kFp16Max;
  return x;
}

Tensor WeightEntry::to_tensor() const {
  Tensor t(Shape{element_count});
  for (int64_t i = 0; i < element_count; ++i) {
    switch (dtype) {
      case DType::fp16:
        t.data[i] = f16_to_f32(F16Value{get<uint16_t>(payload, static_cast<size_t>(i) * 2)});
        break;
      case DType::fp32: t.data[i] = get<float>(payload, static_cast<size_t>(i) * 4); break;
      case DType::int32:
        t.data[i] = static_cast<float>(get<int32_t>(payload, static_cast<size_t>(i) * 4));
        break;
    }
  }
  return t;
}

const WeightEntry* BlobFile::find(const std::string& name) const {
  for (const WeightEntry& e : chunks)
    if (e.name == name) return &e;
  return nullptr;
}

WeightEntry make_entry(const std::string& name, const Tensor& values, DType dtype) {
  if (name.empty()) throw Error(ErrorCode::EmptyName, "blob entry name is empty");
  if (name.size() > kMaxBlobNameBytes)
    throw Error(ErrorCode::IoFailure, "blob entry name '" + name + "' longer than " +
                                          std::to_string(kMaxBlobNameBytes) + " bytes");
  WeightEntry e;
  e.name = name;
  e.dtype = dtype;
  e.element_count = values.numel();
  e.payload.resize(static_cast<size_t>(e.element_count * dtype_bytes(dtype)));
  for (int64_t i = 0; i < e.element_count; ++i) {
    float v = values.data[i];
    size_t at = static_cast<size_t>(i * dtype_bytes(dtype));
    switch (dtype) {
      case DType::fp16: put(e.payload, at, f32_to_f16_rne(sanitize_value(v)).bits); break;
      case DType::fp32:
        if (!std::isfinite(v)) v = sanitize_value(v);
        put(e.payload, at, v);
        break;
      case DType::int32: put(e.payload, at, static_cast<int32_t>(v)); break;
    }
  }
  return e;
}

std::vector<uint8_t> encode_blobfile(const std::vector<WeightEntry>& entries,
                                     uint64_t payload_offset) {
  std::vector<uint8_t> out(kBlobAlign, 0);
  std::memcpy(out.data(), kBlobMagic, sizeof(kBlobMagic));
  put(out, 8, static_cast<uint32_t>(entries.size()));
  for (const WeightEntry& e : entries) {
    if (e.name.empty()) throw Error(ErrorCode::EmptyName, "blob entry name is empty");
    size_t header = out.size();
    uint64_t end = align_up(header + payload_offset + e.payload.size());
    out.resize(end, 0);
    put(out, header, static_cast<uint32_t>(e.name.size()));
    std::memcpy(out.data() + header + 4, e.name.data(), e.name.size());
    put(out, header + 4 + e.name.size(), dtype_tag(e.dtype));
    put(out, header + 5 + e.name.size(), static_cast<uint64_t>(e.element_count));
    put(out, header + 56, payload_offset);
    std::memcpy(out.data() + header + payload_offset, e.payload.data(), e.payload.size());
  }
  return out;
}

BlobFile decode_blobfile(const std::vector<uint8_t>& bytes, const std::string& path) {
  BlobFile file;
  file.path = path;
  if (bytes.size() < kBlobAlign || std::memcmp(bytes.data(), kBlobMagic, sizeof(kBlobMagic)) != 0)
    throw Error(ErrorCode::BadMagic, path + ": not a blob file");
  uint32_t count = get<uint32_t>(bytes, 8);
  size_t at = kBlobAlign;
  for (uint32_t i = 0; i < count; ++i) {
    if (at + kBlobAlign > bytes.size())
      throw Error(ErrorCode::TruncatedChunk, path + ": chunk " + std::to_string(i) + " header truncated");
    uint32_t name_len = get<uint32_t>(bytes, at);
    if (name_len == 0 || name_len > kMaxBlobNameBytes)
      throw Error(ErrorCode::TruncatedChunk, path + ": chunk " + std::to_string(i) + " has a bad name length");
    WeightEntry e;
    e.name.assign(reinterpret_cast<const char*>(bytes.data() + at + 4), name_len);
    e.dtype = tag_dtype(bytes[at + 4 + name_len], path);
    e.element_count = static_cast<int64_t>(get<uint64_t>(bytes, at + 5 + name_len));
    uint64_t offset = get<uint64_t>(bytes, at + 56);
    if (offset != kChunkPayloadOffset)
      throw Error(ErrorCode::OffsetMismatch,
                  path + ": chunk '" + e.name + "' payload at header+" + std::to_string(offset) +
                      ", expected header+64",
                  8);
    uint64_t size = static_cast<uint64_t>(e.element_count) * dtype_bytes(e.dtype);
    if (e.element_count < 0 || at + offset + size > bytes.size())
      throw Error(ErrorCode::TruncatedChunk, path + ": chunk '" + e.name + "' payload truncated");
    e.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(at + offset),
                     bytes.begin() + static_cast<std::ptrdiff_t>(at + offset + size));
    file.chunks.push_back(std::move(e));
    at = align_up(at + offset + size);
  }
  return file;
}

void write_file_atomic(const std::string& path, const std::vector<uint8_t>& bytes) {
  static std::atomic<uint64_t> counter{0};
  fs::path target(path);
  std::error_code ec;
  if (target.has_parent_path()) fs::create_directories(target.parent_path(), ec);
  std::string tmp = path + ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot open '" + tmp + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoFailure, "write to '" + tmp + "' failed");
  }
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::IoFailure, "cannot rename onto '" + path + "'");
  }
}

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "'");
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), {});
}

BlobFile write_blobfile(const TensorMap& entries, const std::string& path,
                        const std::set<std::string>& fp32_entries) {
  BlobFile file;
  file.path = path;
  for (const auto& [name, t] : entries)
    file.chunks.push_back(make_entry(name, t, fp32_entries.count(name) ? DType::fp32 : DType::fp16));
  write_file_atomic(path, encode_blobfile(file.chunks));
  return file;
}

BlobFile load_blobfile(const std::string& path) { return decode_blobfile(read_file(path), path); }

TensorMap read_blobfile(const std::string& path) {
  TensorMap out;
  for (const WeightEntry& e : load_blobfile(path).chunks) out[e.name] = e.to_tensor();
  return out;
}

ValidationReport validate_weights(const BlobFile& file) {
  ValidationReport report;
  for (const WeightEntry& e : file.chunks) {
    bool bad = false;
    for (int64_t i = 0; i < e.element_count && !bad; ++i) {
      if (e.dtype == DType::fp16) {
        F16Value h{get<uint16_t>(e.payload, static_cast<size_t>(i) * 2)};
        bad = h.is_nan() || h.is_inf();
      } else if (e.dtype == DType::fp32) {
        bad = !std::isfinite(get<float>(e.payload, static_cast<size_t>(i) * 4));
      }
    }
    if (bad) report.corrupted.push_back(e.name);
  }
  return report;
}

}  // namespace forge
