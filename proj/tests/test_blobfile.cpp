// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>

#include "doctest.h"
#include "forge/blobfile.hpp"
#include "forge/error.hpp"
#include "forge/numerics.hpp"
#include "oracles.hpp"

using namespace forge;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::UsageError;
}

template <typename T>
T read_le(const std::vector<uint8_t>& b, size_t at) {
  T v{};
  std::memcpy(&v, b.data() + at, sizeof(T));
  return v;
}

uint16_t f16_at(const std::vector<uint8_t>& b, size_t at) { return read_le<uint16_t>(b, at); }

fs::path scratch(const std::string& leaf) {
  fs::path p = fs::temp_directory_path() / "forge_test_blobfile";
  fs::create_directories(p);
  return p / leaf;
}

}  // namespace

TEST_CASE("layout: magic, 64-byte aligned chunks, payload 64 past each header") {
  std::vector<WeightEntry> entries = {make_entry("alpha", Tensor({3}, {1.0f, 2.0f, 3.0f})),
                                      make_entry("b", Tensor({40}, 0.5f))};
  std::vector<uint8_t> bytes = encode_blobfile(entries);
  CHECK(std::memcmp(bytes.data(), "ORBLOB01", 8) == 0);

  size_t header = 64;
  for (const WeightEntry& e : entries) {
    CHECK(header % 64 == 0);
    CHECK(read_le<uint32_t>(bytes, header) == e.name.size());
    CHECK(std::string(bytes.begin() + header + 4, bytes.begin() + header + 4 + e.name.size()) == e.name);
    CHECK(read_le<uint64_t>(bytes, header + 4 + e.name.size() + 1) ==
          static_cast<uint64_t>(e.element_count));
    const size_t payload = header + 64;
    for (int64_t i = 0; i < e.element_count; ++i)
      CHECK(f16_at(bytes, payload + 2 * i) == f32_to_f16_rne(e.to_tensor().data[i]).bits);
    const size_t end = payload + 2 * e.element_count;
    header = (end + 63) / 64 * 64;
  }
  CHECK(bytes.size() == header);
}

TEST_CASE("sanitized write") {
  Tensor t({5}, {std::nanf(""), 1e9f, -INFINITY, 0.5f, INFINITY});
  WeightEntry e = make_entry("g", t);
  Tensor back = e.to_tensor();
  CHECK(back.data[0] == 0.0f);
  CHECK(back.data[1] == 65504.0f);
  CHECK(back.data[2] == -65504.0f);
  CHECK(back.data[3] == 0.5f);
  CHECK(back.data[4] == 65504.0f);
  CHECK(f16_at(e.payload, 2) == 0x7BFF);
  CHECK(sanitize_value(std::nanf("")) == 0.0f);
  CHECK(sanitize_value(-1e30f) == -65504.0f);
}

TEST_CASE("file round trip and byte idempotence") {
  const std::string p = scratch("rt.blob").string();
  write_blobfile({{"w", Tensor({2}, {0.5f, -0.25f})}, {"acc", Tensor({2}, {0.1f, 1e-9f})}}, p, {"acc"});
  TensorMap m = read_blobfile(p);
  CHECK(m.at("w").data == std::vector<float>{0.5f, -0.25f});
  // fp32 entries keep full precision.
  CHECK(m.at("acc").data == std::vector<float>{0.1f, 1e-9f});
  std::vector<uint8_t> first = read_file(p);
  write_blobfile(m, p, {"acc"});
  CHECK(read_file(p) == first);
  CHECK(load_blobfile(p).find("w") != nullptr);
  CHECK(load_blobfile(p).find("nope") == nullptr);
}

TEST_CASE("decode errors") {
  CHECK(code_of([] { decode_blobfile({}); }) == ErrorCode::BadMagic);
  std::vector<uint8_t> bogus(64, 0);
  CHECK(code_of([&] { decode_blobfile(bogus); }) == ErrorCode::BadMagic);

  std::vector<WeightEntry> entries = {make_entry("w", Tensor({32}, 1.0f))};
  std::vector<uint8_t> shifted = encode_blobfile(entries, 128);
  CHECK(code_of([&] { decode_blobfile(shifted); }) == ErrorCode::OffsetMismatch);

  std::vector<uint8_t> good = encode_blobfile(entries);
  CHECK_NOTHROW(decode_blobfile(good));
  good.resize(good.size() - 40);
  CHECK(code_of([&] { decode_blobfile(good); }) == ErrorCode::TruncatedChunk);

  CHECK(code_of([] { make_entry("", Tensor({1}, 1.0f)); }) == ErrorCode::EmptyName);
  CHECK(code_of([] { read_blobfile("/nonexistent/dir/x.blob"); }) == ErrorCode::IoFailure);
}

TEST_CASE("validation flags NaN and Inf encodings") {
  std::vector<WeightEntry> entries = {make_entry("ok", Tensor({8}, 0.25f)),
                                      make_entry("bad", Tensor({8}, 0.25f))};
  BlobFile clean = decode_blobfile(encode_blobfile(entries));
  CHECK(validate_weights(clean).clean());

  for (uint16_t pattern : {uint16_t{0x7E00}, uint16_t{0x7C00}, uint16_t{0xFC00}}) {
    CAPTURE(pattern);
    std::vector<uint8_t> bytes = encode_blobfile(entries);
    // Second chunk header starts at the next 64-byte boundary after the first payload.
    const size_t second_payload = 64 + 64 + 64 + 64;
    std::memcpy(bytes.data() + second_payload + 6, &pattern, 2);
    ValidationReport r = validate_weights(decode_blobfile(bytes));
    CHECK(r.corrupted == std::vector<std::string>{"bad"});
  }
}

TEST_CASE("property: sanitization is monotone and bounded") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> exp_dist(-30.0, 40.0);
  std::vector<float> xs;
  for (int i = 0; i < 4000; ++i) {
    double mag = std::exp2(exp_dist(rng));
    xs.push_back(static_cast<float>(rng() & 1 ? mag : -mag));
  }
  xs.push_back(65504.0f);
  xs.push_back(65519.0f);
  xs.push_back(65520.0f);
  xs.push_back(std::numeric_limits<float>::max());
  std::sort(xs.begin(), xs.end());
  Tensor t({static_cast<int64_t>(xs.size())}, xs);
  Tensor stored = make_entry("m", t).to_tensor();
  for (size_t i = 0; i < xs.size(); ++i) {
    CHECK(std::isfinite(stored.data[i]));
    CHECK(std::fabs(stored.data[i]) <= 65504.0f);
    if (i) CHECK(stored.data[i - 1] <= stored.data[i]);
    // Finite in-range values match the nearest-even lattice oracle.
    if (std::fabs(xs[i]) <= 65504.0f)
      CHECK(stored.data[i] == static_cast<float>(oracle::f16_value(oracle::f16_nearest(xs[i]))));
  }
}
