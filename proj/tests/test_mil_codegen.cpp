// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <regex>
#include <sstream>

#include "doctest.h"
#include "forge/error.hpp"
#include "forge/frontends.hpp"
#include "forge/mil_codegen.hpp"
#include "forge/opt_passes.hpp"
#include "random_graphs.hpp"

using namespace forge;

namespace {

std::string text_of(const Graph& g) { return from_bytes(emit_mil(g).text_bytes); }

ErrorCode code_of(const std::function<void()>& f, std::optional<int>* constraint = nullptr) {
  try {
    f();
  } catch (const Error& e) {
    if (constraint) *constraint = e.constraint();
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::UsageError;
}

size_t count_of(const std::string& hay, const std::string& needle) {
  size_t n = 0;
  for (size_t p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

bool is_training_kind(const std::string& k) {
  return k == "fwd_attn" || k == "fwd_ffn" || k == "ffn_bwd" || k == "sdpa_bwd1" ||
         k == "sdpa_bwd2" || k == "qkv_bwd" || k == "classifier_fwd";
}

}  // namespace

TEST_CASE("signature is sorted bytewise") {
  GraphBuilder b;
  Edge y = b.input("y", {1, 8, 1, 16});
  Edge x = b.input("X", {1, 8, 1, 16});
  b.output("z_out", b.relu(x));
  b.output("a_out", b.tanh(y));
  MilProgram p = emit_mil(b.graph());
  CHECK(p.input_params == std::vector<std::string>{"X", "y"});
  CHECK(p.output_vars == std::vector<std::string>{"a_out", "z_out"});
  std::string text = from_bytes(p.text_bytes);
  CHECK(text.find("-> (a_out, z_out)") != std::string::npos);
}

TEST_CASE("matmul transpose flags become named consts") {
  GraphBuilder b;
  Edge q = b.input("q", {1, 1, 16, 16});
  Edge k = b.input("k", {1, 1, 16, 16});
  b.output("s", b.matmul(q, k, false, true));
  std::string text = text_of(b.graph());
  CHECK(std::regex_search(text, std::regex(R"(%v\d+_transpose_y = const\(\)\[val=true\];)")));
  CHECK(std::regex_search(text, std::regex(R"(matmul\(%v0, %v1, %v\d+_transpose_x, %v\d+_transpose_y\)\[\])")));
  CHECK(text.find("transpose_y=") == std::string::npos);

  // The inline form is rejected when read back.
  std::string inl = std::regex_replace(
      text, std::regex(R"(matmul\((%v0, %v1), [^)]*\)\[\])"), "matmul($1)[transpose_y=true]");
  REQUIRE(inl != text);
  std::optional<int> c;
  CHECK(code_of([&] { mil_to_graph(parse_mil_text(inl)); }, &c) == ErrorCode::MilRejected);
  CHECK(c == 12);
}

TEST_CASE("conv bias is a separate add") {
  GraphBuilder b;
  Edge x = b.input("x", {1, 8, 1, 16});
  Edge c = b.conv(x, b.weight("w", {16, 8, 1, 1}));
  b.output("y", b.add(c, b.weight("w_b", {1, 16, 1, 1})));
  std::string text = text_of(b.graph());
  CHECK(std::regex_search(text, std::regex(R"(%v(\d+) = conv\(%v0, %v\d+\)\[\];[\s\S]*add\(%v\1, %v\d+\))")));
  CHECK(text.find("bias") == std::string::npos);

  std::string biased = std::regex_replace(text, std::regex(R"(conv\((%v0, %v\d+)\)\[\])"),
                                          "conv($1)[bias=\"w_b\"]");
  REQUIRE(biased != text);
  std::optional<int> con;
  CHECK(code_of([&] { mil_to_graph(parse_mil_text(biased)); }, &con) == ErrorCode::MilRejected);
  CHECK(con == 13);
}

TEST_CASE("gelu never reaches the emitter") {
  GraphBuilder b;
  Edge x = b.input("x", {1, 8, 1, 16});
  b.output("y", b.op(OpKind::identity, {x}, {{"activation", std::string("gelu")}}));
  std::optional<int> c;
  CHECK(code_of([&] { emit_mil(b.graph()); }, &c) == ErrorCode::UnexpandedGelu);
  CHECK(c == 10);
}

TEST_CASE("weight manifest") {
  GraphBuilder b;
  Edge x = b.input("x", {1, 8, 1, 16});
  Edge h = b.conv(x, b.weight("w1", {16, 8, 1, 1}));
  b.output("y", b.conv(b.relu(h), b.weight("w2", {8, 16, 1, 1})));
  MilProgram p = emit_mil(b.graph());
  REQUIRE(p.weight_manifest.size() == 2);
  std::string text = from_bytes(p.text_bytes);
  for (const auto& [name, ref] : p.weight_manifest) {
    CHECK(ref.offset == kBlobPayloadOffset);
    CHECK(ref.offset == kBlobChunkStart + 64);
    CHECK(ref.path == weight_blob_path(name));
    CHECK(count_of(text, "name=\"" + name + "\"") == 1);
    CHECK(count_of(text, "blobfile(\"" + ref.path + "\", offset=128)") == 1);
  }
  CHECK(p.weight_manifest.at("w1").count == 128);
  CHECK(count_of(text, "blobfile(") == p.weight_manifest.size());
}

TEST_CASE("mil_diff") {
  GraphBuilder b;
  Edge x = b.input("x", {1, 8, 1, 16});
  b.output("y", b.sigmoid(b.relu(b.tanh(x))));
  std::string text = text_of(b.graph());

  CHECK(mil_diff(text, text).equivalent);

  std::string renamed = std::regex_replace(text, std::regex("%v2\\b"), "%hidden");
  renamed = std::regex_replace(renamed, std::regex("\n  "), "\n      ");
  REQUIRE(renamed != text);
  CHECK(mil_diff(text, renamed).equivalent);

  std::string mutated = std::regex_replace(text, std::regex(" relu\\("), " exp(");
  MilDiffReport r = mil_diff(text, mutated);
  CHECK_FALSE(r.equivalent);
  CHECK(r.first_divergence == 2);

  GraphBuilder b2;
  b2.output("other", b2.relu(b2.input("x", {1, 8, 1, 16})));
  MilDiffReport sig = mil_diff(text, text_of(b2.graph()));
  CHECK_FALSE(sig.equivalent);
  CHECK(sig.first_divergence == -1);

  CHECK(code_of([&] { mil_diff(text, "main(x: tensor<fp16,[1]>"); }) == ErrorCode::ParseError);
}

TEST_CASE("program text is bytes") {
  std::string s = "main() -> () {\n}\n";
  std::vector<uint8_t> bytes = to_bytes(s);
  CHECK(bytes.size() == s.size());
  CHECK(from_bytes(bytes) == s);
}

TEST_CASE("property: emission is deterministic and round-trips") {
  for (uint64_t seed = 0; seed < 100; ++seed) {
    CAPTURE(seed);
    Graph g = run_pipeline(testing_support::random_graph(seed)).graph;
    MilProgram a = emit_mil(g);
    MilProgram b = emit_mil(Graph(g));
    CHECK(a.text_bytes == b.text_bytes);
    std::string text = from_bytes(a.text_bytes);
    CHECK(format_mil(parse_mil_text(text)) == text);
    Graph back = mil_to_graph(parse_mil_text(text));
    CHECK(from_bytes(emit_mil(back).text_bytes) == text);
    MilProgram parsed = parse_mil(text);
    CHECK(parsed.input_params == a.input_params);
    CHECK(parsed.output_vars == a.output_vars);
    CHECK(parsed.weight_manifest == a.weight_manifest);
    CHECK(std::is_sorted(a.output_vars.begin(), a.output_vars.end()));
    CHECK(std::is_sorted(a.input_params.begin(), a.input_params.end()));
  }
}

TEST_CASE("frontends match the golden programs") {
  for (const std::string& kind : frontend_kinds()) {
    CAPTURE(kind);
    std::ifstream in(std::string(FORGE_GOLDEN_DIR) + "/" + kind + ".mil", std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    FrontendOptions o;
    o.seq = kind.rfind("decode_", 0) == 0 ? 16 : 64;
    ModelConfig mc = is_training_kind(kind) ? llama_toy_config() : gpt2_toy_config();
    Graph g = run_pipeline(build_frontend(kind, mc, o)).graph;
    MilDiffReport r = mil_diff(ss.str(), text_of(g));
    CHECK_MESSAGE(r.equivalent, r.detail);
  }
}
