// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <functional>

#include "doctest.h"
#include "forge/delta_reload.hpp"
#include "forge/error.hpp"
#include "forge/mil_codegen.hpp"
#include "forge/numerics.hpp"
#include "forge/opt_passes.hpp"
#include "random_graphs.hpp"

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

Graph ffn_graph() {
  GraphBuilder b;
  Edge x = b.input("x", {1, 16, 1, 16});
  Edge h = b.relu(b.conv(x, b.weight("w1", {32, 16, 1, 1})));
  b.output("y", b.add(x, b.conv(h, b.weight("w2", {16, 32, 1, 1}))));
  return b.take();
}

TensorMap weights_for(const Graph& g, uint64_t seed) { return testing_support::random_weights(g, seed); }

}  // namespace

TEST_CASE("reload swaps weights without compiling") {
  DeviceContext ctx;
  Graph g = ffn_graph();
  MilProgram mil = emit_mil(g);
  TensorMap w = weights_for(g, 1), w2 = weights_for(g, 2);
  ProgramPtr p = compile(ctx, mil, &w);
  const ProgramIdentity id = p->identity;
  TensorMap in = testing_support::random_inputs(g, 3);
  TensorMap before = run_program(ctx, *p, in);

  const int compiles = ctx.compile_count;
  double ms = reload_weights(ctx, {p.get(), w2});
  CHECK(ms == doctest::Approx(8.0));
  CHECK(ctx.compile_count == compiles);
  CHECK(p->identity == id);
  CHECK(p->loaded);
  CHECK(ctx.ledger().reloads == 1);

  DeviceContext fresh_ctx;
  ProgramPtr fresh = compile(fresh_ctx, mil, &w2);
  CHECK(bit_equal(run_program(ctx, *p, in).at("y"), run_program(fresh_ctx, *fresh, in).at("y")));

  SUBCASE("identical payloads leave outputs unchanged") {
    reload_weights(ctx, {p.get(), w});
    CHECK(bit_equal(run_program(ctx, *p, in).at("y"), before.at("y")));
  }
  SUBCASE("patches are sanitized") {
    TensorMap bad = w2;
    bad.at("w1").data[0] = std::nanf("");
    bad.at("w1").data[1] = INFINITY;
    reload_weights(ctx, {p.get(), bad});
    CHECK(p->baked_weights.at("w1").data[0] == 0.0f);
    CHECK(p->baked_weights.at("w1").data[1] == 65504.0f);
  }
}

TEST_CASE("reload cost scales with kernels") {
  DeviceContext ctx;
  Graph g = ffn_graph();
  TensorMap w = weights_for(g, 1);
  ProgramPtr p = compile(ctx, emit_mil(g), &w);
  p->kernels = 60;
  CHECK(reload_weights(ctx, {p.get(), w}) == doctest::Approx(480.0));
  CHECK(60 * ctx.cost.full_compile_ms() == doctest::Approx(6180.0));
}

TEST_CASE("reload errors") {
  DeviceContext ctx;
  Graph g = ffn_graph();
  TensorMap w = weights_for(g, 1);
  ProgramPtr p = compile(ctx, emit_mil(g), &w);

  TensorMap missing = w;
  missing.erase("w2");
  CHECK(code_of([&] { reload_weights(ctx, {p.get(), missing}); }) == ErrorCode::KeySetMismatch);
  TensorMap extra = w;
  extra["w3"] = Tensor({1}, 0.0f);
  CHECK(code_of([&] { reload_weights(ctx, {p.get(), extra}); }) == ErrorCode::KeySetMismatch);
  // A failed plan leaves the program loaded and usable.
  CHECK(p->loaded);

  unload(*p);
  CHECK(code_of([&] { reload_weights(ctx, {p.get(), w}); }) == ErrorCode::NotLoaded);
  load(*p);

  fs::remove_all(p->tmp_dir);
  CHECK(code_of([&] { reload_weights(ctx, {p.get(), w}); }) == ErrorCode::TmpDirMissing);
}

TEST_CASE("tmp dir ownership") {
  DeviceContext ctx;
  Graph g = ffn_graph();
  MilProgram mil = emit_mil(g);
  TensorMap w = weights_for(g, 1), w2 = weights_for(g, 2);

  SUBCASE("transfer then release the old program") {
    ProgramPtr old_p = compile(ctx, mil, &w);
    ProgramPtr new_p = compile(ctx, mil, &w);
    REQUIRE(old_p->owns_tmp_dir);
    REQUIRE_FALSE(new_p->owns_tmp_dir);
    transfer_tmpdir_ownership(*old_p, *new_p);
    CHECK(new_p->owns_tmp_dir);
    CHECK_FALSE(old_p->owns_tmp_dir);
    old_p->release();
    CHECK(fs::exists(new_p->tmp_dir));
    CHECK_NOTHROW(reload_weights(ctx, {new_p.get(), w2}));
    const std::string dir = new_p->tmp_dir;
    new_p->release();
    CHECK_FALSE(fs::exists(dir));
  }
  SUBCASE("releasing the owner without a transfer breaks the other program") {
    ProgramPtr old_p = compile(ctx, mil, &w);
    ProgramPtr new_p = compile(ctx, mil, &w);
    old_p->release();
    CHECK(code_of([&] { reload_weights(ctx, {new_p.get(), w2}); }) == ErrorCode::TmpDirMissing);
  }
  SUBCASE("different identities") {
    ProgramPtr a = compile(ctx, mil, &w);
    GraphBuilder b;
    b.output("y", b.relu(b.input("x", {1, 16, 1, 16})));
    TensorMap empty;
    ProgramPtr other = compile(ctx, emit_mil(b.graph()), &empty);
    CHECK(code_of([&] { transfer_tmpdir_ownership(*a, *other); }) == ErrorCode::IdentityMismatch);
  }
}

TEST_CASE("1000 reloads under a 119-compile limit") {
  DeviceContext ctx;
  ctx.compile_limit = 119;
  Graph g = ffn_graph();
  TensorMap w = weights_for(g, 1), w2 = weights_for(g, 2);
  ProgramPtr p = compile(ctx, emit_mil(g), &w);
  const int compiles = ctx.compile_count;
  for (int i = 0; i < 1000; ++i) reload_weights(ctx, {p.get(), (i & 1) ? w : w2});
  CHECK(ctx.compile_count == compiles);
  CHECK(ctx.ledger().reloads == 1000);
}

TEST_CASE("property: reload equals a fresh compile on random graphs") {
  int tested = 0;
  for (uint64_t seed = 0; tested < 50; ++seed) {
    CAPTURE(seed);
    REQUIRE(seed < 1000);
    Graph g = run_pipeline(testing_support::random_graph(seed)).graph;
    MilProgram mil = emit_mil(g);
    TensorMap w = testing_support::random_weights(g, seed);
    if (w.empty()) continue;
    ++tested;
    TensorMap w2 = testing_support::random_weights(g, seed + 1000);
    TensorMap in = testing_support::random_inputs(g, seed);

    DeviceContext ctx;
    ProgramPtr p = compile(ctx, mil, &w);
    const ProgramIdentity id = p->identity;
    reload_weights(ctx, {p.get(), w2});
    CHECK(p->identity == id);
    CHECK(ctx.compile_count == 1);

    DeviceContext ref;
    ProgramPtr q = compile(ref, mil, &w2);
    CHECK(q->identity == id);
    TensorMap a = run_program(ctx, *p, in);
    TensorMap b = run_program(ref, *q, in);
    for (const auto& [name, t] : b) CHECK(bit_equal(a.at(name), t));
  }
}
