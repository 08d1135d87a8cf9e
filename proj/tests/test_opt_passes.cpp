// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <set>

#include "doctest.h"
#include "forge/error.hpp"
#include "forge/frontends.hpp"
#include "forge/numerics.hpp"
#include "forge/opt_passes.hpp"
#include "oracles.hpp"
#include "random_graphs.hpp"

using namespace forge;

namespace {

std::set<int> violated(const Graph& g, const PassOptions& o = {}) {
  std::set<int> out;
  for (const Violation& v : pass_constraint_validate(g, o).violations) out.insert(v.constraint);
  return out;
}

int pipeline_constraint(const Graph& g) {
  try {
    run_pipeline(g);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConstraintViolation);
    return e.constraint().value_or(0);
  }
  return 0;
}

}  // namespace

TEST_CASE("dce") {
  SUBCASE("orphan removed") {
    GraphBuilder b;
    Edge x = b.input("x", {1, 8, 1, 16});
    b.output("y", b.relu(x));
    b.tanh(x);
    Graph g = b.take();
    PassReport r = pass_dce(g);
    CHECK(r.nodes_removed == 1);
    CHECK(r.changed);
    CHECK(g.nodes.size() == 2);
  }
  SUBCASE("fully reachable graph unchanged") {
    GraphBuilder b;
    b.output("y", b.relu(b.input("x", {1, 8, 1, 16})));
    Graph g = b.take();
    Graph before = g;
    PassReport r = pass_dce(g);
    CHECK_FALSE(r.changed);
    CHECK(g == before);
  }
  SUBCASE("orphan subtree matches an independent reachability walk") {
    GraphBuilder b;
    Edge x = b.input("x", {1, 8, 1, 16});
    b.output("y", b.relu(x));
    Edge w = b.weight("dead", {8, 8, 1, 1});
    b.sigmoid(b.conv(x, w));
    Graph g = b.take();
    const size_t live = oracle::reachable(g).size();
    PassReport r = pass_dce(g);
    CHECK(r.nodes_removed == 3);
    CHECK(g.nodes.size() == live);
    CHECK(g.weight_specs().count("dead") == 0);
  }
  SUBCASE("unused graph inputs survive") {
    GraphBuilder b;
    b.input("unused", {1, 8, 1, 16});
    b.output("y", b.relu(b.input("x", {1, 8, 1, 16})));
    Graph g = b.take();
    pass_dce(g);
    CHECK(g.input("unused").has_value());
  }
}

TEST_CASE("identity elimination") {
  GraphBuilder b;
  Edge x = b.input("x", {1, 8, 1, 16});
  Edge c = b.cast(x, DType::fp16);
  Edge r = b.reshape(c, {1, 8, 1, 16});
  Edge t = b.transpose(r, {0, 1, 2, 3});
  b.output("y", b.relu(t));
  Graph g = b.take();
  PassReport rep = pass_identity_elim(g);
  CHECK(rep.nodes_removed == 3);
  CHECK(g.nodes.size() == 2);
  CHECK(g.node(*g.output("y")).inputs[0].node == *g.input("x"));

  SUBCASE("real reshapes and transposes stay") {
    GraphBuilder b2;
    Edge x2 = b2.input("x", {1, 8, 1, 16});
    b2.output("y", b2.transpose(b2.reshape(x2, {1, 16, 1, 8}), {0, 3, 2, 1}));
    Graph g2 = b2.take();
    CHECK_FALSE(pass_identity_elim(g2).changed);
  }
}

TEST_CASE("output that is itself an identity is rewired to the survivor") {
  GraphBuilder b;
  Edge x = b.input("x", {1, 8, 1, 16});
  Edge r = b.relu(x);
  b.output("y", b.cast(r, DType::fp16));
  Graph g = b.take();
  pass_identity_elim(g);
  CHECK(*g.output("y") == r.node);
}

TEST_CASE("cast fusion") {
  SUBCASE("single-consumer round trip collapses") {
    GraphBuilder b;
    Edge x = b.input("x", {1, 8, 1, 16});
    Edge back = b.cast(b.cast(x, DType::fp32), DType::fp16);
    b.output("y", b.relu(back));
    Graph g = b.take();
    PassReport r = pass_cast_fusion(g);
    CHECK(r.nodes_removed == 2);
    CHECK(g.nodes.size() == 2);
  }
  SUBCASE("no round trip, no fusion") {
    GraphBuilder b;
    Edge x = b.input("x", {1, 8, 1, 16});
    Edge up = b.cast(x, DType::fp32);
    b.output("y", b.cast(b.relu(up), DType::fp16));
    Graph g = b.take();
    CHECK_FALSE(pass_cast_fusion(g).changed);
  }
  SUBCASE("tapped intermediate is kept and semantics are preserved") {
    GraphBuilder b;
    Edge x = b.input("x", {1, 8, 1, 16});
    Edge up = b.cast(x, DType::fp32);
    Edge back = b.cast(up, DType::fp16);
    b.output("y", b.relu(back));
    b.output("z", b.cast(b.exp(up), DType::fp16));
    Graph g = b.take();
    TensorMap in = testing_support::random_inputs(g, 3);
    TensorMap before = interpret_graph(g, in, {}, Precision::fp32);
    pass_cast_fusion(g);
    pass_dce(g);
    CHECK(g.contains(up.node));
    TensorMap after = interpret_graph(g, in, {}, Precision::fp32);
    for (const auto& [name, t] : before) CHECK(bit_equal(t, after.at(name)));
  }
}

TEST_CASE("sram estimate") {
  SUBCASE("single tensor") {
    GraphBuilder b;
    Edge x = b.input("x", {1, 768, 1, 16});
    b.output("y", x);
    SramEstimate e = estimate_sram(b.graph());
    CHECK(e.working_set_bytes == 768 * 16 * 2);
    CHECK_FALSE(e.exceeded);
  }
  SUBCASE("empty graph") { CHECK(estimate_sram(Graph{}).working_set_bytes == 0); }
  SUBCASE("20M-element weight exceeds the budget and warns") {
    GraphBuilder b;
    Edge x = b.input("x", {1, 5000, 1, 16});
    b.output("y", b.conv(x, b.weight("big", {4000, 5000, 1, 1})));
    PassReport r = pass_sram_annotate(b.graph());
    REQUIRE(r.sram.has_value());
    CHECK(r.sram->working_set_bytes >= 40'000'000);
    CHECK(r.sram->exceeded == (r.sram->working_set_bytes > r.sram->budget_bytes));
    CHECK(r.sram->exceeded);
    CHECK(r.warnings.size() == 1);
    CHECK_FALSE(r.changed);
  }
}

TEST_CASE("constraint validation") {
  SUBCASE("#1 concat on the output path") {
    GraphBuilder b;
    Edge x = b.input("x", {1, 8, 1, 16});
    b.output("y", b.concat({x, x}, 1));
    CHECK(violated(b.graph()) == std::set<int>{1});
    CHECK(pipeline_constraint(b.graph()) == 1);
  }
  SUBCASE("dead concat is removed by dce before validation") {
    GraphBuilder b;
    Edge x = b.input("x", {1, 8, 1, 16});
    b.output("y", b.relu(x));
    b.concat({x, x}, 1);
    CHECK(pipeline_constraint(b.graph()) == 0);
  }
  SUBCASE("#4 undersized output, and the padded workaround") {
    GraphBuilder b;
    Edge x = b.input("x", {1, 768, 1, 16});
    Edge r = b.reduce_sum(x, 3);
    b.output("y", r);
    CHECK(violated(b.graph()) == std::set<int>{4});
    CHECK(pipeline_constraint(b.graph()) == 4);
    GraphBuilder fixed;
    Edge x2 = fixed.input("x", {1, 768, 1, 16});
    fixed.output("y", fixed.pad(fixed.reduce_sum(x2, 3), 3, 0, 15));
    CHECK(violated(fixed.graph()).empty());
  }
  SUBCASE("#11 absent weight dictionary") {
    GraphBuilder b;
    b.output("y", b.relu(b.input("x", {1, 8, 1, 16})));
    Graph g = b.take();
    CHECK(violated(g).empty());
    g.weights.reset();
    CHECK(violated(g) == std::set<int>{11});
  }
  SUBCASE("#14 output referencing a dead node") {
    GraphBuilder b;
    b.output("y", b.relu(b.input("x", {1, 8, 1, 16})));
    Graph g = b.take();
    g.outputs[0].second = 77;
    CHECK(violated(g).count(14));
  }
  SUBCASE("#16 32000-channel conv, configurable limit") {
    GraphBuilder b;
    Edge x = b.input("x", {1, 64, 1, 16});
    b.output("y", b.conv(x, b.weight("w", {32000, 64, 1, 1})));
    CHECK(violated(b.graph()) == std::set<int>{16});
    PassOptions loose;
    loose.channel_limit = 32000;
    CHECK(violated(b.graph(), loose).empty());
    GraphBuilder ok;
    Edge x2 = ok.input("x", {1, 64, 1, 16});
    ok.output("y", ok.conv(x2, ok.weight("w", {16384, 64, 1, 1})));
    CHECK(violated(ok.graph()).empty());
  }
  SUBCASE("clean frontend graph") {
    Graph g = build_frontend("prefill_ffn", gpt2_toy_config(), {});
    CHECK(violated(g).empty());
  }
  SUBCASE("validation never mutates") {
    GraphBuilder b;
    Edge x = b.input("x", {1, 8, 1, 16});
    b.output("y", b.concat({x, x}, 1));
    Graph before = b.graph();
    pass_constraint_validate(b.graph());
    CHECK(b.graph() == before);
  }
}

TEST_CASE("pipeline fixpoint") {
  SUBCASE("optimal graph runs one clean iteration") {
    GraphBuilder b;
    b.output("y", b.relu(b.input("x", {1, 8, 1, 16})));
    PipelineResult r = run_pipeline(b.take());
    CHECK(r.iterations == 1);
    CHECK(r.reports.size() == 5);
    for (const PassReport& p : r.reports) CHECK_FALSE(p.changed);
  }
  SUBCASE("unreachable const removed then clean") {
    GraphBuilder b;
    b.output("y", b.relu(b.input("x", {1, 8, 1, 16})));
    b.weight("orphan", {8, 8, 1, 1});
    PipelineResult r = run_pipeline(b.take());
    CHECK(r.iterations == 2);
    CHECK(r.reports[0].nodes_removed == 1);
    CHECK(r.graph.nodes.size() == 2);
  }
  SUBCASE("report text") {
    GraphBuilder b;
    b.output("y", b.relu(b.input("x", {1, 8, 1, 16})));
    PipelineResult r = run_pipeline(b.take());
    CHECK(format_report(r.reports[0]).find("pass=dce") != std::string::npos);
    CHECK(format_report(r.reports[3]).find("working_set_bytes=") != std::string::npos);
  }
}

TEST_CASE("property: pipeline is idempotent and terminates") {
  for (uint64_t seed = 0; seed < 100; ++seed) {
    CAPTURE(seed);
    Graph g = testing_support::random_graph(seed);
    PipelineResult once = run_pipeline(g);
    CHECK(once.iterations <= kMaxFixpointIterations);
    CHECK(once.graph.nodes.size() <= g.nodes.size());
    PipelineResult twice = run_pipeline(once.graph);
    CHECK(twice.graph == once.graph);
    CHECK(twice.iterations == 1);
  }
}

TEST_CASE("property: passes 1-3 preserve fp32 outputs exactly") {
  for (uint64_t seed = 0; seed < 100; ++seed) {
    CAPTURE(seed);
    Graph g = testing_support::random_graph(seed);
    TensorMap in = testing_support::random_inputs(g, seed + 1);
    TensorMap w = testing_support::random_weights(g, seed + 2);
    TensorMap before = interpret_graph(g, in, w, Precision::fp32);
    Graph opt = g;
    size_t last = opt.nodes.size();
    for (int i = 0; i < kMaxFixpointIterations; ++i) {
      bool changed = pass_dce(opt).changed;
      changed = pass_identity_elim(opt).changed || changed;
      changed = pass_cast_fusion(opt).changed || changed;
      CHECK(opt.nodes.size() <= last);
      last = opt.nodes.size();
      if (!changed) break;
    }
    TensorMap after = interpret_graph(opt, in, w, Precision::fp32);
    REQUIRE(after.size() == before.size());
    for (const auto& [name, t] : before) CHECK(bit_equal(t, after.at(name)));
  }
}
