// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <map>
#include <set>

#include "doctest.h"
#include "forge/error.hpp"
#include "forge/graph_ir.hpp"
#include "forge/numerics.hpp"
#include "oracles.hpp"
#include "random_graphs.hpp"

using namespace forge;

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

}  // namespace

TEST_CASE("the IR has exactly 27 operations and names round-trip") {
  CHECK(all_op_kinds().size() == 27);
  CHECK(kOpKindCount == 27);
  std::set<std::string> names;
  for (OpKind k : all_op_kinds()) {
    names.insert(op_name(k));
    REQUIRE(parse_op(op_name(k)).has_value());
    CHECK(*parse_op(op_name(k)) == k);
  }
  CHECK(names.size() == 27);
  CHECK_FALSE(parse_op("gelu").has_value());
  CHECK(dtype_bytes(DType::fp16) == 2);
  CHECK(dtype_bytes(DType::fp32) == 4);
  CHECK(dtype_bytes(DType::int32) == 4);
}

TEST_CASE("shape inference") {
  GraphBuilder b;
  Edge x = b.input("x", {1, 8, 1, 16});
  Edge y = b.input("y", {1, 8, 1, 16});
  CHECK(b.graph().shape_of(b.add(x, y)) == Shape{1, 8, 1, 16});
  CHECK(b.graph().shape_of(b.reduce_sum(x, 3)) == Shape{1, 8, 1, 1});

  Edge a = b.input("a", {1, 1, 4, 8});
  Edge m = b.input("m", {1, 1, 8, 2});
  CHECK(b.graph().shape_of(b.matmul(a, m)) == Shape{1, 1, 4, 2});
  CHECK(b.graph().shape_of(b.matmul(m, a, true, true)) == Shape{1, 1, 2, 4});

  Edge wide = b.input("wide", {1, 64, 1, 16});
  CHECK(b.graph().shape_of(b.conv(wide, b.weight("w", {128, 64, 1, 1}))) == Shape{1, 128, 1, 16});
  CHECK(b.graph().shape_of(b.transpose(wide, {0, 3, 2, 1})) == Shape{1, 16, 1, 64});
  Edge vocab = b.input("logits", {1, 32000, 1, 16});
  CHECK(b.graph().shape_of(b.softmax(vocab, 1)) == Shape{1, 32000, 1, 16});

  NodeId sp = b.split(x, 1, {3, 5});
  CHECK(b.graph().shape_of(Edge(sp, 0)) == Shape{1, 3, 1, 16});
  CHECK(b.graph().shape_of(Edge(sp, 1)) == Shape{1, 5, 1, 16});
  CHECK(b.graph().shape_of(b.pad(x, 3, 2, 6)) == Shape{1, 8, 1, 24});
  CHECK(b.graph().shape_of(b.slice(x, 3, 4, 12)) == Shape{1, 8, 1, 8});
  CHECK(b.graph().dtype_of(b.cast(x, DType::fp32)) == DType::fp32);
}

TEST_CASE("matmul shape rule agrees with a brute-force product") {
  GraphBuilder b;
  Edge a = b.input("a", {1, 1, 4, 8}, DType::fp32);
  Edge m = b.input("m", {1, 1, 8, 2}, DType::fp32);
  b.output("c", b.matmul(a, m));
  Graph g = b.take();
  Tensor ta({1, 1, 4, 8}), tm({1, 1, 8, 2});
  for (size_t i = 0; i < ta.data.size(); ++i) ta.data[i] = static_cast<float>(i % 5) - 2.0f;
  for (size_t i = 0; i < tm.data.size(); ++i) tm.data[i] = static_cast<float>(i % 3) * 0.5f;
  TensorMap out = interpret_graph(g, {{"a", ta}, {"m", tm}}, {}, Precision::fp32);
  std::vector<double> da(ta.data.begin(), ta.data.end()), dm(tm.data.begin(), tm.data.end());
  std::vector<double> ref = oracle::matmul(da, dm, 4, 8, 2);
  REQUIRE(out.at("c").shape == Shape{1, 1, 4, 2});
  for (size_t i = 0; i < ref.size(); ++i) CHECK(out.at("c").data[i] == doctest::Approx(ref[i]));
}

TEST_CASE("add_node errors") {
  GraphBuilder b;
  Edge x = b.input("x", {1, 8, 1, 16});
  Edge y = b.input("y", {1, 4, 1, 16});
  CHECK(code_of([&] { b.add(x, y); }) == ErrorCode::ShapeMismatch);
  CHECK(code_of([&] { b.op(OpKind::relu, {Edge(99)}); }) == ErrorCode::UnknownInput);
  CHECK(code_of([&] { b.op(OpKind::reduce_sum, {x}); }) == ErrorCode::MissingAttr);
  CHECK(code_of([&] { b.op(OpKind::transpose, {x}); }) == ErrorCode::MissingAttr);
  CHECK(code_of([&] { b.op(OpKind::reshape, {x}); }) == ErrorCode::MissingAttr);
  CHECK(code_of([&] { b.reshape(x, {1, 7, 1, 16}); }) == ErrorCode::ShapeMismatch);
  CHECK(code_of([&] { b.output("x2", x); b.output("x2", x); }) != ErrorCode::UsageError);
}

TEST_CASE("topo_order") {
  SUBCASE("chain") {
    GraphBuilder b;
    Edge a = b.input("a", {1, 4, 1, 16});
    Edge c = b.relu(b.tanh(a));
    b.output("c", c);
    CHECK(topo_order(b.graph()) == std::vector<NodeId>{0, 1, 2});
  }
  SUBCASE("diamond breaks ties by id") {
    GraphBuilder b;
    Edge a = b.input("a", {1, 4, 1, 16});
    Edge l = b.relu(a);
    Edge r = b.tanh(a);
    b.output("d", b.add(l, r));
    CHECK(topo_order(b.graph()) == std::vector<NodeId>{0, 1, 2, 3});
  }
  SUBCASE("empty") { CHECK(topo_order(Graph{}).empty()); }
  SUBCASE("cycle") {
    Graph g;
    Node n0;
    n0.id = 0;
    n0.kind = OpKind::relu;
    n0.inputs = {Edge(1)};
    Node n1 = n0;
    n1.id = 1;
    n1.inputs = {Edge(0)};
    g.nodes[0] = n0;
    g.nodes[1] = n1;
    g.next_id = 2;
    CHECK(code_of([&] { topo_order(g); }) == ErrorCode::CycleDetected);
  }
}

TEST_CASE("infer_shapes reports conflicts and is idempotent") {
  GraphBuilder b;
  Edge x = b.input("x", {1, 8, 1, 16});
  b.output("y", b.relu(x));
  Graph g = b.take();
  Graph again = g;
  infer_shapes(again);
  CHECK(again == g);
  g.node(1).out_shape = Shape{1, 9, 1, 16};
  CHECK(code_of([&] { infer_shapes(g); }) == ErrorCode::ShapeConflict);
}

TEST_CASE("property: text round trip on random graphs") {
  for (uint64_t seed = 0; seed < 60; ++seed) {
    CAPTURE(seed);
    Graph g = testing_support::random_graph(seed);
    std::string text = to_text(g);
    Graph back = parse_graph(text);
    infer_shapes(back);
    CHECK(back == g);
    CHECK(to_text(back) == text);
  }
}

TEST_CASE("property: topo_order is a permutation respecting every edge") {
  for (uint64_t seed = 100; seed < 160; ++seed) {
    Graph g = testing_support::random_graph(seed);
    std::vector<NodeId> order = topo_order(g);
    REQUIRE(order.size() == g.nodes.size());
    std::map<NodeId, size_t> pos;
    for (size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
    CHECK(pos.size() == order.size());
    for (const auto& [id, n] : g.nodes)
      for (const Edge& e : n.inputs) CHECK(pos.at(e.node) < pos.at(id));
  }
}

TEST_CASE("property: fp32 interpretation is deterministic") {
  for (uint64_t seed = 200; seed < 230; ++seed) {
    Graph g = testing_support::random_graph(seed);
    TensorMap in = testing_support::random_inputs(g, seed);
    TensorMap w = testing_support::random_weights(g, seed);
    TensorMap a = interpret_graph(g, in, w, Precision::fp32);
    TensorMap b = interpret_graph(g, in, w, Precision::fp32);
    for (const auto& [name, t] : a) CHECK(bit_equal(t, b.at(name)));
  }
}

TEST_CASE("parse errors") {
  CHECK(code_of([] { parse_graph("forge-graph 1\nnode 0 bogus in=[]\n"); }) == ErrorCode::ParseError);
  CHECK(code_of([] { parse_graph("not a graph"); }) == ErrorCode::ParseError);
}
