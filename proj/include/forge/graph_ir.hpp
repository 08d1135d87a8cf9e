// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <initializer_list>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace forge {

enum class DType { fp16, fp32, int32 };

const char* dtype_name(DType dtype);
std::optional<DType> parse_dtype(std::string_view name);
/// Storage size of one element. fp16 is the device-native 2-byte type.
int64_t dtype_bytes(DType dtype);

struct Shape {
  std::vector<int64_t> dims;

  Shape() = default;
  Shape(std::initializer_list<int64_t> d) : dims(d) {}
  explicit Shape(std::vector<int64_t> d) : dims(std::move(d)) {}

  size_t rank() const { return dims.size(); }
  int64_t numel() const;
  int64_t operator[](size_t i) const { return dims[i]; }
  bool empty() const { return dims.empty(); }
  std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Device tensors are rank-4 [1, C, 1, S].
Shape device_shape(int64_t channels, int64_t seq);

// The 27 operations of the graph IR.
enum class OpKind {
  input,
  const_,
  identity,
  conv1x1,
  matmul,
  add,
  sub,
  mul,
  neg,
  relu,
  tanh,
  sigmoid,
  exp,
  pow,
  sqrt,
  rsqrt,
  reduce_sum,
  reduce_mean,
  reduce_max,
  reshape,
  transpose,
  split,
  pad,
  slice,
  cast,
  softmax,
  concat_banned,
};

inline constexpr int kOpKindCount = 27;

const char* op_name(OpKind kind);
std::optional<OpKind> parse_op(std::string_view name);
const std::vector<OpKind>& all_op_kinds();

using NodeId = int64_t;

/// One attribute value: an integer, an fp64 scalar, an integer list or a
/// string (weight names, dtype tags). Tensors never live in attributes.
using Attr = std::variant<int64_t, double, std::vector<int64_t>, std::string>;
using AttrMap = std::map<std::string, Attr>;

/// A use of a node's value. `slot` selects one piece of a split; every other
/// op produces a single value at slot 0.
struct Edge {
  NodeId node = -1;
  int slot = 0;

  Edge() = default;
  Edge(NodeId n, int s = 0) : node(n), slot(s) {}  // NOLINT: implicit by design of the builder API

  friend bool operator==(const Edge&, const Edge&) = default;
};

struct Node {
  NodeId id = -1;
  OpKind kind = OpKind::identity;
  std::vector<Edge> inputs;
  AttrMap attrs;
  Shape out_shape;
  DType out_dtype = DType::fp16;
  // Per-slot shapes; only populated for split.
  std::vector<Shape> slot_shapes;

  bool has_attr(const std::string& key) const { return attrs.count(key) != 0; }
  int64_t int_attr(const std::string& key) const;
  int64_t int_attr_or(const std::string& key, int64_t fallback) const;
  double float_attr(const std::string& key) const;
  double float_attr_or(const std::string& key, double fallback) const;
  const std::vector<int64_t>& list_attr(const std::string& key) const;
  const std::string& str_attr(const std::string& key) const;

  friend bool operator==(const Node&, const Node&) = default;
};

/// Declared weight. `fixed` holds values the graph owns (e.g. an additive
/// causal mask); empty means the caller binds the values.
struct WeightSpec {
  Shape shape;
  DType dtype = DType::fp16;
  std::vector<float> fixed;

  friend bool operator==(const WeightSpec&, const WeightSpec&) = default;
};

using WeightSpecs = std::map<std::string, WeightSpec>;

struct Graph {
  std::map<NodeId, Node> nodes;
  std::vector<std::pair<std::string, NodeId>> inputs;
  std::vector<std::pair<std::string, NodeId>> outputs;
  // Absent (nullopt) is distinct from empty.
  std::optional<WeightSpecs> weights = WeightSpecs{};
  NodeId next_id = 0;

  const Node& node(NodeId id) const;
  Node& node(NodeId id);
  bool contains(NodeId id) const { return nodes.count(id) != 0; }
  const WeightSpecs& weight_specs() const;
  WeightSpecs& mutable_weight_specs();
  const Shape& shape_of(const Edge& e) const;
  DType dtype_of(const Edge& e) const { return node(e.node).out_dtype; }
  std::optional<NodeId> output(const std::string& name) const;
  std::optional<NodeId> input(const std::string& name) const;

  friend bool operator==(const Graph&, const Graph&) = default;
};

/// Appends a node, inferring its output shape and dtype.
NodeId add_node(Graph& graph, OpKind kind, const std::vector<Edge>& inputs,
                const AttrMap& attrs = {});

/// Fills every empty out_shape and verifies every populated one.
void infer_shapes(Graph& graph);

/// Inputs before consumers; ties broken by ascending id.
std::vector<NodeId> topo_order(const Graph& graph);

/// Ids of every node that consumes `id`, ascending.
std::vector<NodeId> consumers_of(const Graph& graph, NodeId id);

/// Line-oriented text form; `parse_graph(to_text(g))` rebuilds `g`.
std::string to_text(const Graph& graph);
Graph parse_graph(std::string_view text);

/// Thin builder used by the frontends and tests.
class GraphBuilder {
 public:
  GraphBuilder() = default;
  explicit GraphBuilder(Graph graph) : graph_(std::move(graph)) {}

  Edge input(const std::string& name, const Shape& shape,
             DType dtype = DType::fp16, bool packed = false);
  Edge weight(const std::string& name, const Shape& shape,
              DType dtype = DType::fp16, std::vector<float> fixed = {});
  Edge scalar(double value, DType dtype = DType::fp16);
  Edge op(OpKind kind, const std::vector<Edge>& inputs, const AttrMap& attrs = {});

  Edge identity(Edge x) { return op(OpKind::identity, {x}); }
  Edge clamp(Edge x, double lo, double hi);
  Edge conv(Edge x, Edge w) { return op(OpKind::conv1x1, {x, w}); }
  Edge matmul(Edge a, Edge b, bool transpose_x = false, bool transpose_y = false);
  Edge add(Edge a, Edge b) { return op(OpKind::add, {a, b}); }
  Edge sub(Edge a, Edge b) { return op(OpKind::sub, {a, b}); }
  Edge mul(Edge a, Edge b) { return op(OpKind::mul, {a, b}); }
  Edge neg(Edge x) { return op(OpKind::neg, {x}); }
  Edge relu(Edge x) { return op(OpKind::relu, {x}); }
  Edge tanh(Edge x) { return op(OpKind::tanh, {x}); }
  Edge sigmoid(Edge x) { return op(OpKind::sigmoid, {x}); }
  Edge exp(Edge x) { return op(OpKind::exp, {x}); }
  Edge pow(Edge x, double exponent);
  Edge sqrt(Edge x) { return op(OpKind::sqrt, {x}); }
  Edge rsqrt(Edge x) { return op(OpKind::rsqrt, {x}); }
  Edge reduce_sum(Edge x, int64_t axis);
  Edge reduce_mean(Edge x, int64_t axis);
  Edge reduce_max(Edge x, int64_t axis);
  Edge reshape(Edge x, const Shape& shape);
  Edge transpose(Edge x, const std::vector<int64_t>& perm);
  NodeId split(Edge x, int64_t axis, const std::vector<int64_t>& sizes);
  Edge pad(Edge x, int64_t axis, int64_t before, int64_t after, double value = 0.0);
  Edge slice(Edge x, int64_t axis, int64_t begin, int64_t end);
  Edge cast(Edge x, DType dtype);
  Edge softmax(Edge x, int64_t axis);
  Edge concat(const std::vector<Edge>& xs, int64_t axis);

  void output(const std::string& name, Edge value);

  Graph& graph() { return graph_; }
  Graph take() { return std::move(graph_); }

 private:
  Graph graph_;
};

}  // namespace forge
