// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/graph_ir.hpp"

#include <algorithm>
#include <queue>
#include <sstream>

#include "forge/error.hpp"

namespace forge {

const char* dtype_name(DType dtype) {
  switch (dtype) {
    case DType::fp16: return "fp16";
    case DType::fp32: return "fp32";
    case DType::int32: return "int32";
  }
  return "?";
}

std::optional<DType> parse_dtype(std::string_view name) {
  if (name == "fp16") return DType::fp16;
  if (name == "fp32") return DType::fp32;
  if (name == "int32") return DType::int32;
  return std::nullopt;
}

int64_t dtype_bytes(DType dtype) { return dtype == DType::fp16 ? 2 : 4; }

int64_t Shape::numel() const {
  int64_t n = 1;
  for (int64_t d : dims) n *= d;
  return n;
}

std::string Shape::str() const {
  std::string out = "[";
  for (size_t i = 0; i < dims.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(dims[i]);
  }
  return out + "]";
}

Shape device_shape(int64_t channels, int64_t seq) { return Shape{1, channels, 1, seq}; }

namespace {

struct OpInfo {
  OpKind kind;
  const char* name;
};

constexpr OpInfo kOps[] = {
    {OpKind::input, "input"},
    {OpKind::const_, "const"},
    {OpKind::identity, "identity"},
    {OpKind::conv1x1, "conv1x1"},
    {OpKind::matmul, "matmul"},
    {OpKind::add, "add"},
    {OpKind::sub, "sub"},
    {OpKind::mul, "mul"},
    {OpKind::neg, "neg"},
    {OpKind::relu, "relu"},
    {OpKind::tanh, "tanh"},
    {OpKind::sigmoid, "sigmoid"},
    {OpKind::exp, "exp"},
    {OpKind::pow, "pow"},
    {OpKind::sqrt, "sqrt"},
    {OpKind::rsqrt, "rsqrt"},
    {OpKind::reduce_sum, "reduce_sum"},
    {OpKind::reduce_mean, "reduce_mean"},
    {OpKind::reduce_max, "reduce_max"},
    {OpKind::reshape, "reshape"},
    {OpKind::transpose, "transpose"},
    {OpKind::split, "split"},
    {OpKind::pad, "pad"},
    {OpKind::slice, "slice"},
    {OpKind::cast, "cast"},
    {OpKind::softmax, "softmax"},
    {OpKind::concat_banned, "concat_banned"},
};

static_assert(sizeof(kOps) / sizeof(kOps[0]) == kOpKindCount);

}  // namespace

const char* op_name(OpKind kind) {
  for (const auto& op : kOps)
    if (op.kind == kind) return op.name;
  return "?";
}

std::optional<OpKind> parse_op(std::string_view name) {
  for (const auto& op : kOps)
    if (name == op.name) return op.kind;
  return std::nullopt;
}

const std::vector<OpKind>& all_op_kinds() {
  static const std::vector<OpKind> kinds = [] {
    std::vector<OpKind> out;
    for (const auto& op : kOps) out.push_back(op.kind);
    return out;
  }();
  return kinds;
}

// ---------------------------------------------------------------------------
// Node attribute accessors

namespace {

[[noreturn]] void missing_attr(const Node& n, const std::string& key) {
  throw Error(ErrorCode::MissingAttr, std::string(op_name(n.kind)) + " node " +
                                          std::to_string(n.id) + " requires attr '" +
                                          key + "'");
}

}  // namespace

int64_t Node::int_attr(const std::string& key) const {
  auto it = attrs.find(key);
  if (it == attrs.end()) missing_attr(*this, key);
  if (auto* v = std::get_if<int64_t>(&it->second)) return *v;
  if (auto* d = std::get_if<double>(&it->second)) return static_cast<int64_t>(*d);
  missing_attr(*this, key);
}

int64_t Node::int_attr_or(const std::string& key, int64_t fallback) const {
  return has_attr(key) ? int_attr(key) : fallback;
}

double Node::float_attr(const std::string& key) const {
  auto it = attrs.find(key);
  if (it == attrs.end()) missing_attr(*this, key);
  if (auto* d = std::get_if<double>(&it->second)) return *d;
  if (auto* v = std::get_if<int64_t>(&it->second)) return static_cast<double>(*v);
  missing_attr(*this, key);
}

double Node::float_attr_or(const std::string& key, double fallback) const {
  return has_attr(key) ? float_attr(key) : fallback;
}

const std::vector<int64_t>& Node::list_attr(const std::string& key) const {
  auto it = attrs.find(key);
  if (it == attrs.end()) missing_attr(*this, key);
  if (auto* v = std::get_if<std::vector<int64_t>>(&it->second)) return *v;
  missing_attr(*this, key);
}

const std::string& Node::str_attr(const std::string& key) const {
  auto it = attrs.find(key);
  if (it == attrs.end()) missing_attr(*this, key);
  if (auto* v = std::get_if<std::string>(&it->second)) return *v;
  missing_attr(*this, key);
}

// ---------------------------------------------------------------------------
// Graph accessors

const Node& Graph::node(NodeId id) const {
  auto it = nodes.find(id);
  if (it == nodes.end())
    throw Error(ErrorCode::UnknownInput, "no node with id " + std::to_string(id));
  return it->second;
}

Node& Graph::node(NodeId id) {
  auto it = nodes.find(id);
  if (it == nodes.end())
    throw Error(ErrorCode::UnknownInput, "no node with id " + std::to_string(id));
  return it->second;
}

const WeightSpecs& Graph::weight_specs() const {
  static const WeightSpecs kEmpty;
  return weights ? *weights : kEmpty;
}

WeightSpecs& Graph::mutable_weight_specs() {
  if (!weights) weights.emplace();
  return *weights;
}

const Shape& Graph::shape_of(const Edge& e) const {
  const Node& n = node(e.node);
  if (n.kind == OpKind::split) {
    if (e.slot < 0 || static_cast<size_t>(e.slot) >= n.slot_shapes.size())
      throw Error(ErrorCode::UnknownInput, "split node " + std::to_string(n.id) +
                                               " has no slot " + std::to_string(e.slot));
    return n.slot_shapes[e.slot];
  }
  if (e.slot != 0)
    throw Error(ErrorCode::UnknownInput, "node " + std::to_string(n.id) +
                                             " has a single output; slot " +
                                             std::to_string(e.slot) + " requested");
  return n.out_shape;
}

std::optional<NodeId> Graph::output(const std::string& name) const {
  for (const auto& [n, id] : outputs)
    if (n == name) return id;
  return std::nullopt;
}

std::optional<NodeId> Graph::input(const std::string& name) const {
  for (const auto& [n, id] : inputs)
    if (n == name) return id;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Shape inference

namespace {

[[noreturn]] void shape_mismatch(const Node& n, const std::string& what) {
  throw Error(ErrorCode::ShapeMismatch,
              std::string(op_name(n.kind)) + " node " + std::to_string(n.id) + ": " + what);
}

int64_t normalize_axis(const Node& n, int64_t axis, size_t rank) {
  int64_t r = static_cast<int64_t>(rank);
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r)
    shape_mismatch(n, "axis " + std::to_string(axis) + " out of range for rank " +
                          std::to_string(rank));
  return axis;
}

Shape broadcast(const Node& n, const Shape& a, const Shape& b) {
  size_t rank = std::max(a.rank(), b.rank());
  std::vector<int64_t> out(rank);
  for (size_t i = 0; i < rank; ++i) {
    int64_t da = i < rank - a.rank() ? 1 : a.dims[i - (rank - a.rank())];
    int64_t db = i < rank - b.rank() ? 1 : b.dims[i - (rank - b.rank())];
    if (da != db && da != 1 && db != 1)
      shape_mismatch(n, "cannot broadcast " + a.str() + " with " + b.str());
    out[i] = std::max(da, db);
  }
  return Shape(out);
}

void check_shape_valid(const Node& n, const Shape& s) {
  if (s.rank() < 1 || s.rank() > 4)
    shape_mismatch(n, "rank must be 1-4, got " + s.str());
  for (int64_t d : s.dims)
    if (d < 1) shape_mismatch(n, "dims must be >= 1, got " + s.str());
}

struct Inferred {
  Shape shape;
  DType dtype;
  std::vector<Shape> slots;
};

Inferred infer_node(const Graph& g, const Node& n) {
  auto in_shape = [&](size_t i) -> const Shape& { return g.shape_of(n.inputs.at(i)); };
  auto in_dtype = [&](size_t i) { return g.dtype_of(n.inputs.at(i)); };
  auto arity = [&](size_t want) {
    if (n.inputs.size() != want)
      shape_mismatch(n, "expects " + std::to_string(want) + " inputs, got " +
                            std::to_string(n.inputs.size()));
  };

  switch (n.kind) {
    case OpKind::input: {
      arity(0);
      n.str_attr("name");
      Shape s(n.list_attr("shape"));
      check_shape_valid(n, s);
      DType dt = DType::fp16;
      if (n.has_attr("dtype")) {
        auto parsed = parse_dtype(n.str_attr("dtype"));
        if (!parsed) shape_mismatch(n, "unknown dtype " + n.str_attr("dtype"));
        dt = *parsed;
      }
      return {s, dt, {}};
    }
    case OpKind::const_: {
      arity(0);
      if (n.has_attr("weight")) {
        const std::string& name = n.str_attr("weight");
        auto it = g.weight_specs().find(name);
        if (it == g.weight_specs().end())
          throw Error(ErrorCode::MissingAttr, "const node " + std::to_string(n.id) +
                                                  " references undeclared weight '" + name +
                                                  "'");
        return {it->second.shape, it->second.dtype, {}};
      }
      n.float_attr("value");
      Shape s = n.has_attr("shape") ? Shape(n.list_attr("shape")) : Shape{1, 1, 1, 1};
      check_shape_valid(n, s);
      DType dt = DType::fp16;
      if (n.has_attr("dtype")) dt = parse_dtype(n.str_attr("dtype")).value_or(DType::fp16);
      return {s, dt, {}};
    }
    case OpKind::identity:
    case OpKind::neg:
    case OpKind::relu:
    case OpKind::tanh:
    case OpKind::sigmoid:
    case OpKind::exp:
    case OpKind::sqrt:
    case OpKind::rsqrt:
      arity(1);
      return {in_shape(0), in_dtype(0), {}};
    case OpKind::pow:
      arity(1);
      n.float_attr("exponent");
      return {in_shape(0), in_dtype(0), {}};
    case OpKind::add:
    case OpKind::sub:
    case OpKind::mul:
      arity(2);
      return {broadcast(n, in_shape(0), in_shape(1)), in_dtype(0), {}};
    case OpKind::conv1x1: {
      arity(2);
      const Shape& x = in_shape(0);
      const Shape& w = in_shape(1);
      if (x.rank() != 4) shape_mismatch(n, "input must be rank 4, got " + x.str());
      if (w.rank() != 4 || w[2] != 1 || w[3] != 1)
        shape_mismatch(n, "weight must be [Cout,Cin,1,1], got " + w.str());
      if (w[1] != x[1])
        shape_mismatch(n, "weight Cin " + std::to_string(w[1]) + " != input channels " +
                              std::to_string(x[1]));
      return {Shape{x[0], w[0], x[2], x[3]}, in_dtype(0), {}};
    }
    case OpKind::matmul: {
      arity(2);
      Shape a = in_shape(0);
      Shape b = in_shape(1);
      if (a.rank() < 2 || b.rank() < 2) shape_mismatch(n, "operands must be rank >= 2");
      bool tx = n.int_attr_or("transpose_x", 0) != 0;
      bool ty = n.int_attr_or("transpose_y", 0) != 0;
      int64_t m = tx ? a.dims[a.rank() - 1] : a.dims[a.rank() - 2];
      int64_t ka = tx ? a.dims[a.rank() - 2] : a.dims[a.rank() - 1];
      int64_t kb = ty ? b.dims[b.rank() - 1] : b.dims[b.rank() - 2];
      int64_t nn = ty ? b.dims[b.rank() - 2] : b.dims[b.rank() - 1];
      if (ka != kb)
        shape_mismatch(n, "inner dims differ: " + a.str() + " x " + b.str());
      Shape ba(std::vector<int64_t>(a.dims.begin(), a.dims.end() - 2));
      Shape bb(std::vector<int64_t>(b.dims.begin(), b.dims.end() - 2));
      Shape batch = ba.empty() ? bb : (bb.empty() ? ba : broadcast(n, ba, bb));
      std::vector<int64_t> out = batch.dims;
      out.push_back(m);
      out.push_back(nn);
      return {Shape(out), in_dtype(0), {}};
    }
    case OpKind::reduce_sum:
    case OpKind::reduce_mean:
    case OpKind::reduce_max: {
      arity(1);
      Shape s = in_shape(0);
      int64_t axis = normalize_axis(n, n.int_attr("axis"), s.rank());
      s.dims[axis] = 1;
      return {s, in_dtype(0), {}};
    }
    case OpKind::reshape: {
      arity(1);
      Shape s(n.list_attr("shape"));
      check_shape_valid(n, s);
      if (s.numel() != in_shape(0).numel())
        shape_mismatch(n, "cannot reshape " + in_shape(0).str() + " to " + s.str());
      return {s, in_dtype(0), {}};
    }
    case OpKind::transpose: {
      arity(1);
      const Shape& s = in_shape(0);
      const auto& perm = n.list_attr("perm");
      if (perm.size() != s.rank()) shape_mismatch(n, "perm rank != input rank");
      std::vector<int64_t> seen(s.rank(), 0);
      std::vector<int64_t> out(s.rank());
      for (size_t i = 0; i < perm.size(); ++i) {
        if (perm[i] < 0 || perm[i] >= static_cast<int64_t>(s.rank()) || seen[perm[i]]++)
          shape_mismatch(n, "perm is not a permutation");
        out[i] = s.dims[perm[i]];
      }
      return {Shape(out), in_dtype(0), {}};
    }
    case OpKind::split: {
      arity(1);
      const Shape& s = in_shape(0);
      int64_t axis = normalize_axis(n, n.int_attr("axis"), s.rank());
      const auto& sizes = n.list_attr("sizes");
      int64_t total = 0;
      std::vector<Shape> slots;
      for (int64_t sz : sizes) {
        if (sz < 1) shape_mismatch(n, "split sizes must be positive");
        total += sz;
        Shape piece = s;
        piece.dims[axis] = sz;
        slots.push_back(piece);
      }
      if (sizes.empty() || total != s.dims[axis])
        shape_mismatch(n, "split sizes do not cover axis of " + s.str());
      return {slots.front(), in_dtype(0), slots};
    }
    case OpKind::pad: {
      arity(1);
      Shape s = in_shape(0);
      int64_t axis = normalize_axis(n, n.int_attr("axis"), s.rank());
      int64_t before = n.int_attr("before");
      int64_t after = n.int_attr("after");
      if (before < 0 || after < 0) shape_mismatch(n, "negative padding");
      s.dims[axis] += before + after;
      return {s, in_dtype(0), {}};
    }
    case OpKind::slice: {
      arity(1);
      Shape s = in_shape(0);
      int64_t axis = normalize_axis(n, n.int_attr("axis"), s.rank());
      int64_t begin = n.int_attr("begin");
      int64_t end = n.int_attr("end");
      if (begin < 0 || end > s.dims[axis] || begin >= end)
        shape_mismatch(n, "slice [" + std::to_string(begin) + "," + std::to_string(end) +
                              ") out of range for " + s.str());
      s.dims[axis] = end - begin;
      return {s, in_dtype(0), {}};
    }
    case OpKind::cast: {
      arity(1);
      auto dt = parse_dtype(n.str_attr("dtype"));
      if (!dt) shape_mismatch(n, "unknown dtype " + n.str_attr("dtype"));
      return {in_shape(0), *dt, {}};
    }
    case OpKind::softmax: {
      arity(1);
      normalize_axis(n, n.int_attr("axis"), in_shape(0).rank());
      return {in_shape(0), in_dtype(0), {}};
    }
    case OpKind::concat_banned: {
      if (n.inputs.empty()) shape_mismatch(n, "concat needs inputs");
      Shape s = in_shape(0);
      int64_t axis = normalize_axis(n, n.int_attr("axis"), s.rank());
      for (size_t i = 1; i < n.inputs.size(); ++i) {
        const Shape& o = in_shape(i);
        if (o.rank() != s.rank()) shape_mismatch(n, "rank mismatch in concat");
        for (size_t d = 0; d < s.rank(); ++d)
          if (static_cast<int64_t>(d) != axis && o.dims[d] != s.dims[d])
            shape_mismatch(n, "non-axis dims differ in concat");
        s.dims[axis] += o.dims[axis];
      }
      return {s, in_dtype(0), {}};
    }
  }
  shape_mismatch(n, "unhandled op");
}

void check_inputs_exist(const Graph& g, const Node& n) {
  for (const Edge& e : n.inputs) {
    if (!g.contains(e.node))
      throw Error(ErrorCode::UnknownInput, std::string(op_name(n.kind)) + " node " +
                                               std::to_string(n.id) +
                                               " references unknown node " +
                                               std::to_string(e.node));
  }
}

}  // namespace

NodeId add_node(Graph& graph, OpKind kind, const std::vector<Edge>& inputs,
                const AttrMap& attrs) {
  Node n;
  n.id = graph.next_id;
  n.kind = kind;
  n.inputs = inputs;
  n.attrs = attrs;
  check_inputs_exist(graph, n);
  for (const Edge& e : inputs) {
    if (e.node >= n.id)
      throw Error(ErrorCode::UnknownInput, "input " + std::to_string(e.node) +
                                               " does not precede new node");
  }
  Inferred inf = infer_node(graph, n);
  n.out_shape = inf.shape;
  n.out_dtype = inf.dtype;
  n.slot_shapes = inf.slots;
  graph.nodes.emplace(n.id, std::move(n));
  return graph.next_id++;
}

std::vector<NodeId> topo_order(const Graph& graph) {
  std::map<NodeId, int> pending;
  std::map<NodeId, std::vector<NodeId>> users;
  for (const auto& [id, n] : graph.nodes) {
    int deps = 0;
    for (const Edge& e : n.inputs) {
      if (!graph.contains(e.node))
        throw Error(ErrorCode::UnknownInput, "node " + std::to_string(id) +
                                                 " references unknown node " +
                                                 std::to_string(e.node));
      users[e.node].push_back(id);
      ++deps;
    }
    pending[id] = deps;
  }
  std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
  for (const auto& [id, deps] : pending)
    if (deps == 0) ready.push(id);
  std::vector<NodeId> order;
  order.reserve(graph.nodes.size());
  while (!ready.empty()) {
    NodeId id = ready.top();
    ready.pop();
    order.push_back(id);
    for (NodeId u : users[id])
      if (--pending[u] == 0) ready.push(u);
  }
  if (order.size() != graph.nodes.size())
    throw Error(ErrorCode::CycleDetected, "graph contains a cycle");
  return order;
}

void infer_shapes(Graph& graph) {
  for (NodeId id : topo_order(graph)) {
    Node& n = graph.node(id);
    Inferred inf = infer_node(graph, n);
    if (n.out_shape.empty()) {
      n.out_shape = inf.shape;
      n.out_dtype = inf.dtype;
      n.slot_shapes = inf.slots;
      continue;
    }
    if (n.out_shape != inf.shape || n.out_dtype != inf.dtype) {
      throw Error(ErrorCode::ShapeConflict,
                  "node " + std::to_string(id) + " (" + op_name(n.kind) + "): expected " +
                      inf.shape.str() + " " + dtype_name(inf.dtype) + ", actual " +
                      n.out_shape.str() + " " + dtype_name(n.out_dtype));
    }
    n.slot_shapes = inf.slots;
  }
}

std::vector<NodeId> consumers_of(const Graph& graph, NodeId id) {
  std::vector<NodeId> out;
  for (const auto& [nid, n] : graph.nodes) {
    for (const Edge& e : n.inputs) {
      if (e.node == id) {
        out.push_back(nid);
        break;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Builder

Edge GraphBuilder::input(const std::string& name, const Shape& shape, DType dtype,
                         bool packed) {
  AttrMap attrs{{"name", name}, {"shape", shape.dims}, {"dtype", std::string(dtype_name(dtype))}};
  if (packed) attrs["packed"] = int64_t{1};
  NodeId id = add_node(graph_, OpKind::input, {}, attrs);
  graph_.inputs.emplace_back(name, id);
  return id;
}

Edge GraphBuilder::weight(const std::string& name, const Shape& shape, DType dtype,
                          std::vector<float> fixed) {
  graph_.mutable_weight_specs()[name] = WeightSpec{shape, dtype, std::move(fixed)};
  return add_node(graph_, OpKind::const_, {}, {{"weight", name}});
}

Edge GraphBuilder::scalar(double value, DType dtype) {
  return add_node(graph_, OpKind::const_, {},
                  {{"value", value}, {"dtype", std::string(dtype_name(dtype))}});
}

Edge GraphBuilder::op(OpKind kind, const std::vector<Edge>& inputs, const AttrMap& attrs) {
  return add_node(graph_, kind, inputs, attrs);
}

Edge GraphBuilder::clamp(Edge x, double lo, double hi) {
  return op(OpKind::identity, {x}, {{"clamp_lo", lo}, {"clamp_hi", hi}});
}

Edge GraphBuilder::matmul(Edge a, Edge b, bool transpose_x, bool transpose_y) {
  AttrMap attrs;
  if (transpose_x) attrs["transpose_x"] = int64_t{1};
  if (transpose_y) attrs["transpose_y"] = int64_t{1};
  return op(OpKind::matmul, {a, b}, attrs);
}

Edge GraphBuilder::pow(Edge x, double exponent) {
  return op(OpKind::pow, {x}, {{"exponent", exponent}});
}

Edge GraphBuilder::reduce_sum(Edge x, int64_t axis) {
  return op(OpKind::reduce_sum, {x}, {{"axis", axis}});
}
Edge GraphBuilder::reduce_mean(Edge x, int64_t axis) {
  return op(OpKind::reduce_mean, {x}, {{"axis", axis}});
}
Edge GraphBuilder::reduce_max(Edge x, int64_t axis) {
  return op(OpKind::reduce_max, {x}, {{"axis", axis}});
}

Edge GraphBuilder::reshape(Edge x, const Shape& shape) {
  return op(OpKind::reshape, {x}, {{"shape", shape.dims}});
}

Edge GraphBuilder::transpose(Edge x, const std::vector<int64_t>& perm) {
  return op(OpKind::transpose, {x}, {{"perm", perm}});
}

NodeId GraphBuilder::split(Edge x, int64_t axis, const std::vector<int64_t>& sizes) {
  return add_node(graph_, OpKind::split, {x}, {{"axis", axis}, {"sizes", sizes}});
}

Edge GraphBuilder::pad(Edge x, int64_t axis, int64_t before, int64_t after, double value) {
  return op(OpKind::pad, {x},
            {{"axis", axis}, {"before", before}, {"after", after}, {"value", value}});
}

Edge GraphBuilder::slice(Edge x, int64_t axis, int64_t begin, int64_t end) {
  return op(OpKind::slice, {x}, {{"axis", axis}, {"begin", begin}, {"end", end}});
}

Edge GraphBuilder::cast(Edge x, DType dtype) {
  return op(OpKind::cast, {x}, {{"dtype", std::string(dtype_name(dtype))}});
}

Edge GraphBuilder::softmax(Edge x, int64_t axis) {
  return op(OpKind::softmax, {x}, {{"axis", axis}});
}

Edge GraphBuilder::concat(const std::vector<Edge>& xs, int64_t axis) {
  return op(OpKind::concat_banned, xs, {{"axis", axis}});
}

void GraphBuilder::output(const std::string& name, Edge value) {
  if (graph_.output(name))
    throw Error(ErrorCode::ShapeMismatch, "duplicate output name '" + name + "'");
  if (value.slot != 0) value = identity(value);
  graph_.outputs.emplace_back(name, value.node);
}

}  // namespace forge
