// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <sstream>

#include "forge/error.hpp"
#include "forge/graph_ir.hpp"
#include "text_util.hpp"

namespace forge {

// Format:
//   forge-graph 1
//   next_id <n>
//   weight <name> <dtype> <shape> [fixed=<v,...>]     (or "weights absent")
//   node <id> <op> in=[<id>[:slot],...] attrs={k=v, ...} shape=<shape> dtype=<dtype>
//   input <name> <id>
//   output <name> <id>
std::string to_text(const Graph& graph) {
  std::ostringstream os;
  os << "forge-graph 1\n";
  os << "next_id " << graph.next_id << "\n";
  if (!graph.weights) {
    os << "weights absent\n";
  } else {
    for (const auto& [name, spec] : *graph.weights) {
      os << "weight " << name << " " << dtype_name(spec.dtype) << " " << spec.shape.str();
      if (!spec.fixed.empty()) {
        os << " fixed=";
        for (size_t i = 0; i < spec.fixed.size(); ++i)
          os << (i ? "," : "") << text::format_float(spec.fixed[i]);
      }
      os << "\n";
    }
  }
  for (const auto& [id, n] : graph.nodes) {
    os << "node " << id << " " << op_name(n.kind) << " in=[";
    for (size_t i = 0; i < n.inputs.size(); ++i) {
      if (i) os << ",";
      os << n.inputs[i].node;
      if (n.inputs[i].slot) os << ":" << n.inputs[i].slot;
    }
    os << "] attrs={";
    bool first = true;
    for (const auto& [k, v] : n.attrs) {
      os << (first ? "" : ", ") << k << "=" << text::format_attr(v);
      first = false;
    }
    os << "} shape=" << n.out_shape.str() << " dtype=" << dtype_name(n.out_dtype) << "\n";
  }
  for (const auto& [name, id] : graph.inputs) os << "input " << name << " " << id << "\n";
  for (const auto& [name, id] : graph.outputs) os << "output " << name << " " << id << "\n";
  return os.str();
}

Graph parse_graph(std::string_view text) {
  Graph g;
  std::istringstream is{std::string(text)};
  std::string line;
  int lineno = 0;
  bool header = false;
  while (std::getline(is, line)) {
    ++lineno;
    text::Cursor c(line, lineno);
    if (c.done() || c.peek() == '#') continue;
    if (!header) {
      c.expect("forge-graph");
      if (c.integer() != 1) c.fail("unsupported graph version");
      header = true;
      continue;
    }
    std::string kw = c.ident();
    if (kw == "next_id") {
      g.next_id = std::max(g.next_id, c.integer());
    } else if (kw == "weights") {
      c.expect("absent");
      g.weights.reset();
    } else if (kw == "weight") {
      std::string name = c.ident();
      auto dt = parse_dtype(c.ident());
      if (!dt) c.fail("unknown dtype");
      WeightSpec spec{Shape(c.int_list()), *dt, {}};
      if (c.consume("fixed=")) {
        do {
          spec.fixed.push_back(static_cast<float>(c.real()));
        } while (c.consume(','));
      }
      g.mutable_weight_specs()[name] = std::move(spec);
    } else if (kw == "node") {
      Node n;
      n.id = c.integer();
      auto kind = parse_op(c.ident());
      if (!kind) c.fail("unknown op");
      n.kind = *kind;
      c.expect("in=");
      c.expect('[');
      if (!c.consume(']')) {
        do {
          Edge e(c.integer());
          if (c.consume(':')) e.slot = static_cast<int>(c.integer());
          n.inputs.push_back(e);
        } while (c.consume(','));
        c.expect(']');
      }
      c.expect("attrs=");
      c.expect('{');
      if (!c.consume('}')) {
        do {
          std::string key = c.ident();
          c.expect('=');
          n.attrs[key] = c.attr_value();
        } while (c.consume(','));
        c.expect('}');
      }
      c.expect("shape=");
      n.out_shape = Shape(c.int_list());
      c.expect("dtype=");
      auto dt = parse_dtype(c.ident());
      if (!dt) c.fail("unknown dtype");
      n.out_dtype = *dt;
      if (g.contains(n.id)) c.fail("duplicate node id");
      g.next_id = std::max(g.next_id, n.id + 1);
      g.nodes.emplace(n.id, std::move(n));
    } else if (kw == "input" || kw == "output") {
      std::string name = c.ident();
      NodeId id = c.integer();
      (kw == "input" ? g.inputs : g.outputs).emplace_back(name, id);
    } else {
      c.fail("unknown record '" + kw + "'");
    }
    if (!c.done()) c.fail("trailing characters");
  }
  if (!header) throw Error(ErrorCode::ParseError, "missing forge-graph header");
  infer_shapes(g);
  return g;
}

}  // namespace forge
