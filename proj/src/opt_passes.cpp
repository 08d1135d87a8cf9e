// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/opt_passes.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "forge/error.hpp"

namespace forge {

namespace {

// Points every use of `from` (consumer edges and graph outputs) at `to`.
// Returns the number of consumer nodes rewired.
int rewire(Graph& g, NodeId from, const Edge& to) {
  int rewired = 0;
  for (auto& [id, n] : g.nodes) {
    bool touched = false;
    for (Edge& e : n.inputs) {
      if (e.node == from) {
        e = to;
        touched = true;
      }
    }
    rewired += touched ? 1 : 0;
  }
  for (auto& [name, id] : g.outputs) {
    if (id == from) {
      // Outputs name whole nodes; a split slot cannot be an output target.
      id = to.node;
    }
  }
  return rewired;
}

bool is_used(const Graph& g, NodeId id) {
  for (const auto& [nid, n] : g.nodes)
    for (const Edge& e : n.inputs)
      if (e.node == id) return true;
  for (const auto& [name, oid] : g.outputs)
    if (oid == id) return true;
  return false;
}

bool is_output(const Graph& g, NodeId id) {
  for (const auto& [name, oid] : g.outputs)
    if (oid == id) return true;
  return false;
}

std::set<NodeId> reachable_from_outputs(const Graph& g) {
  std::set<NodeId> seen;
  std::vector<NodeId> stack;
  for (const auto& [name, id] : g.outputs)
    if (g.contains(id)) stack.push_back(id);
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    if (!seen.insert(id).second) continue;
    for (const Edge& e : g.node(id).inputs)
      if (g.contains(e.node)) stack.push_back(e.node);
  }
  return seen;
}

}  // namespace

PassReport pass_dce(Graph& graph) {
  PassReport report;
  report.pass_name = "dce";
  std::set<NodeId> live = reachable_from_outputs(graph);
  for (const auto& [name, id] : graph.inputs) live.insert(id);
  for (auto it = graph.nodes.begin(); it != graph.nodes.end();) {
    if (!live.count(it->first)) {
      it = graph.nodes.erase(it);
      ++report.nodes_removed;
    } else {
      ++it;
    }
  }
  if (graph.weights) {
    std::set<std::string> referenced;
    for (const auto& [id, n] : graph.nodes)
      if (n.kind == OpKind::const_ && n.has_attr("weight")) referenced.insert(n.str_attr("weight"));
    for (auto it = graph.weights->begin(); it != graph.weights->end();) {
      it = referenced.count(it->first) ? std::next(it) : graph.weights->erase(it);
    }
  }
  report.changed = report.nodes_removed > 0;
  return report;
}

PassReport pass_identity_elim(Graph& graph) {
  PassReport report;
  report.pass_name = "identity_elim";
  std::vector<NodeId> ids;
  for (const auto& [id, n] : graph.nodes) ids.push_back(id);
  for (NodeId id : ids) {
    const Node& n = graph.node(id);
    if (n.inputs.size() != 1) continue;
    const Edge src = n.inputs[0];
    bool noop = false;
    switch (n.kind) {
      case OpKind::cast: noop = graph.dtype_of(src) == n.out_dtype; break;
      case OpKind::reshape: noop = graph.shape_of(src) == n.out_shape; break;
      case OpKind::transpose: {
        const auto& perm = n.list_attr("perm");
        noop = true;
        for (size_t i = 0; i < perm.size(); ++i) noop = noop && perm[i] == static_cast<int64_t>(i);
        break;
      }
      default: break;
    }
    if (!noop) continue;
    // An output must name a whole node; keep no-ops that sit between a split
    // slot and an output.
    if (src.slot != 0 && is_output(graph, id)) continue;
    report.nodes_rewritten += rewire(graph, id, src);
    graph.nodes.erase(id);
    ++report.nodes_removed;
  }
  report.changed = report.nodes_removed + report.nodes_rewritten > 0;
  return report;
}

PassReport pass_cast_fusion(Graph& graph) {
  PassReport report;
  report.pass_name = "cast_fusion";
  std::vector<NodeId> ids;
  for (const auto& [id, n] : graph.nodes) ids.push_back(id);
  for (NodeId id : ids) {
    if (!graph.contains(id)) continue;
    const Node& outer = graph.node(id);
    if (outer.kind != OpKind::cast) continue;
    const Edge mid_edge = outer.inputs[0];
    const Node& mid = graph.node(mid_edge.node);
    if (mid.kind != OpKind::cast) continue;
    const Edge src = mid.inputs[0];
    // Only the widening round trip is value-preserving; fp32->fp16->fp32
    // rounds and is left alone.
    if (graph.dtype_of(src) != DType::fp16 || mid.out_dtype != DType::fp32 ||
        outer.out_dtype != DType::fp16)
      continue;
    if (src.slot != 0 && is_output(graph, id)) continue;
    const NodeId mid_id = mid.id;
    report.nodes_rewritten += rewire(graph, id, src);
    graph.nodes.erase(id);
    ++report.nodes_removed;
    if (!is_used(graph, mid_id)) {
      graph.nodes.erase(mid_id);
      ++report.nodes_removed;
    }
  }
  report.changed = report.nodes_removed + report.nodes_rewritten > 0;
  return report;
}

SramEstimate estimate_sram(const Graph& graph, int64_t budget_bytes) {
  SramEstimate est;
  est.budget_bytes = budget_bytes;
  std::vector<NodeId> order = topo_order(graph);

  auto bytes_of = [&](const Node& n) {
    return n.out_shape.numel() * dtype_bytes(n.out_dtype);
  };
  // Last step at which each non-const value is needed.
  std::map<NodeId, size_t> last_use;
  for (size_t i = 0; i < order.size(); ++i) {
    const Node& n = graph.node(order[i]);
    last_use[n.id] = std::max(last_use[n.id], i);
    for (const Edge& e : n.inputs) last_use[e.node] = std::max(last_use[e.node], i);
  }
  for (const auto& [name, id] : graph.outputs)
    if (graph.contains(id)) last_use[id] = order.size();

  for (size_t i = 0; i < order.size(); ++i) {
    const Node& n = graph.node(order[i]);
    if (n.kind == OpKind::const_ && !is_output(graph, n.id)) continue;
    int64_t live = 0;
    for (size_t j = 0; j <= i; ++j) {
      const Node& t = graph.node(order[j]);
      if (t.kind == OpKind::const_) continue;
      if (last_use[t.id] >= i) live += bytes_of(t);
    }
    std::set<NodeId> touched;
    if (n.kind == OpKind::const_) touched.insert(n.id);
    for (const Edge& e : n.inputs)
      if (graph.node(e.node).kind == OpKind::const_) touched.insert(e.node);
    for (NodeId w : touched) live += bytes_of(graph.node(w));
    est.working_set_bytes = std::max(est.working_set_bytes, live);
  }
  est.exceeded = est.working_set_bytes > est.budget_bytes;
  return est;
}

PassReport pass_sram_annotate(const Graph& graph, const PassOptions& options) {
  PassReport report;
  report.pass_name = "sram_annotate";
  report.sram = estimate_sram(graph, options.sram_budget_bytes);
  if (report.sram->exceeded) {
    report.warnings.push_back(
        {"working set " + std::to_string(report.sram->working_set_bytes) +
             " bytes exceeds the " + std::to_string(report.sram->budget_bytes) +
             "-byte SRAM budget; expect ~30% throughput loss",
         -1});
  }
  return report;
}

PassReport pass_constraint_validate(const Graph& graph, const PassOptions& options) {
  PassReport report;
  report.pass_name = "constraint_validate";
  auto violate = [&](int c, NodeId node, std::string msg) {
    report.violations.push_back({c, node, std::move(msg)});
  };

  // #11: the weight dictionary must exist even when empty.
  if (!graph.weights) violate(11, -1, "weight dictionary is absent; pass an empty one");

  // #14: outputs must reference live nodes.
  for (const auto& [name, id] : graph.outputs) {
    if (!graph.contains(id))
      violate(14, id, "output '" + name + "' references dead node " + std::to_string(id));
  }

  std::set<NodeId> reachable = reachable_from_outputs(graph);
  for (const auto& [id, n] : graph.nodes) {
    // #1: concat is rejected by the device compiler.
    if (n.kind == OpKind::concat_banned && reachable.count(id))
      violate(1, id, "concat on the output path; split into separate programs");
    // #16: very wide convolutions are rejected.
    if (n.kind == OpKind::conv1x1 && n.out_shape.rank() == 4 &&
        n.out_shape[1] > options.channel_limit)
      violate(16, id, "conv1x1 with " + std::to_string(n.out_shape[1]) +
                          " output channels exceeds the " +
                          std::to_string(options.channel_limit) + "-channel limit");
  }

  // #4: I/O tensors below the minimum surface size. The workaround is to pad
  // the sequence dimension to >= 16; adapter inputs bound as packed flat
  // buffers are padded at the surface instead.
  auto check_io = [&](const std::string& role, const std::string& name, NodeId id) {
    if (!graph.contains(id)) return;
    const Node& n = graph.node(id);
    if (n.kind == OpKind::input && n.int_attr_or("packed", 0) != 0) return;
    int64_t seq = n.out_shape.dims.back();
    if (seq < options.min_seq_dim)
      violate(4, id, role + " '" + name + "' " + n.out_shape.str() + " (" +
                         std::to_string(n.out_shape.numel() * dtype_bytes(n.out_dtype)) +
                         " bytes) is below the minimum surface size; pad seq dim to >= " +
                         std::to_string(options.min_seq_dim));
  };
  for (const auto& [name, id] : graph.inputs) check_io("input", name, id);
  for (const auto& [name, id] : graph.outputs) check_io("output", name, id);

  std::stable_sort(report.violations.begin(), report.violations.end(),
                   [](const Violation& a, const Violation& b) { return a.constraint < b.constraint; });
  return report;
}

PipelineResult run_pipeline(Graph graph, const PassOptions& options) {
  PipelineResult result;
  for (int iter = 1; iter <= kMaxFixpointIterations; ++iter) {
    result.iterations = iter;
    bool changed = false;
    PassReport r1 = pass_dce(graph);
    PassReport r2 = pass_identity_elim(graph);
    PassReport r3 = pass_cast_fusion(graph);
    PassReport r4 = pass_sram_annotate(graph, options);
    PassReport r5 = pass_constraint_validate(graph, options);
    for (PassReport* r : {&r1, &r2, &r3, &r4, &r5}) {
      changed = changed || r->changed;
      result.reports.push_back(*r);
    }
    if (!r5.violations.empty()) {
      std::string msg;
      for (const Violation& v : r5.violations)
        msg += (msg.empty() ? "" : "; ") + std::string("#") + std::to_string(v.constraint) +
               " " + v.message;
      throw Error(ErrorCode::ConstraintViolation, msg, r5.violations.front().constraint);
    }
    if (!changed) break;
  }
  result.graph = std::move(graph);
  return result;
}

std::string format_report(const PassReport& r) {
  std::ostringstream os;
  os << "{pass=" << r.pass_name << ", changed=" << (r.changed ? "true" : "false")
     << ", nodes_removed=" << r.nodes_removed << ", nodes_rewritten=" << r.nodes_rewritten;
  if (r.sram)
    os << ", working_set_bytes=" << r.sram->working_set_bytes
       << ", budget_bytes=" << r.sram->budget_bytes
       << ", exceeded=" << (r.sram->exceeded ? "true" : "false");
  os << ", warnings=[";
  for (size_t i = 0; i < r.warnings.size(); ++i)
    os << (i ? "; " : "") << r.warnings[i].text;
  os << "], violations=[";
  for (size_t i = 0; i < r.violations.size(); ++i)
    os << (i ? "; " : "") << "#" << r.violations[i].constraint << " node "
       << r.violations[i].node << ": " << r.violations[i].message;
  os << "]}";
  return os.str();
}

}  // namespace forge
