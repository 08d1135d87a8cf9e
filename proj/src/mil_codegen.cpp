// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/mil_codegen.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "forge/error.hpp"
#include "text_util.hpp"

namespace forge {

std::vector<uint8_t> to_bytes(std::string_view text) {
  return std::vector<uint8_t>(text.begin(), text.end());
}

std::string from_bytes(const std::vector<uint8_t>& bytes) {
  return std::string(bytes.begin(), bytes.end());
}

std::string weight_blob_path(const std::string& weight_name) {
  return "weights/" + weight_name + ".blob";
}

const MilAttr* MilStatement::attr(const std::string& key) const {
  for (const auto& [k, v] : attrs)
    if (k == key) return &v;
  return nullptr;
}

namespace {

std::string format_mil_attr(const MilAttr& a) {
  if (auto* b = std::get_if<bool>(&a)) return *b ? "true" : "false";
  if (auto* r = std::get_if<BlobRef>(&a))
    return "blobfile(" + text::quote(r->path) + ", offset=" + std::to_string(r->offset) + ")";
  if (auto* i = std::get_if<int64_t>(&a)) return std::to_string(*i);
  if (auto* d = std::get_if<double>(&a)) return text::format_double(*d);
  if (auto* l = std::get_if<std::vector<int64_t>>(&a)) return text::format_list(*l);
  return text::quote(std::get<std::string>(a));
}

MilAttr to_mil_attr(const Attr& a) {
  return std::visit([](const auto& v) -> MilAttr { return v; }, a);
}

std::string format_type(const TensorType& t) {
  return std::string("tensor<") + dtype_name(t.dtype) + "," + text::format_list(t.shape.dims) + ">";
}

std::string format_arg(const MilArg& a) {
  return "%" + a.var + (a.slot ? ":" + std::to_string(a.slot) : "");
}

std::string var_name(NodeId id) { return "v" + std::to_string(id); }

MilArg arg_of(const Edge& e) { return {var_name(e.node), e.slot}; }

using AttrList = std::vector<std::pair<std::string, MilAttr>>;

AttrList sorted(AttrList attrs) {
  std::sort(attrs.begin(), attrs.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return attrs;
}

}  // namespace

std::string format_mil(const MilFunction& fn) {
  std::ostringstream os;
  os << "main(";
  for (size_t i = 0; i < fn.params.size(); ++i)
    os << (i ? ", " : "") << fn.params[i].first << ": " << format_type(fn.params[i].second);
  os << ") -> (";
  for (size_t i = 0; i < fn.header_outputs.size(); ++i)
    os << (i ? ", " : "") << fn.header_outputs[i];
  os << ") {\n";
  for (const MilStatement& s : fn.body) {
    os << "  %" << s.var << " = " << s.op << "(";
    for (size_t i = 0; i < s.args.size(); ++i) os << (i ? ", " : "") << format_arg(s.args[i]);
    os << ")[";
    for (size_t i = 0; i < s.attrs.size(); ++i)
      os << (i ? ", " : "") << s.attrs[i].first << "=" << format_mil_attr(s.attrs[i].second);
    os << "];\n";
  }
  os << "  return(";
  for (size_t i = 0; i < fn.returns.size(); ++i)
    os << (i ? ", " : "") << fn.returns[i].first << "=" << format_arg(fn.returns[i].second);
  os << ");\n}\n";
  return os.str();
}

MilProgram emit_mil(const Graph& graph) {
  MilProgram prog;
  MilFunction fn;

  for (const auto& [id, n] : graph.nodes) {
    if (n.has_attr("activation") && std::holds_alternative<std::string>(n.attrs.at("activation")) &&
        n.str_attr("activation") == "gelu")
      throw Error(ErrorCode::UnexpandedGelu,
                  "node " + std::to_string(id) + " still carries a gelu activation", 10);
  }

  for (const auto& [name, id] : graph.inputs) {
    const Node& n = graph.node(id);
    fn.params.emplace_back(name, TensorType{n.out_dtype, n.out_shape});
  }
  std::sort(fn.params.begin(), fn.params.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  for (NodeId id : topo_order(graph)) {
    const Node& n = graph.node(id);
    MilStatement s;
    s.var = var_name(id);
    for (const Edge& e : n.inputs) s.args.push_back(arg_of(e));
    AttrList attrs;
    switch (n.kind) {
      case OpKind::input:
        s.op = "input";
        attrs.emplace_back("name", n.str_attr("name"));
        if (n.int_attr_or("packed", 0) != 0) attrs.emplace_back("packed", true);
        break;
      case OpKind::const_:
        s.op = "const";
        if (n.has_attr("weight")) {
          const std::string& wname = n.str_attr("weight");
          const WeightSpec& spec = graph.weight_specs().at(wname);
          WeightRef ref{weight_blob_path(wname), kBlobPayloadOffset, spec.shape.numel(),
                        spec.dtype, spec.shape};
          attrs.emplace_back("dtype", std::string(dtype_name(spec.dtype)));
          attrs.emplace_back("name", wname);
          attrs.emplace_back("shape", spec.shape.dims);
          attrs.emplace_back("val", BlobRef{ref.path, ref.offset});
          prog.weight_manifest[wname] = ref;
          if (!spec.fixed.empty()) prog.embedded[wname] = Tensor(spec.shape, spec.fixed);
        } else {
          for (const auto& [k, v] : n.attrs) attrs.emplace_back(k, to_mil_attr(v));
        }
        break;
      case OpKind::identity:
        if (n.has_attr("clamp_lo") || n.has_attr("clamp_hi")) {
          s.op = "clip";
          attrs.emplace_back("alpha", n.float_attr_or("clamp_lo", -65504.0));
          attrs.emplace_back("beta", n.float_attr_or("clamp_hi", 65504.0));
        } else {
          s.op = "identity";
        }
        break;
      case OpKind::matmul: {
        s.op = "matmul";
        for (const char* flag : {"transpose_x", "transpose_y"}) {
          MilStatement c;
          c.var = s.var + "_" + flag;
          c.op = "const";
          c.attrs.emplace_back("val", n.int_attr_or(flag, 0) != 0);
          fn.body.push_back(c);
          s.args.push_back({c.var, 0});
        }
        for (const auto& [k, v] : n.attrs)
          if (k != "transpose_x" && k != "transpose_y") attrs.emplace_back(k, to_mil_attr(v));
        break;
      }
      case OpKind::conv1x1:
        s.op = "conv";
        for (const auto& [k, v] : n.attrs) attrs.emplace_back(k, to_mil_attr(v));
        break;
      case OpKind::concat_banned:
        s.op = "concat";
        for (const auto& [k, v] : n.attrs) attrs.emplace_back(k, to_mil_attr(v));
        break;
      default:
        s.op = op_name(n.kind);
        for (const auto& [k, v] : n.attrs) attrs.emplace_back(k, to_mil_attr(v));
        break;
    }
    s.attrs = sorted(std::move(attrs));
    fn.body.push_back(std::move(s));
  }

  std::vector<std::pair<std::string, NodeId>> outs = graph.outputs;
  std::sort(outs.begin(), outs.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [name, id] : outs) {
    fn.header_outputs.push_back(name);
    fn.returns.emplace_back(name, MilArg{var_name(id), 0});
  }

  for (const MilStatement& s : fn.body) {
    if (s.op == "matmul" && (s.attr("transpose_x") || s.attr("transpose_y")))
      throw Error(ErrorCode::InlineTransposeFlag,
                  "matmul %" + s.var + " carries an inline transpose flag", 12);
  }

  prog.text_bytes = to_bytes(format_mil(fn));
  for (const auto& [name, type] : fn.params) {
    prog.input_params.push_back(name);
    prog.param_types[name] = type;
  }
  prog.output_vars = fn.header_outputs;
  return prog;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

MilAttr parse_mil_attr(text::Cursor& c) {
  char p = c.peek();
  if (p == '[') return c.int_list();
  if (p == '"') return c.quoted();
  if (c.consume(std::string_view("true"))) return true;
  if (c.consume(std::string_view("false"))) return false;
  if (c.consume(std::string_view("blobfile"))) {
    c.expect('(');
    BlobRef r;
    r.path = c.quoted();
    c.expect(',');
    c.expect("offset");
    c.expect('=');
    int64_t off = c.integer();
    if (off < 0) c.fail("negative blob offset");
    r.offset = static_cast<uint64_t>(off);
    c.expect(')');
    return r;
  }
  Attr a = c.number();
  return to_mil_attr(a);
}

MilArg parse_arg(text::Cursor& c) {
  c.expect('%');
  MilArg a;
  a.var = c.ident();
  if (c.consume(':')) a.slot = static_cast<int>(c.integer());
  return a;
}

TensorType parse_type(text::Cursor& c) {
  c.expect("tensor");
  c.expect('<');
  std::string dt = c.ident();
  auto dtype = parse_dtype(dt);
  if (!dtype) c.fail("unknown dtype '" + dt + "'");
  c.expect(',');
  TensorType t{*dtype, Shape(c.int_list())};
  c.expect('>');
  return t;
}

}  // namespace

MilFunction parse_mil_text(std::string_view source) {
  MilFunction fn;
  text::Cursor c(source);
  c.expect("main");
  c.expect('(');
  if (!c.consume(')')) {
    do {
      std::string name = c.ident();
      c.expect(':');
      fn.params.emplace_back(name, parse_type(c));
    } while (c.consume(','));
    c.expect(')');
  }
  c.expect("->");
  c.expect('(');
  if (!c.consume(')')) {
    do {
      fn.header_outputs.push_back(c.ident());
    } while (c.consume(','));
    c.expect(')');
  }
  c.expect('{');
  while (true) {
    if (c.consume(std::string_view("return"))) {
      c.expect('(');
      if (!c.consume(')')) {
        do {
          std::string name = c.ident();
          c.expect('=');
          fn.returns.emplace_back(name, parse_arg(c));
        } while (c.consume(','));
        c.expect(')');
      }
      c.expect(';');
      break;
    }
    MilStatement s;
    c.expect('%');
    s.var = c.ident();
    c.expect('=');
    s.op = c.ident();
    c.expect('(');
    if (!c.consume(')')) {
      do {
        s.args.push_back(parse_arg(c));
      } while (c.consume(','));
      c.expect(')');
    }
    if (c.consume('[')) {
      if (!c.consume(']')) {
        do {
          std::string key = c.ident();
          c.expect('=');
          s.attrs.emplace_back(key, parse_mil_attr(c));
        } while (c.consume(','));
        c.expect(']');
      }
    }
    c.expect(';');
    fn.body.push_back(std::move(s));
  }
  c.expect('}');
  if (!c.done()) c.fail("trailing text after program");
  return fn;
}

namespace {

Attr to_ir_attr(const MilAttr& a, const std::string& key) {
  if (auto* b = std::get_if<bool>(&a)) return int64_t{*b ? 1 : 0};
  if (std::holds_alternative<BlobRef>(a))
    throw Error(ErrorCode::InvalidProgram, "blobfile value only allowed on const ('" + key + "')");
  return std::visit(
      [](const auto& v) -> Attr {
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, bool> ||
                      std::is_same_v<std::decay_t<decltype(v)>, BlobRef>)
          return int64_t{0};
        else
          return v;
      },
      a);
}

std::optional<NodeId> numeric_var_id(const std::string& var) {
  if (var.size() < 2 || var[0] != 'v') return std::nullopt;
  NodeId id = 0;
  for (size_t i = 1; i < var.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(var[i]))) return std::nullopt;
    id = id * 10 + (var[i] - '0');
  }
  return id;
}

const std::string& str_of(const MilStatement& s, const std::string& key) {
  const MilAttr* a = s.attr(key);
  if (!a || !std::holds_alternative<std::string>(*a))
    throw Error(ErrorCode::InvalidProgram, "%" + s.var + ": missing string attribute '" + key + "'");
  return std::get<std::string>(*a);
}

double real_of(const MilStatement& s, const std::string& key) {
  const MilAttr* a = s.attr(key);
  if (a) {
    if (auto* d = std::get_if<double>(a)) return *d;
    if (auto* i = std::get_if<int64_t>(a)) return static_cast<double>(*i);
  }
  throw Error(ErrorCode::InvalidProgram, "%" + s.var + ": missing numeric attribute '" + key + "'");
}

}  // namespace

Graph mil_to_graph(const MilFunction& fn) {
  Graph g;
  std::map<std::string, TensorType> params(fn.params.begin(), fn.params.end());
  std::map<std::string, Edge> vars;
  std::map<std::string, bool> flags;

  auto lookup = [&](const MilStatement& s, const MilArg& a) -> Edge {
    auto it = vars.find(a.var);
    if (it == vars.end())
      throw Error(ErrorCode::InvalidProgram,
                  "%" + s.var + " uses undefined variable %" + a.var);
    return Edge(it->second.node, a.slot);
  };

  for (const MilStatement& s : fn.body) {
    if (vars.count(s.var) || flags.count(s.var))
      throw Error(ErrorCode::InvalidProgram, "variable %" + s.var + " defined twice");
    if (s.op == "const") {
      const MilAttr* val = s.attr("val");
      if (val && std::holds_alternative<bool>(*val)) {
        flags[s.var] = std::get<bool>(*val);
        continue;
      }
    }
    if (auto id = numeric_var_id(s.var); id && *id >= g.next_id) g.next_id = *id;

    std::vector<Edge> ins;
    AttrMap attrs;
    OpKind kind;
    if (s.op == "gelu") {
      throw Error(ErrorCode::BannedOp, "%" + s.var + ": gelu is not a valid activation", 10);
    } else if (s.op == "input") {
      const std::string& name = str_of(s, "name");
      auto it = params.find(name);
      if (it == params.end())
        throw Error(ErrorCode::InvalidProgram, "input '" + name + "' is not a parameter");
      kind = OpKind::input;
      attrs = {{"name", name},
               {"shape", it->second.shape.dims},
               {"dtype", std::string(dtype_name(it->second.dtype))}};
      if (const MilAttr* p = s.attr("packed"); p && std::get_if<bool>(p) && std::get<bool>(*p))
        attrs["packed"] = int64_t{1};
      NodeId nid = add_node(g, kind, {}, attrs);
      g.inputs.emplace_back(name, nid);
      vars[s.var] = nid;
      continue;
    } else if (s.op == "const") {
      const MilAttr* val = s.attr("val");
      if (val && std::holds_alternative<BlobRef>(*val)) {
        const std::string& name = str_of(s, "name");
        auto dtype = parse_dtype(str_of(s, "dtype"));
        const MilAttr* shape = s.attr("shape");
        if (!dtype || !shape || !std::holds_alternative<std::vector<int64_t>>(*shape))
          throw Error(ErrorCode::InvalidProgram, "%" + s.var + ": weight const needs dtype and shape");
        g.mutable_weight_specs()[name] =
            WeightSpec{Shape(std::get<std::vector<int64_t>>(*shape)), *dtype, {}};
        vars[s.var] = add_node(g, OpKind::const_, {}, {{"weight", name}});
        continue;
      }
      kind = OpKind::const_;
      for (const auto& [k, v] : s.attrs) attrs[k] = to_ir_attr(v, k);
    } else if (s.op == "clip") {
      kind = OpKind::identity;
      attrs = {{"clamp_lo", real_of(s, "alpha")}, {"clamp_hi", real_of(s, "beta")}};
    } else if (s.op == "matmul") {
      if (s.attr("transpose_x") || s.attr("transpose_y"))
        throw Error(ErrorCode::MilRejected,
                    "%" + s.var + ": matmul transpose flags must be named const inputs", 12);
      if (s.args.size() != 2 && s.args.size() != 4)
        throw Error(ErrorCode::InvalidProgram, "%" + s.var + ": matmul takes 2 or 4 arguments");
      kind = OpKind::matmul;
      for (size_t i = 2; i < s.args.size(); ++i) {
        auto it = flags.find(s.args[i].var);
        if (it == flags.end())
          throw Error(ErrorCode::MilRejected,
                      "%" + s.var + ": transpose flag %" + s.args[i].var + " is not a named bool const",
                      12);
        if (it->second) attrs[i == 2 ? "transpose_x" : "transpose_y"] = int64_t{1};
      }
      for (const auto& [k, v] : s.attrs) attrs[k] = to_ir_attr(v, k);
      ins = {lookup(s, s.args[0]), lookup(s, s.args[1])};
      vars[s.var] = add_node(g, kind, ins, attrs);
      continue;
    } else if (s.op == "conv") {
      if (s.attr("bias") || s.args.size() > 2)
        throw Error(ErrorCode::MilRejected,
                    "%" + s.var + ": conv does not accept a bias; emit a separate add", 13);
      kind = OpKind::conv1x1;
      for (const auto& [k, v] : s.attrs) attrs[k] = to_ir_attr(v, k);
    } else if (s.op == "concat") {
      kind = OpKind::concat_banned;
      for (const auto& [k, v] : s.attrs) attrs[k] = to_ir_attr(v, k);
    } else {
      auto parsed = parse_op(s.op);
      if (!parsed || *parsed == OpKind::conv1x1 || *parsed == OpKind::concat_banned)
        throw Error(ErrorCode::InvalidProgram, "%" + s.var + ": unknown op '" + s.op + "'");
      kind = *parsed;
      for (const auto& [k, v] : s.attrs) attrs[k] = to_ir_attr(v, k);
    }
    for (const MilArg& a : s.args) ins.push_back(lookup(s, a));
    vars[s.var] = add_node(g, kind, ins, attrs);
  }

  std::set<std::string> header(fn.header_outputs.begin(), fn.header_outputs.end());
  for (const auto& [name, arg] : fn.returns) {
    auto it = vars.find(arg.var);
    if (it == vars.end())
      throw Error(ErrorCode::InvalidProgram,
                  "output '" + name + "' references undefined variable %" + arg.var, 14);
    if (!header.count(name))
      throw Error(ErrorCode::InvalidProgram, "output '" + name + "' missing from signature");
    if (g.output(name)) throw Error(ErrorCode::InvalidProgram, "output '" + name + "' returned twice");
    NodeId id = it->second.node;
    if (arg.slot != 0) id = add_node(g, OpKind::identity, {Edge(id, arg.slot)});
    g.outputs.emplace_back(name, id);
  }
  if (g.outputs.size() != header.size())
    throw Error(ErrorCode::InvalidProgram, "signature lists outputs that are never returned");
  for (const auto& [name, type] : fn.params)
    if (!g.input(name))
      throw Error(ErrorCode::InvalidProgram, "parameter '" + name + "' has no input statement");
  return g;
}

MilProgram parse_mil(std::string_view source) {
  MilFunction fn = parse_mil_text(source);
  MilProgram prog;
  prog.text_bytes = to_bytes(source);
  for (const auto& [name, type] : fn.params) {
    prog.input_params.push_back(name);
    prog.param_types[name] = type;
  }
  std::sort(prog.input_params.begin(), prog.input_params.end());
  prog.output_vars = fn.header_outputs;
  std::sort(prog.output_vars.begin(), prog.output_vars.end());
  for (const MilStatement& s : fn.body) {
    if (s.op != "const") continue;
    const MilAttr* val = s.attr("val");
    if (!val || !std::holds_alternative<BlobRef>(*val)) continue;
    const BlobRef& ref = std::get<BlobRef>(*val);
    WeightRef w;
    w.path = ref.path;
    w.offset = ref.offset;
    if (const MilAttr* sh = s.attr("shape"); sh && std::holds_alternative<std::vector<int64_t>>(*sh))
      w.shape = Shape(std::get<std::vector<int64_t>>(*sh));
    w.count = w.shape.numel();
    if (const MilAttr* dt = s.attr("dtype"); dt && std::holds_alternative<std::string>(*dt))
      w.dtype = parse_dtype(std::get<std::string>(*dt)).value_or(DType::fp16);
    std::string name = s.attr("name") && std::holds_alternative<std::string>(*s.attr("name"))
                           ? std::get<std::string>(*s.attr("name"))
                           : s.var;
    prog.weight_manifest[name] = w;
  }
  return prog;
}

}  // namespace forge
