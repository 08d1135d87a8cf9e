// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <map>

#include "forge/error.hpp"
#include "forge/mil_codegen.hpp"

namespace forge {

namespace {

// Intermediate variables are renamed by statement position; parameters and
// output names are part of the interface and keep their spelling.
std::map<std::string, std::string> canonical_names(const MilFunction& fn) {
  std::map<std::string, std::string> names;
  for (size_t i = 0; i < fn.body.size(); ++i)
    names[fn.body[i].var] = "s" + std::to_string(i);
  return names;
}

std::string render_arg(const MilArg& a, const std::map<std::string, std::string>& names) {
  auto it = names.find(a.var);
  std::string v = it == names.end() ? "?" + a.var : it->second;
  return v + (a.slot ? ":" + std::to_string(a.slot) : "");
}

std::string render_statement(const MilStatement& s,
                             const std::map<std::string, std::string>& names) {
  MilFunction one;
  MilStatement copy = s;
  copy.var = names.at(s.var);
  for (MilArg& a : copy.args) {
    auto it = names.find(a.var);
    a.var = it == names.end() ? "?" + a.var : it->second;
  }
  std::sort(copy.attrs.begin(), copy.attrs.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  one.body.push_back(copy);
  std::string text = format_mil(one);
  // Keep only the statement line.
  size_t start = text.find('%');
  size_t end = text.find(";\n", start);
  return text.substr(start, end - start);
}

}  // namespace

MilDiffReport mil_diff(std::string_view a_text, std::string_view b_text) {
  MilFunction a = parse_mil_text(a_text);
  MilFunction b = parse_mil_text(b_text);
  MilDiffReport report;
  auto diverge = [&](int index, std::string detail) {
    report.equivalent = false;
    report.first_divergence = index;
    report.detail = std::move(detail);
    return report;
  };

  auto sorted_params = [](std::vector<std::pair<std::string, TensorType>> p) {
    std::sort(p.begin(), p.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    return p;
  };
  if (sorted_params(a.params) != sorted_params(b.params))
    return diverge(-1, "parameter lists differ");
  if (a.header_outputs != b.header_outputs) return diverge(-1, "output signatures differ");

  auto na = canonical_names(a);
  auto nb = canonical_names(b);
  size_t common = std::min(a.body.size(), b.body.size());
  for (size_t i = 0; i < common; ++i) {
    std::string sa = render_statement(a.body[i], na);
    std::string sb = render_statement(b.body[i], nb);
    if (sa != sb) return diverge(static_cast<int>(i), sa + "  vs  " + sb);
  }
  if (a.body.size() != b.body.size())
    return diverge(static_cast<int>(common),
                   "statement counts differ (" + std::to_string(a.body.size()) + " vs " +
                       std::to_string(b.body.size()) + ")");

  if (a.returns.size() != b.returns.size()) return diverge(-1, "return lists differ");
  for (size_t i = 0; i < a.returns.size(); ++i) {
    if (a.returns[i].first != b.returns[i].first ||
        render_arg(a.returns[i].second, na) != render_arg(b.returns[i].second, nb))
      return diverge(-1, "return '" + a.returns[i].first + "' differs");
  }
  return report;
}

MilDiffReport mil_diff(const MilProgram& a, const MilProgram& b) {
  return mil_diff(from_bytes(a.text_bytes), from_bytes(b.text_bytes));
}

}  // namespace forge
