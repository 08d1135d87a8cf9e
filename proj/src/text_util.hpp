// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

// Shared lexing/formatting for the graph text form and the MIL dialect.

#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <string>
#include <string_view>

#include "forge/error.hpp"
#include "forge/graph_ir.hpp"

namespace forge::text {

/// Shortest round-trip form; always contains '.', 'e', "inf" or "nan" so it
/// cannot be confused with an integer.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

inline std::string format_float(float v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

inline std::string format_list(const std::vector<int64_t>& v) {
  std::string out = "[";
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out + "]";
}

inline std::string format_attr(const Attr& a) {
  if (auto* i = std::get_if<int64_t>(&a)) return std::to_string(*i);
  if (auto* d = std::get_if<double>(&a)) return format_double(*d);
  if (auto* l = std::get_if<std::vector<int64_t>>(&a)) return format_list(*l);
  return quote(std::get<std::string>(a));
}

class Cursor {
 public:
  explicit Cursor(std::string_view s, int line = 0) : s_(s), line_(line) {}

  bool done() {
    skip_ws();
    return pos_ >= s_.size();
  }
  char peek() {
    skip_ws();
    return pos_ < s_.size() ? s_[pos_] : '\0';
  }
  bool consume(char c) {
    if (peek() == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  bool consume(std::string_view word) {
    skip_ws();
    if (s_.substr(pos_, word.size()) == word) {
      pos_ += word.size();
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!consume(c)) fail(std::string("expected '") + c + "'");
  }
  void expect(std::string_view word) {
    if (!consume(word)) fail("expected '" + std::string(word) + "'");
  }

  /// [A-Za-z0-9_.]+ (also admits leading digits, used for ids).
  std::string ident() {
    skip_ws();
    size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) ||
                                s_[pos_] == '_' || s_[pos_] == '.'))
      ++pos_;
    if (start == pos_) fail("expected identifier");
    return std::string(s_.substr(start, pos_ - start));
  }

  int64_t integer() {
    skip_ws();
    int64_t v = 0;
    auto res = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
    if (res.ec != std::errc()) fail("expected integer");
    pos_ = static_cast<size_t>(res.ptr - s_.data());
    return v;
  }

  std::vector<int64_t> int_list() {
    expect('[');
    std::vector<int64_t> out;
    if (consume(']')) return out;
    do {
      out.push_back(integer());
    } while (consume(','));
    expect(']');
    return out;
  }

  std::string quoted() {
    expect('"');
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) ++pos_;
      out += s_[pos_++];
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  /// Number token: integer unless it contains '.', 'e', "inf" or "nan".
  Attr number() {
    skip_ws();
    size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.' ||
            s_[pos_] == '-' || s_[pos_] == '+'))
      ++pos_;
    std::string tok(s_.substr(start, pos_ - start));
    if (tok.empty()) fail("expected number");
    if (tok == "nan") return std::nan("");
    if (tok == "inf") return HUGE_VAL;
    if (tok == "-inf") return -HUGE_VAL;
    bool is_float = tok.find_first_of(".eE") != std::string::npos;
    if (!is_float) {
      int64_t v = 0;
      auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        fail("bad integer '" + tok + "'");
      return v;
    }
    double d = 0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), d);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
      fail("bad number '" + tok + "'");
    return d;
  }

  double real() {
    Attr a = number();
    if (auto* i = std::get_if<int64_t>(&a)) return static_cast<double>(*i);
    return std::get<double>(a);
  }

  Attr attr_value() {
    char c = peek();
    if (c == '[') return int_list();
    if (c == '"') return quoted();
    return number();
  }

  std::string_view rest() {
    skip_ws();
    return s_.substr(pos_);
  }

  [[noreturn]] void fail(const std::string& what) const {
    std::string where = line_ > 0 ? "line " + std::to_string(line_) + ": " : "";
    throw Error(ErrorCode::ParseError,
                where + what + " at column " + std::to_string(pos_ + 1) + " in '" +
                    std::string(s_) + "'");
  }

 private:
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  std::string_view s_;
  size_t pos_ = 0;
  int line_;
};

}  // namespace forge::text
