// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/config.hpp"

#include <charconv>
#include <cstdlib>

#include "forge/blobfile.hpp"
#include "forge/error.hpp"

namespace forge {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw Error(ErrorCode::ConfigInvalid, "'" + key + "': expected " + want + ", got '" + value + "'");
}

}  // namespace

KeyValues parse_key_values(std::string_view text, const std::string& origin) {
  KeyValues out;
  int line_no = 0;
  while (!text.empty()) {
    size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (size_t hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::ConfigInvalid,
                  origin + ":" + std::to_string(line_no) + ": expected key=value");
    std::string key(trim(line.substr(0, eq)));
    if (key.empty())
      throw Error(ErrorCode::ConfigInvalid, origin + ":" + std::to_string(line_no) + ": empty key");
    out.emplace_back(key, std::string(trim(line.substr(eq + 1))));
  }
  return out;
}

KeyValues read_key_values(const std::string& path) {
  std::vector<uint8_t> bytes = read_file(path);
  return parse_key_values(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                          path);
}

double parse_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  double v = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size()) bad_value(key, value, "a number");
  return v;
}

int64_t parse_int(const std::string& key, const std::string& value) {
  int64_t v = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || ptr != value.data() + value.size()) bad_value(key, value, "an integer");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "off" || value == "no") return false;
  bad_value(key, value, "a boolean");
}

bool apply_model_key(ModelConfig& c, const std::string& key, const std::string& value) {
  if (key == "d_model") c.d_model = parse_int(key, value);
  else if (key == "n_heads") c.n_heads = parse_int(key, value);
  else if (key == "n_layers") c.n_layers = parse_int(key, value);
  else if (key == "d_ff") c.d_ff = parse_int(key, value);
  else if (key == "vocab_size") c.vocab_size = parse_int(key, value);
  else if (key == "max_seq") c.max_seq = parse_int(key, value);
  else if (key == "channel_limit") c.channel_limit = parse_int(key, value);
  else if (key == "bias") c.bias = parse_bool(key, value);
  else if (key == "norm") {
    if (value == "rmsnorm") c.norm = NormKind::rmsnorm;
    else if (value == "layernorm") c.norm = NormKind::layernorm;
    else bad_value(key, value, "rmsnorm or layernorm");
  } else if (key == "activation") {
    if (value == "swiglu") c.activation = Activation::swiglu;
    else if (value == "gelu_tanh") c.activation = Activation::gelu_tanh;
    else bad_value(key, value, "swiglu or gelu_tanh");
  } else {
    return false;
  }
  return true;
}

}  // namespace forge
