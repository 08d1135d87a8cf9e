// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

// Flat key=value configuration files.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "forge/frontends.hpp"

namespace forge {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// One `key = value` per line; blank lines and '#' comments are skipped.
/// Throws ConfigInvalid naming `origin` and the line.
KeyValues parse_key_values(std::string_view text, const std::string& origin = "<config>");
KeyValues read_key_values(const std::string& path);

double parse_double(const std::string& key, const std::string& value);
int64_t parse_int(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);

/// Handles d_model, n_heads, n_layers, d_ff, vocab_size, max_seq, norm,
/// activation, bias and channel_limit. Returns false for other keys.
bool apply_model_key(ModelConfig& config, const std::string& key, const std::string& value);

}  // namespace forge
