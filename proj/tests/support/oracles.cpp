// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace oracle {

double f16_value(uint16_t bits) {
  int sign = (bits >> 15) ? -1 : 1;
  int exp = (bits >> 10) & 0x1F;
  int mant = bits & 0x3FF;
  if (exp == 0x1F) return mant ? std::numeric_limits<double>::quiet_NaN() : sign * INFINITY;
  if (exp == 0) return sign * std::ldexp(static_cast<double>(mant), -24);
  return sign * std::ldexp(1.0 + mant / 1024.0, exp - 15);
}

uint16_t f16_nearest(double x) {
  if (std::isnan(x)) return 0x7E00;
  uint16_t sign = std::signbit(x) ? 0x8000 : 0;
  double ax = std::fabs(x);
  // Midpoint between max finite (65504) and the next lattice point (65536).
  if (ax >= 65520.0) return sign | 0x7C00;
  uint16_t best = 0;
  double best_err = INFINITY;
  for (uint16_t b = 0; b <= 0x7BFF; ++b) {
    double err = std::fabs(f16_value(b) - ax);
    if (err < best_err || (err == best_err && (b & 1) == 0)) {
      best = b;
      best_err = err;
    }
  }
  return sign | best;
}

long double gelu_tanh_ld(long double x) {
  const long double k = std::sqrt(2.0L / 3.14159265358979323846264338327950288L);
  return 0.5L * x * (1.0L + std::tanh(k * (x + 0.044715L * x * x * x)));
}

long double gelu_erf_ld(long double x) {
  return 0.5L * x * (1.0L + std::erf(x / std::sqrt(2.0L)));
}

std::vector<double> softmax(const std::vector<double>& x) {
  std::vector<double> out(x.size());
  double sum = 0;
  for (size_t i = 0; i < x.size(); ++i) sum += std::exp(x[i]);
  for (size_t i = 0; i < x.size(); ++i) out[i] = std::exp(x[i]) / sum;
  return out;
}

std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b, int64_t m,
                           int64_t k, int64_t n) {
  std::vector<double> c(static_cast<size_t>(m * n), 0.0);
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j)
      for (int64_t t = 0; t < k; ++t) c[i * n + j] += a[i * k + t] * b[t * n + j];
  return c;
}

std::set<forge::NodeId> reachable(const forge::Graph& g) {
  std::set<forge::NodeId> seen;
  std::deque<forge::NodeId> queue;
  for (const auto& [name, id] : g.outputs) queue.push_back(id);
  while (!queue.empty()) {
    forge::NodeId id = queue.front();
    queue.pop_front();
    if (seen.count(id) || !g.nodes.count(id)) continue;
    seen.insert(id);
    for (const auto& e : g.nodes.at(id).inputs) queue.push_back(e.node);
  }
  return seen;
}

double rel_error(const forge::Tensor& a, const forge::Tensor& b, double floor) {
  double num = 0, den = floor;
  for (size_t i = 0; i < a.data.size(); ++i) {
    num = std::max(num, std::fabs(static_cast<double>(a.data[i]) - b.data[i]));
    den = std::max(den, std::fabs(static_cast<double>(b.data[i])));
  }
  return num / den;
}

double uniform_cross_entropy(int64_t vocab) { return std::log(static_cast<double>(vocab)); }

}  // namespace oracle
