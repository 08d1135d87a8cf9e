// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/numerics.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>

#include "forge/error.hpp"

namespace forge {

bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.shape == b.shape && a.data.size() == b.data.size() &&
         std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0;
}

// ---------------------------------------------------------------------------
// fp16

F16Value f32_to_f16_rne(float x) {
  uint32_t bits = std::bit_cast<uint32_t>(x);
  uint16_t sign = static_cast<uint16_t>((bits >> 16) & 0x8000u);
  uint32_t abs = bits & 0x7FFFFFFFu;
  if (abs > 0x7F800000u) return {static_cast<uint16_t>(sign | 0x7E00u)};
  // 65520 is the midpoint between 65504 and the next (unrepresentable) step;
  // ties round to even, which is Inf.
  if (abs >= 0x477FF000u) return {static_cast<uint16_t>(sign | 0x7C00u)};
  if (abs < 0x38800000u) {
    // Subnormal range: value = m * 2^-24, m in [0, 1024].
    double scaled = static_cast<double>(std::bit_cast<float>(abs)) * 16777216.0;
    auto m = static_cast<uint16_t>(std::nearbyint(scaled));
    return {static_cast<uint16_t>(sign | m)};
  }
  uint32_t exp = (abs >> 23) - 127 + 15;
  uint32_t mant = abs & 0x7FFFFFu;
  uint32_t h = (exp << 10) | (mant >> 13);
  uint32_t rem = mant & 0x1FFFu;
  if (rem > 0x1000u || (rem == 0x1000u && (h & 1u))) ++h;
  return {static_cast<uint16_t>(sign | h)};
}

float f16_to_f32(F16Value h) {
  uint32_t sign = static_cast<uint32_t>(h.bits & 0x8000u) << 16;
  uint32_t exp = (h.bits >> 10) & 0x1Fu;
  uint32_t mant = h.bits & 0x3FFu;
  if (exp == 0) {
    float v = std::ldexp(static_cast<float>(mant), -24);
    return sign ? -v : v;
  }
  if (exp == 31) return std::bit_cast<float>(sign | 0x7F800000u | (mant << 13));
  return std::bit_cast<float>(sign | ((exp - 15 + 127) << 23) | (mant << 13));
}

float F16Value::to_float() const { return f16_to_f32(*this); }

float round_to_f16(float x) { return f16_to_f32(f32_to_f16_rne(x)); }

void round_to_f16(Tensor& t) {
  for (float& v : t.data) v = round_to_f16(v);
}

float clamp_fp16(float x, ClampBounds bounds) {
  if (std::isnan(x)) return x;
  return std::min(std::max(x, bounds.lo), bounds.hi);
}

Tensor clamp_fp16(const Tensor& x, ClampBounds bounds) {
  Tensor out = x;
  for (float& v : out.data) v = clamp_fp16(v, bounds);
  return out;
}

float gelu_tanh(float x) {
  const float k = std::sqrt(2.0f / 3.14159265358979323846f);
  return 0.5f * x * (1.0f + std::tanh(k * (x + 0.044715f * x * x * x)));
}

Tensor gelu_tanh(const Tensor& x) {
  Tensor out = x;
  for (float& v : out.data) v = gelu_tanh(v);
  return out;
}

const char* precision_name(Precision p) { return p == Precision::fp32 ? "fp32" : "fp16"; }

// ---------------------------------------------------------------------------
// Kernels

namespace {

using Dims4 = std::array<int64_t, 4>;

Dims4 pad4(const Shape& s) {
  Dims4 d{1, 1, 1, 1};
  size_t off = 4 - s.rank();
  for (size_t i = 0; i < s.rank(); ++i) d[off + i] = s.dims[i];
  return d;
}

Dims4 strides_of(const Dims4& d) {
  return {d[1] * d[2] * d[3], d[2] * d[3], d[3], 1};
}

// Outer/inner decomposition around `axis` for reductions and softmax.
struct AxisView {
  int64_t outer = 1, len = 1, inner = 1;
};

AxisView axis_view(const Shape& s, int64_t axis) {
  if (axis < 0) axis += static_cast<int64_t>(s.rank());
  AxisView v;
  for (int64_t i = 0; i < axis; ++i) v.outer *= s.dims[i];
  v.len = s.dims[axis];
  for (size_t i = axis + 1; i < s.rank(); ++i) v.inner *= s.dims[i];
  return v;
}

template <typename F>
Tensor binary(const Tensor& a, const Tensor& b, const Shape& out_shape, F f) {
  Tensor out(out_shape);
  if (a.shape == b.shape) {
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = f(a.data[i], b.data[i]);
    return out;
  }
  Dims4 od = pad4(out_shape), ad = pad4(a.shape), bd = pad4(b.shape);
  Dims4 as = strides_of(ad), bs = strides_of(bd);
  for (int i = 0; i < 4; ++i) {
    if (ad[i] == 1) as[i] = 0;
    if (bd[i] == 1) bs[i] = 0;
  }
  size_t o = 0;
  for (int64_t i0 = 0; i0 < od[0]; ++i0)
    for (int64_t i1 = 0; i1 < od[1]; ++i1)
      for (int64_t i2 = 0; i2 < od[2]; ++i2)
        for (int64_t i3 = 0; i3 < od[3]; ++i3) {
          int64_t ai = i0 * as[0] + i1 * as[1] + i2 * as[2] + i3 * as[3];
          int64_t bi = i0 * bs[0] + i1 * bs[1] + i2 * bs[2] + i3 * bs[3];
          out.data[o++] = f(a.data[ai], b.data[bi]);
        }
  return out;
}

template <typename F>
Tensor unary(const Tensor& x, F f) {
  Tensor out = x;
  for (float& v : out.data) v = f(v);
  return out;
}

Tensor conv1x1(const Tensor& x, const Tensor& w, const Shape& out_shape) {
  Tensor out(out_shape);
  const int64_t n = x.shape[0], cin = x.shape[1], hw = x.shape[2] * x.shape[3];
  const int64_t cout = w.shape[0];
  for (int64_t b = 0; b < n; ++b) {
    const float* xb = x.data.data() + b * cin * hw;
    float* ob = out.data.data() + b * cout * hw;
    for (int64_t co = 0; co < cout; ++co) {
      float* orow = ob + co * hw;
      const float* wrow = w.data.data() + co * cin;
      for (int64_t ci = 0; ci < cin; ++ci) {
        const float wv = wrow[ci];
        const float* xrow = xb + ci * hw;
        for (int64_t s = 0; s < hw; ++s) orow[s] += wv * xrow[s];
      }
    }
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b, bool tx, bool ty, const Shape& out_shape) {
  Tensor out(out_shape);
  Dims4 ad = pad4(a.shape), bd = pad4(b.shape), od = pad4(out_shape);
  const int64_t m = od[2], n = od[3];
  const int64_t k = tx ? ad[2] : ad[3];
  const int64_t a_mat = ad[2] * ad[3], b_mat = bd[2] * bd[3], o_mat = m * n;
  for (int64_t i0 = 0; i0 < od[0]; ++i0) {
    for (int64_t i1 = 0; i1 < od[1]; ++i1) {
      int64_t ab = (ad[0] == 1 ? 0 : i0) * ad[1] + (ad[1] == 1 ? 0 : i1);
      int64_t bb = (bd[0] == 1 ? 0 : i0) * bd[1] + (bd[1] == 1 ? 0 : i1);
      const float* A = a.data.data() + ab * a_mat;
      const float* B = b.data.data() + bb * b_mat;
      float* O = out.data.data() + (i0 * od[1] + i1) * o_mat;
      // A(i,p) = tx ? A[p*ad3 + i] : A[i*ad3 + p]; same for B(p,j).
      for (int64_t i = 0; i < m; ++i) {
        float* orow = O + i * n;
        for (int64_t p = 0; p < k; ++p) {
          const float av = tx ? A[p * ad[3] + i] : A[i * ad[3] + p];
          if (ty) {
            for (int64_t j = 0; j < n; ++j) orow[j] += av * B[j * bd[3] + p];
          } else {
            const float* brow = B + p * bd[3];
            for (int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
          }
        }
      }
    }
  }
  return out;
}

enum class Reduce { sum, mean, max };

Tensor reduce(const Tensor& x, int64_t axis, Reduce kind, const Shape& out_shape) {
  AxisView v = axis_view(x.shape, axis);
  Tensor out(out_shape);
  for (int64_t o = 0; o < v.outer; ++o)
    for (int64_t i = 0; i < v.inner; ++i) {
      float acc = kind == Reduce::max ? -INFINITY : 0.0f;
      for (int64_t l = 0; l < v.len; ++l) {
        float val = x.data[(o * v.len + l) * v.inner + i];
        if (kind == Reduce::max) {
          acc = (std::isnan(val) || val > acc) ? val : acc;
          if (std::isnan(acc)) break;
        } else {
          acc += val;
        }
      }
      if (kind == Reduce::mean) acc /= static_cast<float>(v.len);
      out.data[o * v.inner + i] = acc;
    }
  return out;
}

Tensor softmax(const Tensor& x, int64_t axis) {
  AxisView v = axis_view(x.shape, axis);
  Tensor out(x.shape);
  for (int64_t o = 0; o < v.outer; ++o)
    for (int64_t i = 0; i < v.inner; ++i) {
      auto at = [&](int64_t l) { return (o * v.len + l) * v.inner + i; };
      float mx = -INFINITY;
      for (int64_t l = 0; l < v.len; ++l) {
        float val = x.data[at(l)];
        mx = (std::isnan(val) || val > mx) ? val : mx;
        if (std::isnan(mx)) break;
      }
      float sum = 0.0f;
      for (int64_t l = 0; l < v.len; ++l) {
        float e = std::exp(x.data[at(l)] - mx);
        out.data[at(l)] = e;
        sum += e;
      }
      for (int64_t l = 0; l < v.len; ++l) out.data[at(l)] /= sum;
    }
  return out;
}

Tensor transpose(const Tensor& x, const std::vector<int64_t>& perm, const Shape& out_shape) {
  Tensor out(out_shape);
  const size_t r = x.shape.rank();
  std::vector<int64_t> in_strides(r, 1);
  for (size_t i = r - 1; i-- > 0;) in_strides[i] = in_strides[i + 1] * x.shape.dims[i + 1];
  std::vector<int64_t> idx(r, 0);
  for (size_t o = 0; o < out.data.size(); ++o) {
    int64_t src = 0;
    for (size_t d = 0; d < r; ++d) src += idx[d] * in_strides[perm[d]];
    out.data[o] = x.data[src];
    for (size_t d = r; d-- > 0;) {
      if (++idx[d] < out_shape.dims[d]) break;
      idx[d] = 0;
    }
  }
  return out;
}

// Copies the [begin, begin+len) window of `axis` from x into a tensor of
// `out_shape`, placing it at `dst_offset` along the same axis.
void copy_axis_window(const Tensor& src, int64_t axis, int64_t src_begin, int64_t len,
                      Tensor& dst, int64_t dst_offset) {
  AxisView sv = axis_view(src.shape, axis);
  AxisView dv = axis_view(dst.shape, axis);
  for (int64_t o = 0; o < sv.outer; ++o)
    for (int64_t l = 0; l < len; ++l) {
      const float* s = src.data.data() + (o * sv.len + src_begin + l) * sv.inner;
      float* d = dst.data.data() + (o * dv.len + dst_offset + l) * dv.inner;
      std::copy(s, s + sv.inner, d);
    }
}

float round_to(DType dtype, float v) {
  switch (dtype) {
    case DType::fp16: return round_to_f16(v);
    case DType::int32: return std::trunc(v);
    case DType::fp32: return v;
  }
  return v;
}

}  // namespace

Tensor softmax_stable(const Tensor& x, int64_t axis) {
  return softmax(clamp_fp16(x), axis);
}

TensorMap interpret_graph(const Graph& graph, const TensorMap& inputs,
                          const TensorMap& weights, Precision precision) {
  std::map<NodeId, std::vector<Tensor>> values;
  auto in = [&](const Node& n, size_t i) -> const Tensor& {
    const Edge& e = n.inputs.at(i);
    return values.at(e.node).at(static_cast<size_t>(e.slot));
  };

  for (NodeId id : topo_order(graph)) {
    const Node& n = graph.node(id);
    std::vector<Tensor> result(1);
    Tensor& out = result[0];
    switch (n.kind) {
      case OpKind::input: {
        const std::string& name = n.str_attr("name");
        auto it = inputs.find(name);
        if (it == inputs.end())
          throw Error(ErrorCode::MissingInput, "no value bound for input '" + name + "'");
        if (it->second.numel() != n.out_shape.numel())
          throw Error(ErrorCode::ShapeMismatch, "input '" + name + "' has " +
                                                    std::to_string(it->second.numel()) +
                                                    " elements, expected " +
                                                    n.out_shape.str());
        out = Tensor(n.out_shape, it->second.data);
        break;
      }
      case OpKind::const_: {
        if (n.has_attr("weight")) {
          const std::string& name = n.str_attr("weight");
          auto it = weights.find(name);
          const auto& specs = graph.weight_specs();
          auto spec = specs.find(name);
          if (it != weights.end()) {
            if (it->second.numel() != n.out_shape.numel())
              throw Error(ErrorCode::ShapeMismatch,
                          "weight '" + name + "' has " + std::to_string(it->second.numel()) +
                              " elements, expected " + n.out_shape.str());
            out = Tensor(n.out_shape, it->second.data);
          } else if (spec != specs.end() && !spec->second.fixed.empty()) {
            out = Tensor(n.out_shape, spec->second.fixed);
          } else {
            throw Error(ErrorCode::MissingWeight, "no value bound for weight '" + name + "'");
          }
        } else {
          out = Tensor(n.out_shape, static_cast<float>(n.float_attr("value")));
        }
        break;
      }
      case OpKind::identity:
        out = in(n, 0);
        if (n.has_attr("clamp_lo") || n.has_attr("clamp_hi")) {
          ClampBounds b{static_cast<float>(n.float_attr_or("clamp_lo", -kFp16Max)),
                        static_cast<float>(n.float_attr_or("clamp_hi", kFp16Max))};
          out = clamp_fp16(out, b);
        }
        break;
      case OpKind::conv1x1: out = conv1x1(in(n, 0), in(n, 1), n.out_shape); break;
      case OpKind::matmul:
        out = matmul(in(n, 0), in(n, 1), n.int_attr_or("transpose_x", 0) != 0,
                     n.int_attr_or("transpose_y", 0) != 0, n.out_shape);
        break;
      case OpKind::add:
        out = binary(in(n, 0), in(n, 1), n.out_shape, [](float a, float b) { return a + b; });
        break;
      case OpKind::sub:
        out = binary(in(n, 0), in(n, 1), n.out_shape, [](float a, float b) { return a - b; });
        break;
      case OpKind::mul:
        out = binary(in(n, 0), in(n, 1), n.out_shape, [](float a, float b) { return a * b; });
        break;
      case OpKind::neg: out = unary(in(n, 0), [](float v) { return -v; }); break;
      case OpKind::relu:
        out = unary(in(n, 0), [](float v) { return v > 0.0f ? v : (std::isnan(v) ? v : 0.0f); });
        break;
      case OpKind::tanh: out = unary(in(n, 0), [](float v) { return std::tanh(v); }); break;
      case OpKind::sigmoid:
        out = unary(in(n, 0), [](float v) { return 1.0f / (1.0f + std::exp(-v)); });
        break;
      case OpKind::exp: out = unary(in(n, 0), [](float v) { return std::exp(v); }); break;
      case OpKind::pow: {
        const auto e = static_cast<float>(n.float_attr("exponent"));
        out = unary(in(n, 0), [e](float v) { return std::pow(v, e); });
        break;
      }
      case OpKind::sqrt: out = unary(in(n, 0), [](float v) { return std::sqrt(v); }); break;
      case OpKind::rsqrt:
        out = unary(in(n, 0), [](float v) { return 1.0f / std::sqrt(v); });
        break;
      case OpKind::reduce_sum:
        out = reduce(in(n, 0), n.int_attr("axis"), Reduce::sum, n.out_shape);
        break;
      case OpKind::reduce_mean:
        out = reduce(in(n, 0), n.int_attr("axis"), Reduce::mean, n.out_shape);
        break;
      case OpKind::reduce_max:
        out = reduce(in(n, 0), n.int_attr("axis"), Reduce::max, n.out_shape);
        break;
      case OpKind::reshape: out = Tensor(n.out_shape, in(n, 0).data); break;
      case OpKind::transpose:
        out = transpose(in(n, 0), n.list_attr("perm"), n.out_shape);
        break;
      case OpKind::split: {
        const Tensor& x = in(n, 0);
        int64_t axis = n.int_attr("axis");
        if (axis < 0) axis += static_cast<int64_t>(x.shape.rank());
        result.clear();
        int64_t offset = 0;
        for (const Shape& s : n.slot_shapes) {
          Tensor piece(s);
          copy_axis_window(x, axis, offset, s.dims[axis], piece, 0);
          offset += s.dims[axis];
          result.push_back(std::move(piece));
        }
        break;
      }
      case OpKind::pad: {
        const Tensor& x = in(n, 0);
        int64_t axis = n.int_attr("axis");
        if (axis < 0) axis += static_cast<int64_t>(x.shape.rank());
        out = Tensor(n.out_shape, static_cast<float>(n.float_attr_or("value", 0.0)));
        copy_axis_window(x, axis, 0, x.shape.dims[axis], out, n.int_attr("before"));
        break;
      }
      case OpKind::slice: {
        const Tensor& x = in(n, 0);
        int64_t axis = n.int_attr("axis");
        if (axis < 0) axis += static_cast<int64_t>(x.shape.rank());
        out = Tensor(n.out_shape);
        int64_t begin = n.int_attr("begin");
        copy_axis_window(x, axis, begin, n.int_attr("end") - begin, out, 0);
        break;
      }
      case OpKind::cast: out = in(n, 0); break;
      case OpKind::softmax: out = softmax(in(n, 0), n.int_attr("axis")); break;
      case OpKind::concat_banned: {
        int64_t axis = n.int_attr("axis");
        if (axis < 0) axis += static_cast<int64_t>(n.out_shape.rank());
        out = Tensor(n.out_shape);
        int64_t offset = 0;
        for (size_t i = 0; i < n.inputs.size(); ++i) {
          const Tensor& x = in(n, i);
          copy_axis_window(x, axis, 0, x.shape.dims[axis], out, offset);
          offset += x.shape.dims[axis];
        }
        break;
      }
    }
    if (n.kind == OpKind::cast && n.out_dtype == DType::int32) {
      for (float& v : result[0].data) v = std::trunc(v);
    }
    if (precision == Precision::fp16) {
      for (Tensor& t : result)
        for (float& v : t.data) v = round_to(n.out_dtype, v);
    }
    values.emplace(id, std::move(result));
  }

  TensorMap outputs;
  for (const auto& [name, id] : graph.outputs) {
    auto it = values.find(id);
    if (it == values.end())
      throw Error(ErrorCode::UnknownInput,
                  "output '" + name + "' references missing node " + std::to_string(id), 14);
    outputs[name] = it->second.front();
  }
  return outputs;
}

}  // namespace forge
