// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>

#include "forge/error.hpp"
#include "forge/npu_sim.hpp"
#include "forge/numerics.hpp"

namespace forge {

std::vector<uint8_t> pack_fp16(const Tensor& t) {
  std::vector<uint8_t> out(static_cast<size_t>(t.numel()) * 2);
  for (int64_t i = 0; i < t.numel(); ++i) {
    uint16_t bits = f32_to_f16_rne(t.data[i]).bits;
    out[2 * i] = static_cast<uint8_t>(bits & 0xFF);
    out[2 * i + 1] = static_cast<uint8_t>(bits >> 8);
  }
  return out;
}

Tensor unpack_fp16(const std::vector<uint8_t>& bytes, const Shape& shape) {
  Tensor t(shape);
  if (static_cast<int64_t>(bytes.size()) < t.numel() * 2)
    throw Error(ErrorCode::BindingMismatch, "buffer of " + std::to_string(bytes.size()) +
                                                " bytes cannot hold " + shape.str() + " fp16");
  for (int64_t i = 0; i < t.numel(); ++i)
    t.data[i] = f16_to_f32(F16Value{static_cast<uint16_t>(bytes[2 * i] | (bytes[2 * i + 1] << 8))});
  return t;
}

std::vector<uint8_t> layout_pack(const Tensor& host) {
  if (host.shape.rank() != 2)
    throw Error(ErrorCode::ShapeMismatch, "layout_pack expects [seq, d_model], got " + host.shape.str());
  const int64_t seq = host.shape[0];
  const int64_t d = host.shape[1];
  Tensor dev(device_shape(d, seq));
  for (int64_t s = 0; s < seq; ++s)
    for (int64_t c = 0; c < d; ++c) dev.data[c * seq + s] = host.data[s * d + c];
  return pack_fp16(dev);
}

Tensor layout_unpack(const std::vector<uint8_t>& packed, int64_t seq, int64_t d_model) {
  Tensor dev = unpack_fp16(packed, device_shape(d_model, seq));
  Tensor host(Shape{seq, d_model});
  for (int64_t s = 0; s < seq; ++s)
    for (int64_t c = 0; c < d_model; ++c) host.data[s * d_model + c] = dev.data[c * seq + s];
  return host;
}

int64_t uniform_alloc_bytes(const std::vector<int64_t>& payload_bytes, int64_t min_surface_bytes) {
  int64_t need = min_surface_bytes;
  for (int64_t b : payload_bytes) need = std::max(need, b);
  return (need + 63) / 64 * 64;
}

TensorMap run_program(DeviceContext& ctx, const CompiledProgram& program, const TensorMap& inputs,
                      double* sim_ms) {
  const MilProgram& mil = program.mil;
  std::vector<int64_t> in_sizes;
  for (const std::string& p : mil.input_params) in_sizes.push_back(mil.param_types.at(p).shape.numel() * 2);
  std::vector<int64_t> out_sizes;
  std::vector<Shape> out_shapes;
  for (const std::string& o : mil.output_vars) {
    Shape s;
    if (auto id = program.graph.output(o)) s = program.graph.node(*id).out_shape;
    out_shapes.push_back(s);
    out_sizes.push_back(s.numel() * 2);
  }
  const int64_t in_alloc = uniform_alloc_bytes(in_sizes, ctx.min_surface_bytes);
  const int64_t out_alloc = uniform_alloc_bytes(out_sizes, ctx.min_surface_bytes);

  std::vector<Surface> in_surfaces;
  for (const std::string& p : mil.input_params) {
    auto it = inputs.find(p);
    if (it == inputs.end()) throw Error(ErrorCode::MissingInput, "no value for input '" + p + "'");
    const Shape& shape = mil.param_types.at(p).shape;
    if (it->second.numel() != shape.numel())
      throw Error(ErrorCode::ShapeMismatch, "input '" + p + "' has " + std::to_string(it->second.numel()) +
                                                " elements, expected " + shape.str());
    Surface s = Surface::allocate(p, shape, in_alloc);
    std::vector<uint8_t> bytes = pack_fp16(it->second);
    std::copy(bytes.begin(), bytes.end(), s.data.begin());
    in_surfaces.push_back(std::move(s));
  }
  std::vector<Surface> out_surfaces;
  for (size_t i = 0; i < mil.output_vars.size(); ++i)
    out_surfaces.push_back(Surface::allocate(mil.output_vars[i], out_shapes[i], out_alloc));

  EvalResult r = evaluate(ctx, program, in_surfaces, out_surfaces);
  if (sim_ms) *sim_ms += r.sim_ms;

  TensorMap out;
  for (size_t i = 0; i < out_surfaces.size(); ++i) {
    std::vector<uint8_t> head(out_surfaces[i].data.begin(),
                              out_surfaces[i].data.begin() + static_cast<std::ptrdiff_t>(out_sizes[i]));
    out[mil.output_vars[i]] = unpack_fp16(head, out_shapes[i]);
  }
  return out;
}

}  // namespace forge
