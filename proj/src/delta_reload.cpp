// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/delta_reload.hpp"

#include <filesystem>

#include "forge/blobfile.hpp"
#include "forge/error.hpp"

namespace forge {

namespace fs = std::filesystem;

double reload_weights(DeviceContext& ctx, const ReloadPlan& plan) {
  if (plan.program == nullptr) throw Error(ErrorCode::NotLoaded, "reload plan names no program");
  CompiledProgram& prog = *plan.program;
  if (!prog.loaded) throw Error(ErrorCode::NotLoaded, "program must be loaded before a reload");

  const WeightManifest& manifest = prog.mil.weight_manifest;
  bool same_keys = plan.patches.size() == manifest.size();
  for (const auto& [name, t] : plan.patches) same_keys = same_keys && manifest.count(name);
  if (!same_keys)
    throw Error(ErrorCode::KeySetMismatch,
                "patch keys differ from the program's weight keys; a recompile is required");
  for (const auto& [name, t] : plan.patches) {
    if (t.numel() != manifest.at(name).count)
      throw Error(ErrorCode::ShapeMismatch, "patch for '" + name + "' has " +
                                                std::to_string(t.numel()) + " elements, expected " +
                                                std::to_string(manifest.at(name).count));
  }
  if (!fs::is_directory(prog.tmp_dir))
    throw Error(ErrorCode::TmpDirMissing, "program directory '" + prog.tmp_dir + "' no longer exists");

  const std::string qos = " qos=" + std::to_string(plan.qos);
  unload(prog);
  ctx.charge(&SimLedger::reload_ms, 0.0, "unload" + qos);
  for (const auto& [name, t] : plan.patches)
    write_blobfile({{name, t}}, (fs::path(prog.tmp_dir) / manifest.at(name).path).string());
  ctx.charge(&SimLedger::reload_ms, 0.0, "write " + std::to_string(plan.patches.size()) + " blobs");
  load(prog);
  const double ms = prog.kernels * ctx.cost.reload_ms_per_kernel;
  ctx.count(&SimLedger::reloads);
  ctx.charge(&SimLedger::reload_ms, ms, "load" + qos);
  return ms;
}

void transfer_tmpdir_ownership(CompiledProgram& from, CompiledProgram& to) {
  if (!(from.identity == to.identity) || from.tmp_dir != to.tmp_dir)
    throw Error(ErrorCode::IdentityMismatch, "programs do not share an identity or directory");
  if (!from.owns_tmp_dir && !to.owns_tmp_dir)
    throw Error(ErrorCode::TmpDirMissing, "neither program owns '" + from.tmp_dir + "'");
  const bool owned = from.owns_tmp_dir || to.owns_tmp_dir;
  from.owns_tmp_dir = false;
  to.owns_tmp_dir = owned;
}

}  // namespace forge
