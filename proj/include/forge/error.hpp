// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace forge {

enum class ErrorCode {
  // graph_ir
  UnknownInput,
  MissingAttr,
  ShapeMismatch,
  ShapeConflict,
  CycleDetected,
  ParseError,
  // opt_passes
  ConstraintViolation,
  // mil_codegen
  UnexpandedGelu,
  InlineTransposeFlag,
  // blobfile
  IoFailure,
  EmptyName,
  BadMagic,
  TruncatedChunk,
  OffsetMismatch,
  // numerics
  MissingWeight,
  MissingInput,
  // npu_sim
  CompileLimitExceeded,
  BannedOp,
  MissingWeightDict,
  MilRejected,
  InvalidProgram,
  InvalidEncoding,
  Error0x1d,
  NotLoaded,
  SilentFailureTriggered,
  DoubleLoad,
  DoubleUnload,
  TmpDirMissing,
  BindingMismatch,
  // delta_reload
  KeySetMismatch,
  IdentityMismatch,
  // frontends
  UnsupportedKind,
  ConfigInvalid,
  // pipelines
  NanDetected,
  PromptTooLong,
  // cli
  UsageError,
};

const char* error_code_name(ErrorCode code);

/// Every failure surfaced by the library. Errors that correspond to an entry
/// of the device constraint catalog carry its number, and the message always
/// cites it as "constraint #N".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<int> constraint = std::nullopt);

  ErrorCode code() const { return code_; }
  std::optional<int> constraint() const { return constraint_; }

 private:
  ErrorCode code_;
  std::optional<int> constraint_;
};

}  // namespace forge
