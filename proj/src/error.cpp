// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/error.hpp"

namespace forge {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownInput: return "UnknownInput";
    case ErrorCode::MissingAttr: return "MissingAttr";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::ShapeConflict: return "ShapeConflict";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ConstraintViolation: return "ConstraintViolation";
    case ErrorCode::UnexpandedGelu: return "UnexpandedGelu";
    case ErrorCode::InlineTransposeFlag: return "InlineTransposeFlag";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::EmptyName: return "EmptyName";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedChunk: return "TruncatedChunk";
    case ErrorCode::OffsetMismatch: return "OffsetMismatch";
    case ErrorCode::MissingWeight: return "MissingWeight";
    case ErrorCode::MissingInput: return "MissingInput";
    case ErrorCode::CompileLimitExceeded: return "CompileLimitExceeded";
    case ErrorCode::BannedOp: return "BannedOp";
    case ErrorCode::MissingWeightDict: return "MissingWeightDict";
    case ErrorCode::MilRejected: return "MilRejected";
    case ErrorCode::InvalidProgram: return "InvalidProgram";
    case ErrorCode::InvalidEncoding: return "InvalidEncoding";
    case ErrorCode::Error0x1d: return "Error0x1d";
    case ErrorCode::NotLoaded: return "NotLoaded";
    case ErrorCode::SilentFailureTriggered: return "SilentFailureTriggered";
    case ErrorCode::DoubleLoad: return "DoubleLoad";
    case ErrorCode::DoubleUnload: return "DoubleUnload";
    case ErrorCode::TmpDirMissing: return "TmpDirMissing";
    case ErrorCode::BindingMismatch: return "BindingMismatch";
    case ErrorCode::KeySetMismatch: return "KeySetMismatch";
    case ErrorCode::IdentityMismatch: return "IdentityMismatch";
    case ErrorCode::UnsupportedKind: return "UnsupportedKind";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::NanDetected: return "NanDetected";
    case ErrorCode::PromptTooLong: return "PromptTooLong";
    case ErrorCode::UsageError: return "UsageError";
  }
  return "Unknown";
}

namespace {

std::string decorate(ErrorCode code, const std::string& message,
                     std::optional<int> constraint) {
  std::string out = error_code_name(code);
  if (constraint) out += "(constraint #" + std::to_string(*constraint) + ")";
  out += ": ";
  out += message;
  return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message,
             std::optional<int> constraint)
    : std::runtime_error(decorate(code, message, constraint)),
      code_(code),
      constraint_(constraint) {}

}  // namespace forge
