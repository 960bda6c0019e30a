// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace strokeseg {

enum class ErrorCode {
  kMissingFile,
  kMalformedHeader,
  kNon3DPayload,
  kUnsupportedAffine,
  kUnwritablePath,
  kInvalidArgument,
  kGeometryMismatch,
  kDegenerateInput,
  kUnplaceableLesion,
  kShapeMismatch,
  kNonFinite,
  kCheckpointMismatch,
  kMissingMask,
  kEmptyDataset,
};

const char* to_string(ErrorCode code);

/// Base exception for the library. Every failure carries a machine-readable
/// code so callers (and tests) can distinguish error kinds.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Rethrows `e` with a stage label prepended, preserving its code.
[[noreturn]] void rethrow_with_stage(const Error& e, const std::string& stage);

}  // namespace strokeseg
