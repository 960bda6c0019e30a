// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#include "strokeseg/error.hpp"

namespace strokeseg {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingFile: return "missing file";
    case ErrorCode::kMalformedHeader: return "malformed header";
    case ErrorCode::kNon3DPayload: return "non-3D payload";
    case ErrorCode::kUnsupportedAffine: return "unsupported affine";
    case ErrorCode::kUnwritablePath: return "unwritable path";
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kGeometryMismatch: return "geometry mismatch";
    case ErrorCode::kDegenerateInput: return "degenerate input";
    case ErrorCode::kUnplaceableLesion: return "unplaceable lesion";
    case ErrorCode::kShapeMismatch: return "shape mismatch";
    case ErrorCode::kNonFinite: return "non-finite value";
    case ErrorCode::kCheckpointMismatch: return "checkpoint mismatch";
    case ErrorCode::kMissingMask: return "missing mask";
    case ErrorCode::kEmptyDataset: return "empty dataset";
  }
  return "unknown error";
}

void rethrow_with_stage(const Error& e, const std::string& stage) {
  throw Error(e.code(), stage + ": " + e.what());
}

}  // namespace strokeseg
