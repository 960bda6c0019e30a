// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include "strokeseg/volume.hpp"

namespace strokeseg {

/// Storage format selected from the file name.
///   *.nii, *.nii.gz  NIfTI-1 single file (gzip detected on read)
///   *.vol            raw little-endian float64, x-fastest, with a
///                    plaintext sidecar *.volhdr (shape/spacing/origin lines)
enum class VolumeFormat { kNifti, kNiftiGz, kRaw };

VolumeFormat format_for_path(const std::filesystem::path& path);

/// Reads a volume. Any numeric NIfTI datatype is promoted to double and
/// scl_slope/scl_inter are applied. Affines with rotation or shear are
/// rejected (kUnsupportedAffine); axis flips are folded into |spacing|.
Volume load_volume(const std::filesystem::path& path);

/// Loads a volume and requires every voxel to be 0 or 1.
Mask load_mask(const std::filesystem::path& path);

/// Writes float64 data. Round-trips bit-exactly through load_volume.
void save_volume(const Volume& v, const std::filesystem::path& path);

/// Writes a mask (uint8 for NIfTI, float64 0/1 for raw).
void save_mask(const Mask& m, const std::filesystem::path& path);

}  // namespace strokeseg
