// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#include "strokeseg/volume_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "strokeseg/error.hpp"

namespace strokeseg {
namespace fs = std::filesystem;

namespace {

constexpr int kNiftiHeaderSize = 348;
constexpr int kNiftiDataOffsetNoExt = 352;
// Header extension carrying exact double-precision geometry, since the
// NIfTI-1 header only stores float32 spacing and origin.
constexpr std::int32_t kCommentExtensionCode = 6;
constexpr const char* kGeometryTag = "strokeseg-geometry";

enum NiftiType : std::int16_t {
  kUint8 = 2,
  kInt16 = 4,
  kInt32 = 8,
  kFloat32 = 16,
  kFloat64 = 64,
  kInt8 = 256,
  kUint16 = 512,
  kUint32 = 768,
  kInt64 = 1024,
  kUint64 = 1280,
};

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string describe(const fs::path& path, const std::string& what) {
  return path.string() + ": " + what;
}

std::vector<unsigned char> read_all_gz(const fs::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (!f) throw Error(ErrorCode::kMissingFile, describe(path, "cannot open"));
  std::vector<unsigned char> out;
  std::array<unsigned char, 1 << 16> buf{};
  for (;;) {
    const int n = gzread(f, buf.data(), static_cast<unsigned>(buf.size()));
    if (n < 0) {
      gzclose(f);
      throw Error(ErrorCode::kMalformedHeader, describe(path, "corrupt compressed stream"));
    }
    if (n == 0) break;
    out.insert(out.end(), buf.begin(), buf.begin() + n);
  }
  gzclose(f);
  return out;
}

template <typename T>
T read_scalar(const unsigned char* p, bool swap) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if (swap && sizeof(T) > 1) {
    auto* b = reinterpret_cast<unsigned char*>(&v);
    std::reverse(b, b + sizeof(T));
  }
  return v;
}

template <typename T>
void write_scalar(std::vector<unsigned char>& buf, std::size_t at, T v) {
  std::memcpy(buf.data() + at, &v, sizeof(T));
}

template <typename T>
void promote(const unsigned char* src, std::size_t n, bool swap, double slope, double inter,
             std::vector<double>& out) {
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double raw = static_cast<double>(read_scalar<T>(src + i * sizeof(T), swap));
    out[i] = slope * raw + inter;
  }
}

void check_parent_writable(const fs::path& path) {
  const fs::path parent = path.has_parent_path() ? path.parent_path() : fs::path(".");
  if (!fs::is_directory(parent)) {
    throw Error(ErrorCode::kUnwritablePath, describe(path, "parent directory does not exist"));
  }
}

// Rotation matrix from a NIfTI quaternion (b, c, d) with qfac applied on z.
std::array<std::array<double, 3>, 3> quaternion_matrix(double b, double c, double d, double qfac) {
  double a = 1.0 - (b * b + c * c + d * d);
  a = a < 1e-7 ? 0.0 : std::sqrt(a);
  std::array<std::array<double, 3>, 3> r{};
  r[0] = {a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)};
  r[1] = {2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)};
  r[2] = {2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b};
  for (auto& row : r) row[2] *= qfac;
  return r;
}

Geometry geometry_from_nifti(const unsigned char* h, bool swap, const Index3& shape,
                             const fs::path& path) {
  Geometry g;
  g.shape = shape;
  std::array<float, 8> pixdim{};
  for (int i = 0; i < 8; ++i) pixdim[i] = read_scalar<float>(h + 76 + 4 * i, swap);
  const auto qform_code = read_scalar<std::int16_t>(h + 252, swap);
  const auto sform_code = read_scalar<std::int16_t>(h + 254, swap);

  if (sform_code > 0) {
    double m[3][4];
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 4; ++c) m[r][c] = read_scalar<float>(h + 280 + 16 * r + 4 * c, swap);
    }
    double scale = 0.0;
    for (int r = 0; r < 3; ++r) scale = std::max(scale, std::abs(m[r][r]));
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        if (r != c && std::abs(m[r][c]) > 1e-6 * scale) {
          throw Error(ErrorCode::kUnsupportedAffine,
                      describe(path, "sform has rotation/shear; only axis-aligned grids are supported"));
        }
      }
      g.spacing[r] = std::abs(m[r][r]);
      g.origin[r] = m[r][3];
    }
  } else if (qform_code > 0) {
    const double qfac = pixdim[0] < 0 ? -1.0 : 1.0;
    const auto rot = quaternion_matrix(read_scalar<float>(h + 256, swap), read_scalar<float>(h + 260, swap),
                                       read_scalar<float>(h + 264, swap), qfac);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        const double expected = (r == c) ? std::round(rot[r][c]) : 0.0;
        if (std::abs(rot[r][c] - expected) > 1e-5 || (r == c && std::abs(expected) != 1.0)) {
          throw Error(ErrorCode::kUnsupportedAffine,
                      describe(path, "qform has rotation; only axis-aligned grids are supported"));
        }
      }
      g.spacing[r] = std::abs(pixdim[r + 1]);
      g.origin[r] = read_scalar<float>(h + 268 + 4 * r, swap);
    }
  } else {
    for (int r = 0; r < 3; ++r) g.spacing[r] = std::abs(pixdim[r + 1]);
  }
  for (int r = 0; r < 3; ++r) {
    if (!(g.spacing[r] > 0.0)) {
      throw Error(ErrorCode::kMalformedHeader, describe(path, "non-positive voxel spacing"));
    }
  }
  return g;
}

// Parses the exact-geometry comment extension if present and consistent.
void apply_geometry_extension(const std::vector<unsigned char>& bytes, std::size_t vox_offset, bool swap,
                              Geometry& g) {
  if (vox_offset < kNiftiDataOffsetNoExt || bytes.size() < kNiftiDataOffsetNoExt) return;
  if (bytes[kNiftiHeaderSize] == 0) return;
  std::size_t at = kNiftiDataOffsetNoExt;
  while (at + 8 <= vox_offset) {
    const auto esize = read_scalar<std::int32_t>(bytes.data() + at, swap);
    const auto ecode = read_scalar<std::int32_t>(bytes.data() + at + 4, swap);
    if (esize < 8 || at + static_cast<std::size_t>(esize) > vox_offset) return;
    if (ecode == kCommentExtensionCode) {
      std::string text(reinterpret_cast<const char*>(bytes.data() + at + 8), esize - 8);
      text = text.c_str();  // strip NUL padding
      std::istringstream is(text);
      std::string tag;
      Real3 sp{}, org{};
      if (is >> tag && tag == kGeometryTag && is >> sp[0] >> sp[1] >> sp[2] >> org[0] >> org[1] >> org[2]) {
        bool consistent = true;
        for (int a = 0; a < 3; ++a) {
          const double tol_s = 1e-5 * std::max(1.0, std::abs(sp[a]));
          const double tol_o = 1e-5 * std::max(1.0, std::abs(org[a]));
          consistent = consistent && std::abs(sp[a] - g.spacing[a]) <= tol_s &&
                       std::abs(org[a] - g.origin[a]) <= tol_o;
        }
        if (consistent) {
          g.spacing = sp;
          g.origin = org;
        }
      }
    }
    at += static_cast<std::size_t>(esize);
  }
}

Volume load_nifti(const fs::path& path) {
  const std::vector<unsigned char> bytes = read_all_gz(path);
  if (bytes.size() < kNiftiHeaderSize) {
    throw Error(ErrorCode::kMalformedHeader, describe(path, "file shorter than a NIfTI-1 header"));
  }
  const unsigned char* h = bytes.data();
  bool swap = false;
  const auto sizeof_hdr = read_scalar<std::int32_t>(h, false);
  if (sizeof_hdr != kNiftiHeaderSize) {
    if (read_scalar<std::int32_t>(h, true) != kNiftiHeaderSize) {
      throw Error(ErrorCode::kMalformedHeader, describe(path, "sizeof_hdr is not 348"));
    }
    swap = true;
  }
  if (std::memcmp(h + 344, "n+1", 4) != 0) {
    throw Error(ErrorCode::kMalformedHeader, describe(path, "missing single-file NIfTI-1 magic 'n+1'"));
  }
  std::array<std::int16_t, 8> dim{};
  for (int i = 0; i < 8; ++i) dim[i] = read_scalar<std::int16_t>(h + 40 + 2 * i, swap);
  if (dim[0] < 1 || dim[0] > 7) {
    throw Error(ErrorCode::kMalformedHeader, describe(path, "dim[0] out of range"));
  }
  if (dim[0] < 3) throw Error(ErrorCode::kNon3DPayload, describe(path, "non-3D payload"));
  for (int i = 4; i <= dim[0]; ++i) {
    if (dim[i] > 1) throw Error(ErrorCode::kNon3DPayload, describe(path, "non-3D payload"));
  }
  Index3 shape{dim[1], dim[2], dim[3]};
  for (int a = 0; a < 3; ++a) {
    if (shape[a] < 1) throw Error(ErrorCode::kMalformedHeader, describe(path, "non-positive dimension"));
  }

  const auto datatype = read_scalar<std::int16_t>(h + 70, swap);
  const auto vox_offset_f = read_scalar<float>(h + 108, swap);
  double slope = read_scalar<float>(h + 112, swap);
  double inter = read_scalar<float>(h + 116, swap);
  if (slope == 0.0 || !std::isfinite(slope)) {
    slope = 1.0;
    inter = 0.0;
  }
  if (!std::isfinite(inter)) inter = 0.0;
  if (!(vox_offset_f >= kNiftiDataOffsetNoExt - 4)) {
    throw Error(ErrorCode::kMalformedHeader, describe(path, "invalid vox_offset"));
  }
  const auto vox_offset = static_cast<std::size_t>(vox_offset_f);

  Geometry g = geometry_from_nifti(h, swap, shape, path);
  apply_geometry_extension(bytes, vox_offset, swap, g);

  const std::size_t n = g.voxel_count();
  std::size_t width = 0;
  switch (datatype) {
    case kUint8: case kInt8: width = 1; break;
    case kInt16: case kUint16: width = 2; break;
    case kInt32: case kUint32: case kFloat32: width = 4; break;
    case kFloat64: case kInt64: case kUint64: width = 8; break;
    default:
      throw Error(ErrorCode::kMalformedHeader,
                  describe(path, "unsupported datatype " + std::to_string(datatype)));
  }
  if (bytes.size() < vox_offset + n * width) {
    throw Error(ErrorCode::kMalformedHeader, describe(path, "payload shorter than header dimensions"));
  }
  const unsigned char* src = bytes.data() + vox_offset;
  std::vector<double> data;
  switch (datatype) {
    case kUint8: promote<std::uint8_t>(src, n, swap, slope, inter, data); break;
    case kInt8: promote<std::int8_t>(src, n, swap, slope, inter, data); break;
    case kInt16: promote<std::int16_t>(src, n, swap, slope, inter, data); break;
    case kUint16: promote<std::uint16_t>(src, n, swap, slope, inter, data); break;
    case kInt32: promote<std::int32_t>(src, n, swap, slope, inter, data); break;
    case kUint32: promote<std::uint32_t>(src, n, swap, slope, inter, data); break;
    case kFloat32: promote<float>(src, n, swap, slope, inter, data); break;
    case kFloat64: promote<double>(src, n, swap, slope, inter, data); break;
    case kInt64: promote<std::int64_t>(src, n, swap, slope, inter, data); break;
    case kUint64: promote<std::uint64_t>(src, n, swap, slope, inter, data); break;
    default: break;
  }
  return Volume(g, std::move(data));
}

std::vector<unsigned char> nifti_bytes(const Geometry& g, std::int16_t datatype, std::int16_t bitpix,
                                       const std::vector<unsigned char>& payload) {
  char geom[256];
  std::snprintf(geom, sizeof(geom), "%s %.17g %.17g %.17g %.17g %.17g %.17g", kGeometryTag, g.spacing[0],
                g.spacing[1], g.spacing[2], g.origin[0], g.origin[1], g.origin[2]);
  std::string text(geom);
  std::size_t esize = 8 + text.size() + 1;
  esize = (esize + 15) / 16 * 16;
  const std::size_t vox_offset = kNiftiDataOffsetNoExt + esize;

  std::vector<unsigned char> buf(vox_offset, 0);
  write_scalar<std::int32_t>(buf, 0, kNiftiHeaderSize);
  buf[39] = 0;
  const std::int16_t dims[8] = {3, static_cast<std::int16_t>(g.shape[0]), static_cast<std::int16_t>(g.shape[1]),
                                static_cast<std::int16_t>(g.shape[2]), 1, 1, 1, 1};
  for (int i = 0; i < 8; ++i) write_scalar<std::int16_t>(buf, 40 + 2 * i, dims[i]);
  write_scalar<std::int16_t>(buf, 70, datatype);
  write_scalar<std::int16_t>(buf, 72, bitpix);
  const float pixdim[8] = {1.0f, static_cast<float>(g.spacing[0]), static_cast<float>(g.spacing[1]),
                           static_cast<float>(g.spacing[2]), 1.0f, 1.0f, 1.0f, 1.0f};
  for (int i = 0; i < 8; ++i) write_scalar<float>(buf, 76 + 4 * i, pixdim[i]);
  write_scalar<float>(buf, 108, static_cast<float>(vox_offset));
  write_scalar<float>(buf, 112, 1.0f);
  write_scalar<float>(buf, 116, 0.0f);
  buf[123] = 2;  // xyzt_units: mm
  write_scalar<std::int16_t>(buf, 252, 1);
  write_scalar<std::int16_t>(buf, 254, 1);
  for (int r = 0; r < 3; ++r) {
    write_scalar<float>(buf, 268 + 4 * r, static_cast<float>(g.origin[r]));
    for (int c = 0; c < 4; ++c) {
      const double v = c == 3 ? g.origin[r] : (c == r ? g.spacing[r] : 0.0);
      write_scalar<float>(buf, 280 + 16 * r + 4 * c, static_cast<float>(v));
    }
  }
  std::memcpy(buf.data() + 344, "n+1\0", 4);
  buf[kNiftiHeaderSize] = 1;  // extension present
  write_scalar<std::int32_t>(buf, kNiftiDataOffsetNoExt, static_cast<std::int32_t>(esize));
  write_scalar<std::int32_t>(buf, kNiftiDataOffsetNoExt + 4, kCommentExtensionCode);
  std::memcpy(buf.data() + kNiftiDataOffsetNoExt + 8, text.data(), text.size());
  buf.insert(buf.end(), payload.begin(), payload.end());
  return buf;
}

void write_bytes(const fs::path& path, const std::vector<unsigned char>& bytes, bool compress) {
  check_parent_writable(path);
  if (compress) {
    gzFile f = gzopen(path.string().c_str(), "wb6");
    if (!f) throw Error(ErrorCode::kUnwritablePath, describe(path, "cannot open for writing"));
    const int written = gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
    const int rc = gzclose(f);
    if (written != static_cast<int>(bytes.size()) || rc != Z_OK) {
      throw Error(ErrorCode::kUnwritablePath, describe(path, "write failed"));
    }
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::kUnwritablePath, describe(path, "cannot open for writing"));
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error(ErrorCode::kUnwritablePath, describe(path, "write failed"));
}

fs::path raw_header_path(const fs::path& path) {
  fs::path h = path;
  h.replace_extension(".volhdr");
  return h;
}

Volume load_raw(const fs::path& path) {
  fs::path data_path = path;
  if (data_path.extension() == ".volhdr") data_path.replace_extension(".vol");
  const fs::path hdr_path = raw_header_path(data_path);
  if (!fs::exists(data_path)) throw Error(ErrorCode::kMissingFile, describe(data_path, "no such file"));
  if (!fs::exists(hdr_path)) throw Error(ErrorCode::kMissingFile, describe(hdr_path, "no such file"));

  std::ifstream hs(hdr_path);
  std::string line;
  std::vector<double> shape_vals, spacing_vals, origin_vals;
  while (std::getline(hs, line)) {
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key) || key[0] == '#') continue;
    std::vector<double>* dst = nullptr;
    if (key == "shape") dst = &shape_vals;
    else if (key == "spacing") dst = &spacing_vals;
    else if (key == "origin") dst = &origin_vals;
    else throw Error(ErrorCode::kMalformedHeader, describe(hdr_path, "unknown key '" + key + "'"));
    double v;
    while (ls >> v) dst->push_back(v);
    if (!ls.eof()) throw Error(ErrorCode::kMalformedHeader, describe(hdr_path, "non-numeric value for " + key));
  }
  if (shape_vals.empty()) throw Error(ErrorCode::kMalformedHeader, describe(hdr_path, "missing shape"));
  if (shape_vals.size() != 3) throw Error(ErrorCode::kNon3DPayload, describe(hdr_path, "non-3D payload"));
  if (spacing_vals.size() != 3 || (!origin_vals.empty() && origin_vals.size() != 3)) {
    throw Error(ErrorCode::kMalformedHeader, describe(hdr_path, "spacing/origin need three values"));
  }
  Geometry g;
  for (int a = 0; a < 3; ++a) {
    if (shape_vals[a] < 1 || shape_vals[a] != std::floor(shape_vals[a])) {
      throw Error(ErrorCode::kMalformedHeader, describe(hdr_path, "shape must be positive integers"));
    }
    if (!(spacing_vals[a] > 0)) throw Error(ErrorCode::kMalformedHeader, describe(hdr_path, "spacing must be > 0"));
    g.shape[a] = static_cast<int>(shape_vals[a]);
    g.spacing[a] = spacing_vals[a];
    g.origin[a] = origin_vals.empty() ? 0.0 : origin_vals[a];
  }
  std::ifstream ds(data_path, std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(ds)), std::istreambuf_iterator<char>());
  const std::size_t n = g.voxel_count();
  if (bytes.size() != n * sizeof(double)) {
    throw Error(ErrorCode::kMalformedHeader, describe(data_path, "payload size does not match header shape"));
  }
  std::vector<double> data;
  promote<double>(bytes.data(), n, std::endian::native != std::endian::little, 1.0, 0.0, data);
  return Volume(g, std::move(data));
}

void save_raw(const Volume& v, const fs::path& path) {
  check_parent_writable(path);
  std::vector<unsigned char> bytes(v.size() * sizeof(double));
  std::memcpy(bytes.data(), v.values().data(), bytes.size());
  if constexpr (std::endian::native != std::endian::little) {
    for (std::size_t i = 0; i < v.size(); ++i) std::reverse(bytes.begin() + 8 * i, bytes.begin() + 8 * i + 8);
  }
  write_bytes(path, bytes, false);
  std::ofstream hs(raw_header_path(path));
  if (!hs) throw Error(ErrorCode::kUnwritablePath, describe(raw_header_path(path), "cannot open for writing"));
  char line[256];
  const auto& g = v.geometry();
  std::snprintf(line, sizeof(line), "shape %d %d %d\n", g.shape[0], g.shape[1], g.shape[2]);
  hs << line;
  std::snprintf(line, sizeof(line), "spacing %.17g %.17g %.17g\n", g.spacing[0], g.spacing[1], g.spacing[2]);
  hs << line;
  std::snprintf(line, sizeof(line), "origin %.17g %.17g %.17g\n", g.origin[0], g.origin[1], g.origin[2]);
  hs << line;
}

}  // namespace

VolumeFormat format_for_path(const fs::path& path) {
  const std::string s = path.filename().string();
  if (ends_with(s, ".nii.gz")) return VolumeFormat::kNiftiGz;
  if (ends_with(s, ".nii")) return VolumeFormat::kNifti;
  if (ends_with(s, ".vol") || ends_with(s, ".volhdr")) return VolumeFormat::kRaw;
  throw Error(ErrorCode::kInvalidArgument,
              describe(path, "unrecognized volume extension (expected .nii, .nii.gz or .vol)"));
}

Volume load_volume(const fs::path& path) {
  const VolumeFormat fmt = format_for_path(path);
  if (fmt == VolumeFormat::kRaw) return load_raw(path);
  if (!fs::exists(path)) throw Error(ErrorCode::kMissingFile, describe(path, "no such file"));
  return load_nifti(path);
}

Mask load_mask(const fs::path& path) {
  try {
    return Mask::from_volume(load_volume(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidArgument) {
      throw Error(ErrorCode::kInvalidArgument, describe(path, e.what()));
    }
    throw;
  }
}

void save_volume(const Volume& v, const fs::path& path) {
  const VolumeFormat fmt = format_for_path(path);
  if (fmt == VolumeFormat::kRaw) {
    save_raw(v, path);
    return;
  }
  std::vector<unsigned char> payload(v.size() * sizeof(double));
  std::memcpy(payload.data(), v.values().data(), payload.size());
  write_bytes(path, nifti_bytes(v.geometry(), kFloat64, 64, payload), fmt == VolumeFormat::kNiftiGz);
}

void save_mask(const Mask& m, const fs::path& path) {
  const VolumeFormat fmt = format_for_path(path);
  if (fmt == VolumeFormat::kRaw) {
    save_raw(m.to_volume(), path);
    return;
  }
  std::vector<unsigned char> payload(m.values().begin(), m.values().end());
  write_bytes(path, nifti_bytes(m.geometry(), kUint8, 8, payload), fmt == VolumeFormat::kNiftiGz);
}

}  // namespace strokeseg
