#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ftd/grid.hpp"

namespace ftd {

// RVF ("raw volume format"): `key: value` text header closed by a blank
// line, followed by a raw little-endian payload, x-fastest.
//
//   dims: 64 64 40
//   spacing: 1.25 1.25 1.25
//   origin: 0 0 0
//   dtype: f32            (f32 | u8)
//   encoding: raw
//   peaks_per_voxel: 3    (peaks files only; payload is K*4 f32 per voxel)
//
// Unknown keys are preserved in RvfHeader::extra and ignored otherwise.

enum class DType { f32, u8 };

struct RvfHeader {
  GridGeometry geometry;
  DType dtype = DType::f32;
  int peaks_per_voxel = 0; // 0: not a peaks file
  std::map<std::string, std::string> extra;
};

RvfHeader read_rvf_header(const std::filesystem::path& path);

ScalarVolume load_volume(const std::filesystem::path& path);
void save_volume(const std::filesystem::path& path, const ScalarVolume& volume);

Mask load_mask(const std::filesystem::path& path);
void save_mask(const std::filesystem::path& path, const Mask& mask);

PeaksField load_peaks(const std::filesystem::path& path);
void save_peaks(const std::filesystem::path& path, const PeaksField& peaks);

// Tract text format: `#` comment lines (one of them `# step <λ>`), then one
// `x y z` point per line, streamlines separated by a single blank line.

void save_tract(const std::filesystem::path& path, const Tract& tract,
                const std::vector<std::string>& comments = {});
Tract load_tract(const std::filesystem::path& path, std::vector<std::string>* comments = nullptr);

/// Round-trip-exact decimal rendering (17 significant digits).
std::string format_real(double v);

} // namespace ftd
