#pragma once

#include <optional>
#include <span>

#include "ftd/centerline.hpp"
#include "ftd/grid.hpp"

namespace ftd {

inline constexpr double kDefaultCutoff = 0.05;

/// Anatomical orientation prior: one sign-aligned unit direction per
/// foreground voxel, or invalid where no admissible peak exists.
struct PriorField {
  GridGeometry geometry;
  std::vector<Vec3> directions; // per voxel, x-fastest
  std::vector<std::uint8_t> valid;

  PriorField() = default;
  explicit PriorField(const GridGeometry& g)
      : geometry(g), directions(g.voxel_count(), Vec3::Zero()), valid(g.voxel_count(), 0) {}

  std::size_t valid_count() const;
};

/// Picks the peak with the smallest axial angle to n among peaks with
/// amplitude >= min_amp, flipped so that d.n >= 0. Ties go to the larger
/// amplitude, then to storage order.
std::optional<Vec3> select_peak(std::span<const Peak> peaks, const Vec3& n, double min_amp);

struct PriorOptions {
  double min_amp = kDefaultCutoff;
  /// Restrict the prior to voxels that contain a centerline point.
  bool centerline_only = false;
};

/// Throws DomainError when the peaks and mask grids differ.
PriorField build_prior(const PeaksField& peaks, const Centerline& cl, const Mask& mask,
                       const PriorOptions& options = {});

/// Encoded as a one-peak-per-voxel PeaksField with amplitude 1 (valid) or 0.
PeaksField prior_to_peaks(const PriorField& prior);
PriorField prior_from_peaks(const PeaksField& peaks);

} // namespace ftd
