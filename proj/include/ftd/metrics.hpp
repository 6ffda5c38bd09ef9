#pragma once

#include <span>
#include <vector>

#include "ftd/centerline.hpp"
#include "ftd/grid.hpp"

namespace ftd {

/// Rasterizes a tract: segments are densified at <= min(spacing)/2 and each
/// sample marks its nearest voxel. Samples outside the grid are ignored.
Mask voxelize(const Tract& tract, const GridGeometry& reference);

/// Dice coefficient in percent, 200 |A n B| / (|A| + |B|); 0 when both empty.
double spatial_overlap(const Mask& a, const Mask& b);

struct FiberDistance {
  double hd = 0.0;  // mm
  double ahd = 0.0; // mm
};

/// Symmetric Hausdorff and averaged Hausdorff distances between the pooled
/// point sets of two tracts. Throws DomainError on an empty tract.
FiberDistance hausdorff(const Tract& a, const Tract& b);

/// For every point of `queries`, the distance to the nearest point of
/// `targets` (exact; bucket-grid accelerated).
std::vector<double> nearest_distances(std::span<const Vec3> queries,
                                      std::span<const Vec3> targets);

/// Fraction of streamlines whose nearest-axis arc-length positions reach
/// within `tolerance` mm of both ends of `axis`.
double completion_fraction(const Tract& tract, const Centerline& axis, double tolerance);

} // namespace ftd
