#pragma once

#include <vector>

#include "ftd/grid.hpp"

namespace ftd {

/// Euclidean distance (mm) from each foreground voxel center to the nearest
/// background voxel center; zero on background.
using DistanceField = VolumeGrid<double>;

/// Exact Euclidean distance transform (separable lower-envelope algorithm,
/// anisotropic spacing). Voxels outside the grid count as background.
/// Throws DomainError on an empty mask.
DistanceField distance_transform(const Mask& mask);

/// Foreground voxels that are local maxima of `dt` along at least one of the
/// 13 undirected 26-neighbourhood directions (ties count). Out-of-range
/// neighbours read as 0.
std::vector<Index3> medial_axis(const DistanceField& dt);

/// Cost density along the path, 1 / (DT + eps_dt).
double centerline_cost(double distance);

inline constexpr double kCenterlineEpsilon = 1e-6;

/// Sum of edge_length * (H(u) + H(v)) / 2 over consecutive voxels.
double path_energy(const DistanceField& dt, const std::vector<Index3>& path);

/// Minimal-energy 26-connected foreground path from `from` to `to`
/// (Dijkstra). Throws ConnectivityError when unreachable.
std::vector<Index3> minimal_path(const Mask& mask, const DistanceField& dt, const Index3& from,
                                 const Index3& to);

struct Centerline {
  std::vector<Vec3> points;
  std::vector<Vec3> tangents;
  double length = 0.0;
  Vec3 p1 = Vec3::Zero();
  Vec3 p2 = Vec3::Zero();

  bool empty() const { return points.empty(); }
};

struct CenterlineOptions {
  double resample_step = 0.5; // mm
  int smoothing_passes = 2;
};

/// Builds tangents (central differences, one-sided at the ends, signs made
/// consistent from the first point) and the arc length of an ordered point
/// list. A single point gets the conventional tangent +x.
Centerline centerline_from_points(std::vector<Vec3> points);

/// Energy-minimal centerline between p1 and p2 through the mask, smoothed
/// and resampled at uniform arc length.
Centerline extract_centerline(const Mask& mask, const Vec3& p1, const Vec3& p2,
                              const CenterlineOptions& options = {});

/// Index of the centerline point nearest to p; ties go to the lower index.
std::size_t nearest_point_index(const Centerline& cl, const Vec3& p);

/// Normal of the cross-section plane at p: the tangent of the nearest
/// centerline point.
Vec3 cross_section_normal(const Centerline& cl, const Vec3& p);

/// Foreground voxels lying in the cross-section through centerline point
/// `index`: within half a voxel of the plane and nearest to a centerline
/// point close to `index`.
std::vector<Index3> cross_section_voxels(const Mask& mask, const Centerline& cl,
                                         std::size_t index);

} // namespace ftd
