#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ftd/common.hpp"

namespace ftd {

/// Axis-aligned voxel lattice: `origin` is the world position (mm) of the
/// center of voxel (0,0,0); voxel (i,j,k) sits at origin + (i,j,k)*spacing.
/// Rotated frames are not representable.
struct GridGeometry {
  Eigen::Array3i dims{1, 1, 1};
  Eigen::Array3d spacing{1.0, 1.0, 1.0};
  Eigen::Array3d origin{0.0, 0.0, 0.0};

  GridGeometry() = default;
  GridGeometry(const Eigen::Array3i& d, const Eigen::Array3d& s, const Eigen::Array3d& o);

  /// Throws DomainError unless dims >= 1 and spacing > 0.
  void validate() const;

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
  }

  bool contains(const Index3& ijk) const {
    return (ijk.array() >= 0).all() && (ijk.array() < dims).all();
  }

  /// x-fastest linear offset; caller guarantees contains(ijk).
  std::size_t linear(const Index3& ijk) const {
    return static_cast<std::size_t>(ijk[0]) +
           static_cast<std::size_t>(dims[0]) *
               (static_cast<std::size_t>(ijk[1]) +
                static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(ijk[2]));
  }

  Index3 unravel(std::size_t n) const;

  /// No range check; see ftd::world_from_index for the checked version.
  Vec3 center(const Index3& ijk) const {
    return (origin + ijk.cast<double>().array() * spacing).matrix();
  }

  /// Continuous voxel coordinates of a world point.
  Vec3 continuous_index(const Vec3& p) const {
    return ((p.array() - origin) / spacing).matrix();
  }

  /// Nearest voxel index, rounding halves upward. May be out of range.
  Index3 nearest_index(const Vec3& p) const;

  bool operator==(const GridGeometry& other) const {
    return (dims == other.dims).all() && (spacing == other.spacing).all() &&
           (origin == other.origin).all();
  }
  bool operator!=(const GridGeometry& other) const { return !(*this == other); }
};

/// Dense scalar volume, one value per voxel, x-fastest.
template <typename T>
class VolumeGrid {
public:
  using value_type = T;

  VolumeGrid() = default;
  explicit VolumeGrid(const GridGeometry& geometry, T fill = T{})
      : geometry_(geometry), data_(geometry.voxel_count(), fill) {
    geometry_.validate();
  }
  VolumeGrid(const GridGeometry& geometry, std::vector<T> data)
      : geometry_(geometry), data_(std::move(data)) {
    geometry_.validate();
    if (data_.size() != geometry_.voxel_count())
      throw DomainError("volume data length does not match dims");
  }

  const GridGeometry& geometry() const { return geometry_; }
  const Eigen::Array3i& dims() const { return geometry_.dims; }
  std::size_t size() const { return data_.size(); }

  T& operator()(const Index3& ijk) { return data_[geometry_.linear(ijk)]; }
  const T& operator()(const Index3& ijk) const { return data_[geometry_.linear(ijk)]; }
  T& operator()(int i, int j, int k) { return (*this)(Index3(i, j, k)); }
  const T& operator()(int i, int j, int k) const { return (*this)(Index3(i, j, k)); }

  T& operator[](std::size_t n) { return data_[n]; }
  const T& operator[](std::size_t n) const { return data_[n]; }

  /// Value at ijk, or `outside` when ijk is out of range.
  T value_or(const Index3& ijk, T outside) const {
    return geometry_.contains(ijk) ? (*this)(ijk) : outside;
  }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

private:
  GridGeometry geometry_;
  std::vector<T> data_;
};

/// Binary bundle mask (values 0 or 1).
using Mask = VolumeGrid<std::uint8_t>;
using ScalarVolume = VolumeGrid<float>;

std::size_t foreground_count(const Mask& mask);
std::vector<Index3> foreground_voxels(const Mask& mask);

/// Checked index-to-world transform; throws IndexError out of range.
Vec3 world_from_index(const GridGeometry& geometry, const Index3& ijk);

template <typename T>
Vec3 world_from_index(const VolumeGrid<T>& grid, const Index3& ijk) {
  return world_from_index(grid.geometry(), ijk);
}

/// Nearest-neighbour membership: the voxel whose center is closest to p must
/// be in range and foreground.
bool inside(const Mask& mask, const Vec3& p);

struct Peak {
  Eigen::Vector3f direction = Eigen::Vector3f::Zero();
  float amplitude = 0.0f;
};

/// Per-voxel FOD peaks, fixed `peaks_per_voxel` slots per voxel, zero-padded.
/// Stored directions are unit vectors; amplitudes descend within a voxel.
class PeaksField {
public:
  PeaksField() = default;
  PeaksField(const GridGeometry& geometry, int peaks_per_voxel);

  const GridGeometry& geometry() const { return geometry_; }
  int peaks_per_voxel() const { return k_; }

  /// Replace the peaks of one voxel. Directions are normalized, entries are
  /// sorted by descending amplitude (stable) and truncated to peaks_per_voxel.
  void set(const Index3& ijk, std::vector<Peak> peaks);

  /// Non-padding entries of a voxel, in storage order.
  std::span<const Peak> at(const Index3& ijk) const;

  /// All slots including padding, voxel-major.
  std::span<const Peak> slots() const { return slots_; }
  std::span<Peak> slots() { return slots_; }

  /// Throws FormatError when a non-padding direction is not unit or the
  /// amplitudes of a voxel are not descending.
  void validate() const;

private:
  std::size_t used(std::size_t voxel) const;

  GridGeometry geometry_;
  int k_ = 0;
  std::vector<Peak> slots_;
};

using Streamline = std::vector<Vec3>;

struct Tract {
  std::vector<Streamline> streamlines;
  double step = 0.0;

  bool empty() const { return streamlines.empty(); }
  std::size_t point_count() const;
};

double arc_length(std::span<const Vec3> line);

} // namespace ftd
