#include "ftd/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ftd {

GridGeometry::GridGeometry(const Eigen::Array3i& d, const Eigen::Array3d& s,
                           const Eigen::Array3d& o)
    : dims(d), spacing(s), origin(o) {
  validate();
}

void GridGeometry::validate() const {
  if ((dims < 1).any())
    throw DomainError("grid dims must be >= 1");
  if (!(spacing > 0.0).all() || !spacing.allFinite())
    throw DomainError("grid spacing must be positive");
  if (!origin.allFinite())
    throw DomainError("grid origin must be finite");
}

Index3 GridGeometry::unravel(std::size_t n) const {
  const auto nx = static_cast<std::size_t>(dims[0]);
  const auto ny = static_cast<std::size_t>(dims[1]);
  return {static_cast<int>(n % nx), static_cast<int>((n / nx) % ny),
          static_cast<int>(n / (nx * ny))};
}

Index3 GridGeometry::nearest_index(const Vec3& p) const {
  const Vec3 c = continuous_index(p);
  Index3 ijk;
  for (int a = 0; a < 3; ++a) {
    const double r = std::floor(c[a] + 0.5);
    // clamp far-away points so the int conversion stays defined
    ijk[a] = static_cast<int>(std::clamp(r, -1.0, static_cast<double>(dims[a])));
  }
  return ijk;
}

std::size_t foreground_count(const Mask& mask) {
  return static_cast<std::size_t>(
      std::count_if(mask.data().begin(), mask.data().end(), [](auto v) { return v != 0; }));
}

std::vector<Index3> foreground_voxels(const Mask& mask) {
  std::vector<Index3> out;
  for (std::size_t n = 0; n < mask.size(); ++n)
    if (mask[n] != 0)
      out.push_back(mask.geometry().unravel(n));
  return out;
}

Vec3 world_from_index(const GridGeometry& geometry, const Index3& ijk) {
  if (!geometry.contains(ijk))
    throw IndexError("voxel index (" + std::to_string(ijk[0]) + "," + std::to_string(ijk[1]) +
                     "," + std::to_string(ijk[2]) + ") out of range");
  return geometry.center(ijk);
}

bool inside(const Mask& mask, const Vec3& p) {
  if (!p.allFinite())
    return false;
  const Index3 ijk = mask.geometry().nearest_index(p);
  return mask.value_or(ijk, 0) != 0;
}

PeaksField::PeaksField(const GridGeometry& geometry, int peaks_per_voxel)
    : geometry_(geometry), k_(peaks_per_voxel) {
  geometry_.validate();
  if (k_ < 1)
    throw DomainError("peaks_per_voxel must be >= 1");
  slots_.assign(geometry_.voxel_count() * static_cast<std::size_t>(k_), Peak{});
}

void PeaksField::set(const Index3& ijk, std::vector<Peak> peaks) {
  if (!geometry_.contains(ijk))
    throw IndexError("peak voxel out of range");
  std::erase_if(peaks, [](const Peak& p) { return p.direction.squaredNorm() == 0.0f; });
  for (auto& p : peaks) {
    p.direction = p.direction.cast<double>().normalized().cast<float>();
    if (p.amplitude < 0.0f)
      throw DomainError("peak amplitude must be nonnegative");
  }
  std::stable_sort(peaks.begin(), peaks.end(),
                   [](const Peak& a, const Peak& b) { return a.amplitude > b.amplitude; });
  if (peaks.size() > static_cast<std::size_t>(k_))
    peaks.resize(static_cast<std::size_t>(k_));
  const std::size_t base = geometry_.linear(ijk) * static_cast<std::size_t>(k_);
  for (int s = 0; s < k_; ++s)
    slots_[base + static_cast<std::size_t>(s)] =
        static_cast<std::size_t>(s) < peaks.size() ? peaks[static_cast<std::size_t>(s)] : Peak{};
}

std::size_t PeaksField::used(std::size_t voxel) const {
  const std::size_t base = voxel * static_cast<std::size_t>(k_);
  std::size_t n = 0;
  while (n < static_cast<std::size_t>(k_) && slots_[base + n].direction.squaredNorm() > 0.0f)
    ++n;
  return n;
}

std::span<const Peak> PeaksField::at(const Index3& ijk) const {
  const std::size_t voxel = geometry_.linear(ijk);
  return std::span<const Peak>(slots_).subspan(voxel * static_cast<std::size_t>(k_), used(voxel));
}

void PeaksField::validate() const {
  for (std::size_t v = 0; v < geometry_.voxel_count(); ++v) {
    const std::size_t base = v * static_cast<std::size_t>(k_);
    const std::size_t n = used(v);
    for (std::size_t s = 0; s < n; ++s) {
      const Peak& p = slots_[base + s];
      if (std::abs(p.direction.cast<double>().norm() - 1.0) > 1e-6)
        throw FormatError("peak direction at voxel " + std::to_string(v) + " is not unit norm");
      if (!(p.amplitude >= 0.0f))
        throw FormatError("negative peak amplitude at voxel " + std::to_string(v));
      if (s > 0 && p.amplitude > slots_[base + s - 1].amplitude)
        throw FormatError("peak amplitudes not descending at voxel " + std::to_string(v));
    }
    for (std::size_t s = n; s < static_cast<std::size_t>(k_); ++s)
      if (slots_[base + s].direction.squaredNorm() > 0.0f)
        throw FormatError("non-padding peak after padding at voxel " + std::to_string(v));
  }
}

std::size_t Tract::point_count() const {
  std::size_t n = 0;
  for (const auto& s : streamlines)
    n += s.size();
  return n;
}

double arc_length(std::span<const Vec3> line) {
  double len = 0.0;
  for (std::size_t i = 1; i < line.size(); ++i)
    len += (line[i] - line[i - 1]).norm();
  return len;
}

} // namespace ftd
