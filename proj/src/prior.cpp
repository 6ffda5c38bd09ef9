#include "ftd/prior.hpp"

#include <algorithm>
#include <cmath>

namespace ftd {

std::size_t PriorField::valid_count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

std::optional<Vec3> select_peak(std::span<const Peak> peaks, const Vec3& n, double min_amp) {
  std::optional<std::size_t> best;
  double best_cos = -1.0;
  for (std::size_t i = 0; i < peaks.size(); ++i) {
    const Peak& p = peaks[i];
    if (!(static_cast<double>(p.amplitude) >= min_amp))
      continue;
    // axial angle: smaller angle <=> larger |cos|
    const double c = std::abs(p.direction.cast<double>().dot(n));
    if (!best || c > best_cos ||
        (c == best_cos && p.amplitude > peaks[*best].amplitude)) {
      best = i;
      best_cos = c;
    }
  }
  if (!best)
    return std::nullopt;
  Vec3 d = peaks[*best].direction.cast<double>().normalized();
  if (d.dot(n) < 0.0)
    d = -d;
  return d;
}

PriorField build_prior(const PeaksField& peaks, const Centerline& cl, const Mask& mask,
                       const PriorOptions& options) {
  if (peaks.geometry() != mask.geometry())
    throw DomainError("peaks and mask grids differ");
  if (cl.empty())
    throw DomainError("prior needs a nonempty centerline");
  const GridGeometry& g = mask.geometry();
  PriorField prior(g);

  std::vector<std::uint8_t> on_centerline;
  if (options.centerline_only) {
    on_centerline.assign(g.voxel_count(), 0);
    for (const Vec3& p : cl.points) {
      const Index3 ijk = g.nearest_index(p);
      if (g.contains(ijk))
        on_centerline[g.linear(ijk)] = 1;
    }
  }

  for (std::size_t n = 0; n < mask.size(); ++n) {
    if (mask[n] == 0)
      continue;
    if (options.centerline_only && on_centerline[n] == 0)
      continue;
    const Index3 ijk = g.unravel(n);
    const Vec3 normal = cross_section_normal(cl, g.center(ijk));
    if (auto d = select_peak(peaks.at(ijk), normal, options.min_amp)) {
      prior.directions[n] = *d;
      prior.valid[n] = 1;
    }
  }
  return prior;
}

PeaksField prior_to_peaks(const PriorField& prior) {
  PeaksField out(prior.geometry, 1);
  auto slots = out.slots();
  for (std::size_t n = 0; n < slots.size(); ++n) {
    if (prior.valid[n] == 0)
      continue;
    slots[n].direction = prior.directions[n].cast<float>();
    slots[n].amplitude = 1.0f;
  }
  return out;
}

PriorField prior_from_peaks(const PeaksField& peaks) {
  if (peaks.peaks_per_voxel() != 1)
    throw FormatError("prior file must have peaks_per_voxel 1");
  PriorField prior(peaks.geometry());
  const auto slots = peaks.slots();
  for (std::size_t n = 0; n < slots.size(); ++n) {
    if (slots[n].amplitude > 0.0f && slots[n].direction.squaredNorm() > 0.0f) {
      prior.directions[n] = slots[n].direction.cast<double>();
      prior.valid[n] = 1;
    }
  }
  return prior;
}

} // namespace ftd
