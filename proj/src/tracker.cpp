#include "ftd/tracker.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <iostream>
#include <numbers>

namespace ftd {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Vec3 jittered_start(const Mask& mask, const Vec3& seed, const TrackParams& params, Rng& rng) {
  if (!params.jitter_seeds)
    return seed;
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  const Eigen::Array3d& s = mask.geometry().spacing;
  const double dx = u(rng), dy = u(rng), dz = u(rng);
  const Vec3 start = seed + Vec3(dx * s[0], dy * s[1], dz * s[2]);
  return inside(mask, start) ? start : seed;
}

struct StepResult {
  Vec3 direction; // unit direction actually sampled
  Vec3 next;
};

// One tracking direction. `step_fn(eta, prev, forced, rng)` returns the next
// step or nullopt to stop. Points after the start are appended to `out`;
// the last one may lie outside the mask.
template <typename StepFn>
std::optional<Vec3> integrate_half(const Mask& mask, const Vec3& start,
                                   std::optional<Vec3> forced_first, std::optional<Vec3> prev,
                                   const TrackParams& params, Rng& rng, StepFn&& step_fn,
                                   std::vector<Vec3>& out) {
  std::optional<Vec3> first;
  Vec3 eta = start;
  for (int t = 0; t < params.max_steps; ++t) {
    const std::optional<Vec3> forced = t == 0 ? forced_first : std::nullopt;
    const std::optional<StepResult> r = step_fn(eta, prev, forced, rng);
    if (!r)
      break;
    if (!first)
      first = r->direction;
    out.push_back(r->next);
    const Vec3 disp = r->next - eta;
    prev = disp.norm() > 0.0 ? Vec3(disp.normalized()) : r->direction;
    eta = r->next;
    if (!inside(mask, eta))
      break;
  }
  return first;
}

template <typename StepFn>
Tract run_tracking(const Mask& mask, std::span<const Vec3> seeds, const TrackParams& params,
                   std::vector<std::size_t>* skipped, StepFn&& step_fn) {
  params.validate();
  Tract tract;
  tract.step = params.step;
  std::size_t used = 0;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const Vec3& seed = seeds[i];
    if (!inside(mask, seed)) {
      std::clog << "warning: seed " << i << " (" << seed.transpose()
                << ") lies outside the mask; skipped\n";
      if (skipped)
        skipped->push_back(i);
      continue;
    }
    ++used;
    for (int rep = 0; rep < params.seed_count; ++rep) {
      Rng rng = streamline_rng(params.rng_seed, seed, rep);
      const Vec3 start = jittered_start(mask, seed, params, rng);

      std::vector<Vec3> forward;
      const auto d0 = integrate_half(mask, start, std::nullopt, std::nullopt, params, rng,
                                     step_fn, forward);
      std::vector<Vec3> backward;
      if (params.bidirectional && d0)
        integrate_half(mask, start, Vec3(-*d0), Vec3(-*d0), params, rng, step_fn, backward);

      Streamline line;
      line.reserve(backward.size() + 1 + forward.size());
      line.insert(line.end(), backward.rbegin(), backward.rend());
      line.push_back(start);
      line.insert(line.end(), forward.begin(), forward.end());
      if (line.size() >= 2 && arc_length(line) >= params.min_length())
        tract.streamlines.push_back(std::move(line));
    }
  }
  if (used == 0)
    throw EmptyTractError("all seeds lie outside the mask");
  if (tract.streamlines.empty())
    throw EmptyTractError("no streamline reached the minimum length of " +
                          std::to_string(params.min_length()) + " mm");
  return tract;
}

} // namespace

void TrackParams::validate() const {
  if (!(step > 0.0))
    throw DomainError("step must be positive");
  if (!(sigma >= 0.0))
    throw DomainError("sigma must be nonnegative");
  if (max_steps < 1)
    throw DomainError("max_steps must be >= 1");
  if (seed_count < 1)
    throw DomainError("seed_count must be >= 1");
  if (!(min_length() >= 0.0))
    throw DomainError("min_len must be nonnegative");
}

Rng streamline_rng(std::uint64_t rng_seed, const Vec3& seed, int repetition) {
  std::uint64_t h = splitmix64(rng_seed);
  for (int a = 0; a < 3; ++a)
    h = splitmix64(h ^ std::bit_cast<std::uint64_t>(seed[a] + 0.0)); // +0.0 folds -0 into 0
  h = splitmix64(h ^ static_cast<std::uint64_t>(repetition));
  return Rng(h);
}

std::optional<Vec3> sample_direction(const Vec3& v, const std::optional<Vec3>& prev, double sigma,
                                     Rng& rng) {
  const double n = v.norm();
  if (!(n >= kZeroField))
    return std::nullopt;
  Vec3 d = v / n;
  if (sigma > 0.0) {
    std::normal_distribution<double> gauss(0.0, sigma);
    const double ex = gauss(rng), ey = gauss(rng), ez = gauss(rng);
    d += Vec3(ex, ey, ez);
    const double m = d.norm();
    if (!(m >= kZeroField))
      return std::nullopt;
    d /= m;
  }
  if (prev && d.dot(*prev) < 0.0)
    d = -d;
  return d;
}

Tract track(const PolyField& field, const Mask& mask, std::span<const Vec3> seeds,
            const TrackParams& params, std::vector<std::size_t>* skipped) {
  auto step_fn = [&](const Vec3& eta, const std::optional<Vec3>& prev,
                     const std::optional<Vec3>& forced, Rng& rng) -> std::optional<StepResult> {
    std::optional<Vec3> d = forced;
    if (!d)
      d = sample_direction(field(eta), prev, params.sigma, rng);
    if (!d)
      return std::nullopt;
    const auto next = rk4_step(field, eta, *d, params.step);
    if (!next)
      return std::nullopt;
    return StepResult{*d, *next};
  };
  return run_tracking(mask, seeds, params, skipped, step_fn);
}

Tract baseline_peak_track(const PeaksField& peaks, const Mask& mask, std::span<const Vec3> seeds,
                          const TrackParams& params, double angle_max, double cutoff,
                          std::vector<std::size_t>* skipped) {
  if (peaks.geometry() != mask.geometry())
    throw DomainError("peaks and mask grids differ");
  if (!(angle_max >= 0.0))
    throw DomainError("angle_max must be nonnegative");
  const double cos_max = std::cos(angle_max * std::numbers::pi / 180.0);
  auto step_fn = [&](const Vec3& eta, const std::optional<Vec3>& prev,
                     const std::optional<Vec3>& forced, Rng& rng) -> std::optional<StepResult> {
    std::optional<Vec3> d = forced;
    if (!d) {
      const Index3 ijk = peaks.geometry().nearest_index(eta);
      if (!peaks.geometry().contains(ijk))
        return std::nullopt;
      const auto candidates = peaks.at(ijk);
      std::optional<Vec3> peak;
      if (prev) {
        peak = select_peak(candidates, *prev, cutoff);
      } else if (!candidates.empty() && candidates.front().amplitude >= cutoff) {
        peak = candidates.front().direction.cast<double>().normalized();
      }
      if (!peak)
        return std::nullopt;
      d = sample_direction(*peak, prev, params.sigma, rng);
      if (!d)
        return std::nullopt;
      if (prev && d->dot(*prev) < cos_max)
        return std::nullopt;
    }
    return StepResult{*d, eta + params.step * *d};
  };
  return run_tracking(mask, seeds, params, skipped, step_fn);
}

std::vector<Vec3> mask_seeds(const Mask& mask) {
  std::vector<Vec3> out;
  for (const Index3& ijk : foreground_voxels(mask))
    out.push_back(mask.geometry().center(ijk));
  return out;
}

} // namespace ftd
