#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "ftd/grid.hpp"
#include "ftd/poly_field.hpp"
#include "ftd/prior.hpp"

namespace ftd {

inline constexpr double kDefaultStep = 0.3;
inline constexpr double kDefaultSigma = 0.1;
inline constexpr double kDefaultAngleMax = 40.0;
inline constexpr double kZeroField = 1e-12;

struct TrackParams {
  double step = kDefaultStep; // mm
  double sigma = kDefaultSigma;
  int max_steps = 2000; // per direction
  int seed_count = 10;  // streamlines per seed
  std::uint64_t rng_seed = 0;
  std::optional<double> min_len; // mm, defaults to 3 * step
  bool bidirectional = true;
  /// Start each repetition at a uniform random position inside the seed's
  /// voxel instead of at the seed point itself.
  bool jitter_seeds = true;

  double min_length() const { return min_len.value_or(3.0 * step); }
  void validate() const;
};

using Rng = std::mt19937_64;

/// Independent generator for one streamline, keyed on the seed position
/// rather than its index so that seed order does not change the output set.
Rng streamline_rng(std::uint64_t rng_seed, const Vec3& seed, int repetition);

/// normalize(normalize(v) + eps), eps ~ N(0, sigma^2 I), flipped to agree
/// with prev. Returns nullopt when |v| < 1e-12.
std::optional<Vec3> sample_direction(const Vec3& v, const std::optional<Vec3>& prev, double sigma,
                                     Rng& rng);

/// Classic RK4 step of length `step` along the unit field direction.
/// k1 = d0; k2..k4 use normalize(field(p)) sign-aligned to d0. Returns
/// nullopt when the field vanishes at a stage point.
template <typename Field>
std::optional<Vec3> rk4_step(const Field& field, const Vec3& eta, const Vec3& d0, double step) {
  if (!(step > 0.0))
    throw DomainError("RK4 step length must be positive");
  auto slope = [&](const Vec3& p) -> std::optional<Vec3> {
    Vec3 v = field(p);
    const double n = v.norm();
    if (!(n >= kZeroField))
      return std::nullopt;
    v /= n;
    if (v.dot(d0) < 0.0)
      v = -v;
    return v;
  };
  const Vec3& k1 = d0;
  const auto k2 = slope(eta + 0.5 * step * k1);
  if (!k2)
    return std::nullopt;
  const auto k3 = slope(eta + 0.5 * step * *k2);
  if (!k3)
    return std::nullopt;
  const auto k4 = slope(eta + step * *k3);
  if (!k4)
    return std::nullopt;
  return Vec3(eta + (step / 6.0) * (k1 + 2.0 * *k2 + 2.0 * *k3 + *k4));
}

/// Streamlines through the fitted field, one per (seed, repetition), ordered
/// by seed index then repetition. Seeds outside the mask are skipped and
/// reported through `skipped`. Throws EmptyTractError if nothing survives.
Tract track(const PolyField& field, const Mask& mask, std::span<const Vec3> seeds,
            const TrackParams& params, std::vector<std::size_t>* skipped = nullptr);

/// Nearest-voxel peak following (Euler steps), with the same stopping and
/// filtering rules as track plus a turning-angle limit in degrees.
Tract baseline_peak_track(const PeaksField& peaks, const Mask& mask, std::span<const Vec3> seeds,
                          const TrackParams& params, double angle_max = kDefaultAngleMax,
                          double cutoff = kDefaultCutoff,
                          std::vector<std::size_t>* skipped = nullptr);

/// World centers of every foreground voxel.
std::vector<Vec3> mask_seeds(const Mask& mask);

} // namespace ftd
