#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include "ftd/centerline.hpp"
#include "ftd/grid.hpp"

namespace ftd {

enum class PhantomKind { straight_tube, quarter_torus, helix, fanning };

std::string to_string(PhantomKind kind);
PhantomKind phantom_kind_from_string(const std::string& name);

/// Synthetic bundle description. Lengths in mm.
///
///   straight_tube  axis (t, 0, 0), t in [0, length]; v = (1, 0, 0)
///   quarter_torus  axis R (cos t, sin t, 0), t in [0, pi/2]; v = (-y, x, 0) / R
///   helix          axis (R cos t, R sin t, c t), t in [0, 2 pi turns];
///                  v = (-y, x, c) / sqrt(R^2 + c^2)
///   fanning        axis (t, 0, 0), t in [0, length]; v = (1, a y, -a z), the
///                  bundle is the flow image of the disc of `radius` at x = 0
struct PhantomSpec {
  PhantomKind kind = PhantomKind::helix;
  double radius = 3.0;
  double length = 40.0;
  double major_radius = 20.0;
  double helix_radius = 8.0;
  double pitch = 3.0; // helix rise per radian
  double turns = 1.0;
  double fan_rate = 0.02;
  double spacing = 1.0;
  int margin = 2; // background voxels around the bundle bounding box
  int distractors = 0;
  double distractor_amplitude = 0.8;
  double distractor_band = 1.0 / 3.0; // centered fraction of the axis length
  double noise_deg = 0.0;             // angular jitter of the primary peak
  std::optional<Eigen::Array3i> dims; // explicit grid; auto-sized otherwise
  std::optional<Eigen::Array3d> origin;

  void validate() const;
};

PhantomSpec parse_phantom_spec(const std::string& text);
PhantomSpec load_phantom_spec(const std::filesystem::path& path);
std::string format_phantom_spec(const PhantomSpec& spec);

/// Closed-form divergence-free field and the bundle axis it carries.
class AnalyticField {
public:
  explicit AnalyticField(const PhantomSpec& spec);

  Vec3 operator()(const Vec3& p) const;
  /// Exact divergence from the hand-derived partial derivatives.
  double divergence(const Vec3& p) const;

  Vec3 axis_point(double t) const;
  Vec3 axis_tangent(double t) const; // unit
  double t_min() const { return 0.0; }
  double t_max() const;
  double axis_speed() const; // |d axis / dt|, constant
  double arc_length() const { return axis_speed() * t_max(); }

  /// Axis parameter of the point of the axis nearest to p.
  double nearest_parameter(const Vec3& p) const;
  bool in_bundle(const Vec3& p) const;

  const PhantomSpec& spec() const { return spec_; }

private:
  PhantomSpec spec_;
};

struct Phantom {
  PhantomSpec spec;
  Mask mask;
  PeaksField peaks;
  Centerline axis; // analytic, exact tangents
  AnalyticField field;
};

Phantom generate(const PhantomSpec& spec, std::uint64_t rng_seed);

/// Axis sampled at uniform arc length `step` with analytic tangents.
Centerline analytic_axis(const AnalyticField& field, double step);

/// Reference trajectory: RK4 on the unit closed-form field, uniform step of
/// at most `fine_step`, ending exactly at the requested arc length.
std::vector<Vec3> analytic_streamline(const AnalyticField& field, const Vec3& seed,
                                      double arc_length, double fine_step);

/// Ground-truth streamlines through each seed, integrated both ways at
/// step/10 until they leave the mask, recorded every `step` mm.
Tract reference_tract(const AnalyticField& field, const Mask& mask, std::span<const Vec3> seeds,
                      double step);

void save_descriptor(const std::filesystem::path& path, const Phantom& phantom,
                     std::uint64_t rng_seed);
PhantomSpec load_descriptor(const std::filesystem::path& path);

} // namespace ftd
