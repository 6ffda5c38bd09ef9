#include <doctest.h>

#include <algorithm>
#include <numbers>

#include "ftd/centerline.hpp"
#include "ftd/metrics.hpp"
#include "ftd/phantom.hpp"
#include "ftd/tracker.hpp"
#include "support.hpp"

using namespace ftd;
using ftd::test::cube_geometry;

namespace {

using std::numbers::pi;

Vec3 rotational(const Vec3& p) { return {-p.y(), p.x(), 0.0}; }

double circle_error(double lambda, int steps, double radius) {
  Vec3 eta(radius, 0, 0);
  for (int i = 0; i < steps; ++i) {
    const Vec3 d0 = rotational(eta).normalized();
    eta = *rk4_step(rotational, eta, d0, lambda);
  }
  const double angle = lambda * steps / radius;
  return (eta - Vec3(radius * std::cos(angle), radius * std::sin(angle), 0)).norm();
}

struct Pipeline {
  Phantom ph;
  Centerline cl;
  PolyField field;
};

Pipeline build(const PhantomSpec& spec, std::uint64_t seed) {
  Phantom ph = generate(spec, seed);
  Centerline cl = extract_centerline(ph.mask, ph.axis.p1, ph.axis.p2);
  PolyField f = fit_ftd(build_prior(ph.peaks, cl, ph.mask), ph.mask, 4);
  return {std::move(ph), std::move(cl), std::move(f)};
}

std::vector<Vec3> section_seeds(const Mask& mask, const Centerline& cl, double depth) {
  const DistanceField dt = distance_transform(mask);
  std::vector<Vec3> seeds;
  for (const auto& v : cross_section_voxels(mask, cl, cl.points.size() / 2))
    if (dt(v) >= depth)
      seeds.push_back(mask.geometry().center(v));
  return seeds;
}

std::vector<std::vector<double>> canonical(const Tract& t) {
  std::vector<std::vector<double>> out;
  for (const auto& l : t.streamlines) {
    std::vector<double> flat;
    for (const auto& p : l)
      flat.insert(flat.end(), {p[0], p[1], p[2]});
    out.push_back(flat);
  }
  std::sort(out.begin(), out.end());
  return out;
}

} // namespace

TEST_CASE("sample_direction without noise") {
  Rng rng(1);
  CHECK(*sample_direction({2, 0, 0}, std::nullopt, 0.0, rng) == Vec3(1, 0, 0));
  CHECK(*sample_direction({-1, 0, 0}, Vec3(1, 0, 0), 0.0, rng) == Vec3(1, 0, 0));
  CHECK_FALSE(sample_direction({0, 0, 1e-13}, std::nullopt, 0.1, rng));
}

TEST_CASE("sample_direction statistics") {
  const double sigma = 0.1;
  Rng rng(99);
  const int n = 100000;
  Vec3 mean = Vec3::Zero();
  double sum_y = 0.0, sum_y2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec3 d = *sample_direction({1, 0, 0}, std::nullopt, sigma, rng);
    CHECK(std::abs(d.norm() - 1.0) <= 1e-12);
    mean += d;
    sum_y += d.y();
    sum_y2 += d.y() * d.y();
  }
  const double angle = std::acos(mean.normalized().x()) * 180.0 / pi;
  CHECK(angle < 1.0);
  const double std_y = std::sqrt(sum_y2 / n - (sum_y / n) * (sum_y / n));

  // E[y^2] for y = e_y / |(1 + e_x, e_y, e_z)| by tensor-product quadrature
  const int q = 48;
  const double lim = 7.0 * sigma, h = 2 * lim / q;
  double w_sum = 0.0, y2 = 0.0;
  for (int a = 0; a <= q; ++a)
    for (int b = 0; b <= q; ++b)
      for (int c = 0; c <= q; ++c) {
        const double ex = -lim + a * h, ey = -lim + b * h, ez = -lim + c * h;
        const double w = std::exp(-(ex * ex + ey * ey + ez * ez) / (2 * sigma * sigma));
        const double y = ey / std::sqrt((1 + ex) * (1 + ex) + ey * ey + ez * ez);
        w_sum += w;
        y2 += w * y * y;
      }
  const double expected = std::sqrt(y2 / w_sum);
  CHECK(std::abs(std_y - expected) <= 0.05 * expected);
}

TEST_CASE("rk4 on simple fields") {
  auto constant = [](const Vec3&) { return Vec3(1, 0, 0); };
  CHECK(rk4_step(constant, Vec3::Zero(), Vec3(1, 0, 0), 0.3)->isApprox(Vec3(0.3, 0, 0), 1e-15));
  CHECK_THROWS_AS(rk4_step(constant, Vec3::Zero(), Vec3(1, 0, 0), 0.0), DomainError);
  auto vanishing = [](const Vec3& p) { return p.x() > 0.1 ? Vec3::Zero() : Vec3(1, 0, 0); };
  CHECK_FALSE(rk4_step(vanishing, Vec3::Zero(), Vec3(1, 0, 0), 0.3));
}

TEST_CASE("rk4 closes a circle with fourth-order error") {
  const int n = 126;
  const double lambda = 2 * pi / n;
  const double e1 = circle_error(lambda, n, 1.0);
  CHECK(e1 <= 1e-5);
  Vec3 eta(1, 0, 0);
  for (int i = 0; i < n; ++i)
    eta = *rk4_step(rotational, eta, rotational(eta).normalized(), lambda);
  CHECK((eta - Vec3(1, 0, 0)).norm() <= 1e-5);
  // the ratio is checked where lambda times curvature is small
  const double c1 = circle_error(0.4, 40, 10.0);
  const double c2 = circle_error(0.2, 80, 10.0);
  CHECK(c1 / c2 == doctest::Approx(16.0).epsilon(0.1));
}

TEST_CASE("straight tube streamlines run end to end") {
  PhantomSpec spec;
  spec.kind = PhantomKind::straight_tube;
  const Pipeline p = build(spec, 0);
  TrackParams params;
  params.sigma = 0.0;
  params.seed_count = 1;
  params.jitter_seeds = false;
  const std::vector<Vec3> seeds{{20, 0, 0}, {10, 0, 0}, {30, 0, 0}};
  const Tract t = track(p.field, p.ph.mask, seeds, params);
  REQUIRE(t.streamlines.size() == 3);
  // the nearest-voxel mask spans the axis from -r - s/2 to L + r + s/2
  const double extent = spec.length + 2 * spec.radius + spec.spacing;
  for (const auto& l : t.streamlines)
    CHECK(std::abs(arc_length(l) - extent) <= 0.02 * extent);
}

TEST_CASE("helix streamlines from the bundle core reach both ends") {
  PhantomSpec spec;
  spec.kind = PhantomKind::helix;
  const Pipeline p = build(spec, 5);
  TrackParams params;
  params.rng_seed = 17;
  const Tract t = track(p.field, p.ph.mask, section_seeds(p.ph.mask, p.cl, 1.5), params);
  CHECK(completion_fraction(t, p.ph.axis, spec.radius + spec.spacing) >= 0.9);
}

TEST_CASE("stopping rules and filtering") {
  PhantomSpec spec;
  spec.kind = PhantomKind::quarter_torus;
  const Pipeline p = build(spec, 1);
  const auto seeds = section_seeds(p.ph.mask, p.cl, 0.0);

  TrackParams one;
  one.max_steps = 1;
  CHECK_THROWS_AS(track(p.field, p.ph.mask, seeds, one), EmptyTractError);
  one.min_len = 0.0;
  const Tract t = track(p.field, p.ph.mask, seeds, one);
  for (const auto& l : t.streamlines)
    CHECK(l.size() <= 3);

  TrackParams params;
  params.rng_seed = 4;
  const Tract full = track(p.field, p.ph.mask, seeds, params);
  for (const auto& l : full.streamlines) {
    CHECK(arc_length(l) >= params.min_length());
    for (std::size_t i = 1; i + 1 < l.size(); ++i)
      CHECK(inside(p.ph.mask, l[i]));
    for (std::size_t i = 1; i < l.size(); ++i)
      CHECK((l[i] - l[i - 1]).norm() <= 2 * params.step);
  }
}

TEST_CASE("tracking is deterministic and independent of seed order") {
  PhantomSpec spec;
  spec.kind = PhantomKind::helix;
  const Pipeline p = build(spec, 2);
  auto seeds = section_seeds(p.ph.mask, p.cl, 0.0);
  TrackParams params;
  params.rng_seed = 123;
  params.seed_count = 3;
  const Tract a = track(p.field, p.ph.mask, seeds, params);
  const Tract b = track(p.field, p.ph.mask, seeds, params);
  REQUIRE(a.streamlines.size() == b.streamlines.size());
  for (std::size_t i = 0; i < a.streamlines.size(); ++i)
    CHECK(a.streamlines[i] == b.streamlines[i]);

  std::reverse(seeds.begin(), seeds.end());
  const Tract c = track(p.field, p.ph.mask, seeds, params);
  CHECK(canonical(a) == canonical(c));

  params.rng_seed = 124;
  const Tract d = track(p.field, p.ph.mask, seeds, params);
  CHECK(canonical(a) != canonical(d));
}

TEST_CASE("backward half starts along the reversed first direction") {
  const Mask m(cube_geometry(30, 5, 5, 1.0, {-15, -2, -2}), 1);
  Eigen::Matrix3Xd a = Eigen::Matrix3Xd::Zero(3, monomial_count(1));
  a(0, 0) = 1.0;
  const PolyField constant(1, a);
  TrackParams params;
  params.sigma = 0.2;
  params.seed_count = 5;
  params.jitter_seeds = false;
  const Vec3 seed(0, 0, 0);
  const Tract t = track(constant, m, std::vector<Vec3>{seed}, params);
  for (const auto& l : t.streamlines) {
    const auto it = std::find(l.begin(), l.end(), seed);
    REQUIRE(it != l.end());
    REQUIRE(it != l.begin());
    REQUIRE(it + 1 != l.end());
    CHECK(((*(it + 1) - seed) + (*(it - 1) - seed)).norm() <= 1e-12);
  }
}

TEST_CASE("seeds outside the mask are skipped") {
  PhantomSpec spec;
  spec.kind = PhantomKind::straight_tube;
  const Pipeline p = build(spec, 0);
  std::vector<std::size_t> skipped;
  const std::vector<Vec3> seeds{{20, 0, 0}, {20, 50, 0}};
  TrackParams params;
  const Tract t = track(p.field, p.ph.mask, seeds, params, &skipped);
  CHECK(skipped == std::vector<std::size_t>{1});
  CHECK(!t.empty());
  CHECK_THROWS_AS(track(p.field, p.ph.mask, std::vector<Vec3>{{20, 50, 0}}, params),
                  EmptyTractError);
  TrackParams bad;
  bad.step = 0.0;
  CHECK_THROWS_AS(track(p.field, p.ph.mask, seeds, bad), DomainError);
}

TEST_CASE("baseline matches the fitted tracker on a clean straight tube") {
  PhantomSpec spec;
  spec.kind = PhantomKind::straight_tube;
  const Pipeline p = build(spec, 0);
  const auto seeds = section_seeds(p.ph.mask, p.cl, 0.0);
  TrackParams params;
  params.sigma = 0.0;
  const Tract a = track(p.field, p.ph.mask, seeds, params);
  const Tract b = baseline_peak_track(p.ph.peaks, p.ph.mask, seeds, params);
  const double tol = spec.radius + spec.spacing;
  CHECK(completion_fraction(a, p.ph.axis, tol) == 1.0);
  CHECK(completion_fraction(b, p.ph.axis, tol) == 1.0);
  const double da = spatial_overlap(voxelize(a, p.ph.mask.geometry()), p.ph.mask);
  const double db = spatial_overlap(voxelize(b, p.ph.mask.geometry()), p.ph.mask);
  CHECK(da >= 95.0);
  CHECK(std::abs(da - db) <= 1.0);
}

TEST_CASE("baseline with angle_max 0 stops at the first turn") {
  PhantomSpec spec;
  spec.kind = PhantomKind::quarter_torus;
  const Pipeline p = build(spec, 0);
  TrackParams params;
  params.sigma = 0.0;
  params.min_len = 0.0;
  params.jitter_seeds = false;
  params.seed_count = 1;
  const auto seeds = section_seeds(p.ph.mask, p.cl, 0.0);
  const Tract t = baseline_peak_track(p.ph.peaks, p.ph.mask, seeds, params, 0.0);
  for (const auto& l : t.streamlines) {
    CHECK(arc_length(l) < 4.0);
    for (std::size_t i = 2; i < l.size(); ++i)
      CHECK((l[i] - l[i - 1]).normalized().dot((l[i - 1] - l[i - 2]).normalized()) >=
            1.0 - 1e-12);
  }
  const Tract wide = baseline_peak_track(p.ph.peaks, p.ph.mask, seeds, params, 40.0);
  CHECK(completion_fraction(wide, p.ph.axis, spec.radius + spec.spacing) > 0.5);
}
