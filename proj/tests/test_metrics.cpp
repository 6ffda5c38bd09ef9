#include <doctest.h>

#include "ftd/metrics.hpp"
#include "support.hpp"

using namespace ftd;
using ftd::test::cube_geometry;

namespace {

Tract tract_of(std::vector<Streamline> lines, double step = 0.3) {
  Tract t;
  t.step = step;
  t.streamlines = std::move(lines);
  return t;
}

std::vector<Vec3> random_points(std::size_t n, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<Vec3> p(n);
  for (auto& x : p)
    x = Vec3(u(rng), u(rng), u(rng));
  return p;
}

} // namespace

TEST_CASE("voxelize examples") {
  const GridGeometry g = cube_geometry(5, 3, 3);
  const Mask m = voxelize(tract_of({{{1, 1, 1}, {3, 1, 1}}}), g);
  CHECK(foreground_count(m) == 3);
  CHECK(m(1, 1, 1) == 1);
  CHECK(m(2, 1, 1) == 1);
  CHECK(m(3, 1, 1) == 1);

  CHECK(foreground_count(voxelize(Tract{}, g)) == 0);
  // points outside the grid are ignored
  CHECK(foreground_count(voxelize(tract_of({{{-10, 1, 1}, {-8, 1, 1}}}), g)) == 0);
}

TEST_CASE("voxelize a diagonal against fine sampling") {
  const GridGeometry g = cube_geometry(10, 10, 10);
  const Vec3 a(0, 0, 0), b(9, 9, 9);
  const Mask m = voxelize(tract_of({{a, b}}), g);
  Mask oracle(g, 0);
  for (int i = 0; i <= 10000; ++i) {
    const Vec3 p = a + (b - a) * (i / 10000.0);
    const Index3 v(std::lround(p[0]), std::lround(p[1]), std::lround(p[2]));
    if (g.contains(v))
      oracle(v) = 1;
  }
  const auto n = static_cast<long>(foreground_count(m));
  const auto want = static_cast<long>(foreground_count(oracle));
  CHECK(std::abs(n - want) <= 2);

  // every marked voxel touches the segment
  const Vec3 c(0.3, 8.7, 2.2), d(9.4, 0.1, 7.9);
  const Mask skew = voxelize(tract_of({{c, d}}), g);
  CHECK(foreground_count(skew) > 0);
  for (const auto& v : foreground_voxels(skew)) {
    const Vec3 q = g.center(v);
    const double t = std::clamp((q - c).dot(d - c) / (d - c).squaredNorm(), 0.0, 1.0);
    CHECK((c + t * (d - c) - q).norm() <= std::sqrt(3.0) / 2);
  }
}

TEST_CASE("spatial overlap") {
  const GridGeometry g = cube_geometry(10, 10, 10);
  Mask a(g, 0), b(g, 0);
  for (int i = 0; i < 100; ++i)
    a[i] = 1;
  CHECK(spatial_overlap(a, a) == 100.0);
  for (int i = 100; i < 200; ++i)
    b[i] = 1;
  CHECK(spatial_overlap(a, b) == 0.0);
  Mask c(g, 0);
  for (int i = 50; i < 150; ++i)
    c[i] = 1;
  CHECK(spatial_overlap(a, c) == doctest::Approx(50.0));
  CHECK(spatial_overlap(c, a) == spatial_overlap(a, c));
  CHECK(spatial_overlap(Mask(g, 0), Mask(g, 0)) == 0.0);
  CHECK_THROWS_AS(spatial_overlap(a, Mask(cube_geometry(10, 10, 9), 0)), DomainError);

  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const Mask x = test::random_mask(g, 0.3, rng), y = test::random_mask(g, 0.3, rng);
    const double o = spatial_overlap(x, y);
    CHECK(o >= 0.0);
    CHECK(o <= 100.0);
    CHECK(o == spatial_overlap(y, x));
  }
}

TEST_CASE("hausdorff examples") {
  const Tract a = tract_of({{{0, 0, 0}}});
  const Tract b = tract_of({{{3, 4, 0}}});
  const FiberDistance d = hausdorff(a, b);
  CHECK(d.hd == 5.0);
  CHECK(d.ahd == 5.0);

  const Tract c = tract_of({{{0, 0, 0}, {1, 2, 3}}, {{4, 4, 4}, {5, 5, 5}}});
  const FiberDistance same = hausdorff(c, c);
  CHECK(same.hd == 0.0);
  CHECK(same.ahd == 0.0);
  CHECK_THROWS_AS(hausdorff(c, Tract{}), DomainError);
}

TEST_CASE("hausdorff equals the all-pairs oracle") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const double scale = trial % 2 ? 50.0 : 2.0;
    auto pa = random_points(200, rng, scale);
    auto pb = random_points(200, rng, scale);
    if (trial == 9) // clustered far apart
      for (auto& p : pb)
        p += Vec3(500, 0, 0);
    const Tract a = tract_of({Streamline(pa.begin(), pa.begin() + 120),
                              Streamline(pa.begin() + 120, pa.end())});
    const Tract b = tract_of({pb});
    const FiberDistance d = hausdorff(a, b);
    const auto oracle = test::brute_force_hausdorff(pa, pb);
    CHECK(d.hd == oracle.hd);
    CHECK(d.ahd == oracle.ahd);
    const FiberDistance r = hausdorff(b, a);
    CHECK(r.hd == d.hd);
    CHECK(r.ahd == doctest::Approx(d.ahd).epsilon(1e-15));
    CHECK(d.hd >= d.ahd);
    CHECK(d.ahd >= 0.0);
  }
}

TEST_CASE("hausdorff is translation invariant") {
  std::mt19937_64 rng(11);
  auto pa = random_points(150, rng, 10.0), pb = random_points(170, rng, 10.0);
  const FiberDistance d = hausdorff(tract_of({pa}), tract_of({pb}));
  const Vec3 shift(123.25, -40.5, 7.0);
  for (auto& p : pa)
    p += shift;
  for (auto& p : pb)
    p += shift;
  const FiberDistance e = hausdorff(tract_of({pa}), tract_of({pb}));
  CHECK(std::abs(d.hd - e.hd) <= 1e-9);
  CHECK(std::abs(d.ahd - e.ahd) <= 1e-9);
}

TEST_CASE("nearest distances on degenerate sets") {
  const std::vector<Vec3> same(50, Vec3(1, 1, 1));
  const std::vector<Vec3> q{{1, 1, 1}, {1, 1, 4}};
  const auto d = nearest_distances(q, same);
  CHECK(d[0] == 0.0);
  CHECK(d[1] == 3.0);
  CHECK_THROWS_AS(nearest_distances(q, std::vector<Vec3>{}), DomainError);
}

TEST_CASE("completion fraction") {
  const Centerline axis = centerline_from_points({{0, 0, 0}, {5, 0, 0}, {10, 0, 0}});
  const Tract t = tract_of({{{0.5, 1, 0}, {9.5, 1, 0}},  // complete
                            {{0.5, 0, 0}, {6, 0, 0}},    // stops early
                            {{-1, 0, 0}, {11, 0, 0}}});  // complete
  CHECK(completion_fraction(t, axis, 1.0) == doctest::Approx(2.0 / 3.0));
  CHECK(completion_fraction(t, axis, 5.0) == 1.0);
  CHECK(completion_fraction(Tract{}, axis, 1.0) == 0.0);
}
