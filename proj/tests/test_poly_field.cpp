#include <doctest.h>

#include <numbers>

#include "ftd/phantom.hpp"
#include "ftd/poly_field.hpp"
#include "support.hpp"

using namespace ftd;
using ftd::test::cube_geometry;

namespace {

Eigen::Matrix3Xd coefficients_of(const std::array<test::Poly, 3>& v, int order) {
  Eigen::Matrix3Xd a = Eigen::Matrix3Xd::Zero(3, monomial_count(order));
  for (int c = 0; c < 3; ++c)
    for (const auto& [e, coef] : v[c])
      a(c, monomial_position(order, e[0], e[1], e[2])) += coef;
  return a;
}

Eigen::VectorXd vec(const Eigen::Matrix3Xd& a) {
  const auto m = a.cols();
  Eigen::VectorXd out(3 * m);
  for (int c = 0; c < 3; ++c)
    out.segment(c * m, m) = a.row(c).transpose();
  return out;
}

FitSamples lattice_samples(int n) {
  FitSamples s;
  s.points.resize(3, n * n * n);
  s.targets.setZero(3, n * n * n);
  int col = 0;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        s.points.col(col++) = Vec3(i, j, k) * (2.0 / (n - 1)) - Vec3::Ones();
  return s;
}

} // namespace

TEST_CASE("monomial basis ordering") {
  CHECK(monomial_count(4) == 35);
  CHECK(monomial_basis(Vec3(1, 1, 1), 4).size() == 35);
  const Eigen::VectorXd b1 = monomial_basis(Vec3(2, 0, 0), 1);
  CHECK(b1 == Eigen::Vector4d(1, 0, 0, 2));
  const Eigen::VectorXd b2 = monomial_basis(Vec3(1, 1, 1), 2);
  CHECK(b2.size() == 10);
  CHECK((b2.array() == 1.0).all());

  const auto ms = monomials(3);
  REQUIRE(ms.size() == 20u);
  for (std::size_t p = 0; p < ms.size(); ++p) {
    CHECK(ms[p].degree() <= 3);
    CHECK(monomial_position(3, ms[p].i, ms[p].j, ms[p].k) == static_cast<int>(p));
  }
  const Vec3 u(0.3, -1.2, 0.7);
  const Eigen::VectorXd b = monomial_basis(u, 3);
  for (std::size_t p = 0; p < ms.size(); ++p)
    CHECK(b[static_cast<Eigen::Index>(p)] ==
          doctest::Approx(std::pow(u[0], ms[p].i) * std::pow(u[1], ms[p].j) * std::pow(u[2], ms[p].k)));
}

TEST_CASE("monomial gradient matches finite differences") {
  const Vec3 u(0.4, -0.3, 0.8);
  const Eigen::MatrixXd g = monomial_gradient(u, 4);
  const double h = 1e-6;
  for (int a = 0; a < 3; ++a) {
    Vec3 e = Vec3::Zero();
    e[a] = h;
    const Eigen::VectorXd fd = (monomial_basis(Vec3(u + e), 4) - monomial_basis(Vec3(u - e), 4)) / (2 * h);
    CHECK((g.row(a).transpose() - fd).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("divergence constraints agree with symbolic differentiation") {
  const Eigen::MatrixXd c1 = divergence_constraints(1);
  REQUIRE(c1.rows() == 1);
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(12);
  expected[0 * 4 + monomial_position(1, 1, 0, 0)] = 1;
  expected[1 * 4 + monomial_position(1, 0, 1, 0)] = 1;
  expected[2 * 4 + monomial_position(1, 0, 0, 1)] = 1;
  CHECK(c1.row(0).transpose() == expected);

  CHECK(divergence_constraints(4).rows() == 20);
  CHECK(divergence_constraints(4).cols() == 105);

  std::mt19937_64 rng(1);
  for (int order = 1; order <= 5; ++order) {
    const Eigen::MatrixXd c = divergence_constraints(order);
    CHECK(c.rows() == order * (order + 1) * (order + 2) / 6);
    for (int trial = 0; trial < 5; ++trial) {
      const auto psi = test::random_potential(order, rng);
      const std::array<test::Poly, 3> v{psi[0], psi[1], psi[2]};
      test::Poly div = test::derivative(v[0], 0);
      for (int a = 1; a < 3; ++a)
        for (const auto& [e, coef] : test::derivative(v[a], a))
          div[e] += coef;
      const Eigen::VectorXd got = c * vec(coefficients_of(v, order));
      Eigen::VectorXd want = Eigen::VectorXd::Zero(c.rows());
      for (const auto& [e, coef] : div)
        want[monomial_position(order - 1, e[0], e[1], e[2])] += coef;
      CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("rotational field satisfies the constraints") {
  const std::array<test::Poly, 3> rot{test::Poly{{{0, 1, 0}, -1.0}}, test::Poly{{{1, 0, 0}, 1.0}},
                                      test::Poly{{{0, 0, 0}, 0.7}}};
  for (int order = 1; order <= 4; ++order)
    CHECK((divergence_constraints(order) * vec(coefficients_of(rot, order))).norm() == 0.0);
}

TEST_CASE("divergence-free basis spans the constraint null space") {
  const Eigen::MatrixXd z = divergence_free_basis(4);
  CHECK(z.cols() == 3 * 35 - 20);
  CHECK((divergence_constraints(4) * z).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((z.transpose() * z - Eigen::MatrixXd::Identity(z.cols(), z.cols())).cwiseAbs().maxCoeff() <=
        1e-12);
}

TEST_CASE("eval_field and divergence_at on constructed fields") {
  const PolyField zero(3, Eigen::Matrix3Xd::Zero(3, 20));
  CHECK(eval_field(zero, Vec3(3, -4, 5)) == Vec3::Zero());

  const std::array<test::Poly, 3> rot{test::Poly{{{0, 1, 0}, -1.0}}, test::Poly{{{1, 0, 0}, 1.0}},
                                      test::Poly{}};
  const PolyField r(2, coefficients_of(rot, 2));
  CHECK(eval_field(r, Vec3(0.5, 0, 0)) == Vec3(0, 0.5, 0));

  const std::array<test::Poly, 3> xonly{test::Poly{{{1, 0, 0}, 1.0}}, test::Poly{}, test::Poly{}};
  DomainTransform d;
  d.scale = Eigen::Array3d::Constant(0.1);
  d.offset = Eigen::Array3d(4, 5, 6);
  const PolyField x(2, coefficients_of(xonly, 2), d);
  CHECK(divergence_at(x, Vec3(1, 2, 3)) == doctest::Approx(1.0));
  CHECK(divergence_at(x, Vec3(-7, 0, 30)) == doctest::Approx(1.0));
}

TEST_CASE("divergence_at matches central differences") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const int order = 1 + trial % 4;
    Eigen::Matrix3Xd a(3, monomial_count(order));
    for (Eigen::Index i = 0; i < a.size(); ++i)
      a.data()[i] = u(rng);
    DomainTransform d;
    d.scale = Eigen::Array3d::Constant(0.05 + 0.1 * (trial % 3));
    d.offset = Eigen::Array3d(u(rng), u(rng), u(rng)) * 10;
    const PolyField f(order, a, d);
    for (int k = 0; k < 10; ++k) {
      const Vec3 un(u(rng), u(rng), u(rng));
      const double h = 1e-4;
      double fd = 0.0;
      for (int ax = 0; ax < 3; ++ax) {
        Vec3 e = Vec3::Zero();
        e[ax] = h;
        fd += (f(d.denormalize(un + e))[ax] - f(d.denormalize(un - e))[ax]) / (2 * h);
      }
      CHECK(std::abs(divergence_at(f, d.denormalize(un)) - fd) <= 1e-5);
    }
  }
}

TEST_CASE("fit reproduces a constant prior") {
  const Mask m(cube_geometry(6, 5, 7), 1);
  PriorField v(m.geometry());
  for (std::size_t n = 0; n < m.size(); ++n) {
    v.directions[n] = Vec3(1, 0, 0);
    v.valid[n] = 1;
  }
  for (int order = 1; order <= 4; ++order) {
    const PolyField f = fit_ftd(v, m, order, 0.0);
    for (std::size_t n = 0; n < m.size(); n += 7)
      CHECK((f(m.geometry().center(m.geometry().unravel(n))) - Vec3(1, 0, 0)).norm() <= 1e-9);
  }
}

TEST_CASE("fit recovers a divergence-free linear field exactly") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  FitSamples s;
  s.points.resize(3, 40);
  s.targets.resize(3, 40);
  for (int c = 0; c < 40; ++c) {
    const Vec3 p(u(rng), u(rng), u(rng));
    s.points.col(c) = p;
    s.targets.col(c) = Vec3(p.x(), -p.y(), 0.0);
  }
  const PolyField f = fit_ftd(s, 1, 0.0, {});
  for (int c = 0; c < 40; ++c)
    CHECK((f(s.points.col(c)) - s.targets.col(c)).norm() <= 1e-9);
}

TEST_CASE("fit projects (x, 0, 0) onto trace-free linear fields") {
  // On a centered lattice the second moments are isotropic, so the
  // constrained optimum is B - tr(B)/3 I with B = diag(1, 0, 0).
  FitSamples s = lattice_samples(5);
  for (Eigen::Index c = 0; c < s.points.cols(); ++c)
    s.targets.col(c) = Vec3(s.points(0, c), 0, 0);
  const PolyField f = fit_ftd(s, 1, 0.0, {});
  for (Eigen::Index c = 0; c < s.points.cols(); ++c) {
    const Vec3 p = s.points.col(c);
    CHECK((f(p) - Vec3(2.0 / 3 * p.x(), -p.y() / 3, -p.z() / 3)).norm() <= 1e-12);
  }
  CHECK(fit_objective(f.coefficients(), 1, s, 0.0) > 0.1);
  CHECK(divergence_coefficients(f).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("fit recovers random divergence-free quartic fields") {
  std::mt19937_64 rng(12);
  FitSamples s = lattice_samples(7);
  for (int trial = 0; trial < 3; ++trial) {
    const auto v = test::curl(test::random_potential(5, rng));
    for (Eigen::Index c = 0; c < s.points.cols(); ++c)
      s.targets.col(c) = test::evaluate(v, s.points.col(c));
    const PolyField f = fit_ftd(s, 4, 0.0, {});
    for (Eigen::Index c = 0; c < s.points.cols(); ++c)
      CHECK((f(s.points.col(c)) - s.targets.col(c)).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((f.coefficients() - coefficients_of(v, 4)).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("fitted coefficients are a constrained minimum") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  FitSamples s = lattice_samples(6);
  for (Eigen::Index c = 0; c < s.points.cols(); ++c)
    s.targets.col(c) = Vec3(u(rng), u(rng), u(rng)).normalized();
  const double ridge = 1e-3;
  const PolyField f = fit_ftd(s, 3, ridge, {});
  CHECK(divergence_coefficients(f).cwiseAbs().maxCoeff() <= 1e-8);
  const double best = fit_objective(f.coefficients(), 3, s, ridge);
  for (int trial = 0; trial < 30; ++trial) {
    const auto v = test::curl(test::random_potential(4, rng));
    Eigen::Matrix3Xd dir = coefficients_of(v, 3);
    dir *= 1e-3 / dir.norm();
    CHECK(fit_objective(f.coefficients() + dir, 3, s, ridge) >= best);
    CHECK(fit_objective(f.coefficients() - dir, 3, s, ridge) >= best);
  }
}

TEST_CASE("objective gradient matches finite differences") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  FitSamples s = lattice_samples(4);
  for (Eigen::Index c = 0; c < s.points.cols(); ++c)
    s.targets.col(c) = Vec3(u(rng), u(rng), u(rng));
  Eigen::Matrix3Xd a(3, monomial_count(2));
  for (Eigen::Index i = 0; i < a.size(); ++i)
    a.data()[i] = u(rng);
  const Eigen::Matrix3Xd g = fit_objective_gradient(a, 2, s, 0.01);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    Eigen::Matrix3Xd ap = a, am = a;
    ap.data()[i] += h;
    am.data()[i] -= h;
    const double fd = (fit_objective(ap, 2, s, 0.01) - fit_objective(am, 2, s, 0.01)) / (2 * h);
    CHECK(std::abs(fd - g.data()[i]) <= 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("fit errors") {
  Mask small(cube_geometry(3, 3, 3), 1);
  PriorField v(small.geometry());
  for (std::size_t n = 0; n < small.size(); ++n) {
    v.directions[n] = Vec3(0, 0, 1);
    v.valid[n] = 1;
  }
  CHECK_THROWS_AS(fit_ftd(v, small, 4), UnderdeterminedError);
  CHECK_NOTHROW(fit_ftd(v, small, 2));

  FitSamples line;
  line.points.resize(3, 50);
  line.targets.resize(3, 50);
  for (int c = 0; c < 50; ++c) {
    line.points.col(c) = Vec3(-1.0 + c / 25.0, 0, 0);
    line.targets.col(c) = Vec3(1, 0, 0);
  }
  CHECK_THROWS_AS(fit_ftd(line, 2, 0.0, {}), ConditioningError);
  CHECK_NOTHROW(fit_ftd(line, 2, 1e-6, {}));
}

TEST_CASE("helix fit follows the analytic tangents") {
  PhantomSpec spec;
  spec.kind = PhantomKind::helix;
  const Phantom ph = generate(spec, 2);
  const PriorField v = build_prior(ph.peaks, ph.axis, ph.mask);
  const PolyField f = fit_ftd(v, ph.mask, 4);
  CHECK(f.ridge == doctest::Approx(1e-8 * static_cast<double>(v.valid_count())));
  const auto fg = foreground_voxels(ph.mask);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> jitter(-0.5, 0.5);
  double sum = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Vec3 p = ph.mask.geometry().center(fg[rng() % fg.size()]) +
                   Vec3(jitter(rng), jitter(rng), jitter(rng));
    sum += std::acos(std::min(1.0, f(p).normalized().dot(ph.field(p).normalized())));
  }
  CHECK(sum / 100 * 180 / std::numbers::pi < 5.0);
  std::uniform_real_distribution<double> un(-1.0, 1.0);
  for (int i = 0; i < 1000; ++i)
    CHECK(std::abs(divergence_at(f, f.domain().denormalize(Vec3(un(rng), un(rng), un(rng))))) <= 1e-6);
}

TEST_CASE("poly field files round-trip") {
  const auto dir = test::scratch_dir("poly_field");
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::Matrix3Xd a(3, monomial_count(4));
  for (Eigen::Index i = 0; i < a.size(); ++i)
    a.data()[i] = g(rng);
  DomainTransform d;
  d.scale = Eigen::Array3d::Constant(1.0 / 13.0);
  d.offset = Eigen::Array3d(0.1, -2.0, 1e-3);
  PolyField f(4, a, d);
  f.ridge = 1.6e-5;
  f.samples = 1600;
  save_poly_field(dir / "f.ftd", f);
  const PolyField h = load_poly_field(dir / "f.ftd");
  CHECK(h.order() == 4);
  CHECK(h.coefficients() == f.coefficients());
  CHECK((h.domain().scale == d.scale).all());
  CHECK((h.domain().offset == d.offset).all());
  CHECK(h.ridge == f.ridge);
  CHECK(h.samples == f.samples);
  CHECK(eval_field(h, Vec3(1, 2, 3)) == eval_field(f, Vec3(1, 2, 3)));
}
