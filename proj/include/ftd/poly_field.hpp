#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "ftd/common.hpp"
#include "ftd/grid.hpp"
#include "ftd/prior.hpp"

namespace ftd {

inline constexpr int kDefaultOrder = 4;

/// Exponents of x^i y^j z^k.
struct Monomial {
  int i = 0, j = 0, k = 0;
  int degree() const { return i + j + k; }
};

/// Number of monomials of total degree <= order: (N+1)(N+2)(N+3)/6.
constexpr int monomial_count(int order) {
  return order < 0 ? 0 : (order + 1) * (order + 2) * (order + 3) / 6;
}

/// Canonical ordering: i = 0..N outermost, then j = 0..N-i, then k = 0..N-i-j.
std::vector<Monomial> monomials(int order);

/// Position of (i,j,k) in the canonical ordering of `order`.
int monomial_position(int order, int i, int j, int k);

/// Values x^i y^j z^k in canonical order.
template <typename Derived>
VectorX<typename Derived::Scalar> monomial_basis(const Eigen::MatrixBase<Derived>& u, int order) {
  using Scalar = typename Derived::Scalar;
  EIGEN_STATIC_ASSERT_VECTOR_SPECIFIC_SIZE(Derived, 3);
  MatrixX<Scalar> pw(3, order + 1);
  for (int a = 0; a < 3; ++a) {
    pw(a, 0) = Scalar(1);
    for (int e = 1; e <= order; ++e)
      pw(a, e) = pw(a, e - 1) * u[a];
  }
  VectorX<Scalar> out(monomial_count(order));
  int m = 0;
  for (int i = 0; i <= order; ++i)
    for (int j = 0; j <= order - i; ++j)
      for (int k = 0; k <= order - i - j; ++k)
        out[m++] = pw(0, i) * pw(1, j) * pw(2, k);
  return out;
}

/// Row a holds d/du_a of every monomial, canonical order (3 x M).
template <typename Derived>
MatrixX<typename Derived::Scalar> monomial_gradient(const Eigen::MatrixBase<Derived>& u,
                                                    int order) {
  using Scalar = typename Derived::Scalar;
  EIGEN_STATIC_ASSERT_VECTOR_SPECIFIC_SIZE(Derived, 3);
  MatrixX<Scalar> pw(3, order + 1);
  for (int a = 0; a < 3; ++a) {
    pw(a, 0) = Scalar(1);
    for (int e = 1; e <= order; ++e)
      pw(a, e) = pw(a, e - 1) * u[a];
  }
  auto dpow = [&](int a, int e) { return e == 0 ? Scalar(0) : Scalar(e) * pw(a, e - 1); };
  MatrixX<Scalar> out(3, monomial_count(order));
  int m = 0;
  for (int i = 0; i <= order; ++i)
    for (int j = 0; j <= order - i; ++j)
      for (int k = 0; k <= order - i - j; ++k) {
        out(0, m) = dpow(0, i) * pw(1, j) * pw(2, k);
        out(1, m) = pw(0, i) * dpow(1, j) * pw(2, k);
        out(2, m) = pw(0, i) * pw(1, j) * dpow(2, k);
        ++m;
      }
  return out;
}

/// Linear map from vec(A) (index c*M + m, c = component) to the coefficients
/// of div v, a polynomial of degree N-1 in canonical order. C*vec(A) = 0
/// makes the field divergence-free everywhere. Shape M(N-1) x 3M.
Eigen::MatrixXd divergence_constraints(int order);

/// Orthonormal basis (3M x dof) of the null space of divergence_constraints.
Eigen::MatrixXd divergence_free_basis(int order);

/// World mm -> normalized coordinates: u = (p - offset) * scale.
struct DomainTransform {
  Eigen::Array3d scale{1.0, 1.0, 1.0};
  Eigen::Array3d offset{0.0, 0.0, 0.0};

  Vec3 normalize(const Vec3& p) const { return ((p.array() - offset) * scale).matrix(); }
  Vec3 denormalize(const Vec3& u) const { return (u.array() / scale + offset).matrix(); }
};

/// Centers the mask's bounding box (voxel extents) at the origin and scales
/// it by one factor so the longest axis spans [-1, 1].
DomainTransform domain_from_mask(const Mask& mask);

/// Order-N polynomial vector field v(p) = A * D(normalize(p)).
class PolyField {
public:
  PolyField() = default;
  PolyField(int order, Eigen::Matrix3Xd coefficients, DomainTransform domain = {});

  int order() const { return order_; }
  int basis_size() const { return static_cast<int>(coefficients_.cols()); }
  const Eigen::Matrix3Xd& coefficients() const { return coefficients_; }
  const DomainTransform& domain() const { return domain_; }

  // fit metadata
  double ridge = 0.0;
  std::size_t samples = 0;

  Vec3 operator()(const Vec3& p_world) const;

private:
  int order_ = 1;
  Eigen::Matrix3Xd coefficients_ = Eigen::Matrix3Xd::Zero(3, monomial_count(1));
  DomainTransform domain_;
};

Vec3 eval_field(const PolyField& field, const Vec3& p_world);

/// Divergence in normalized coordinates.
double divergence_at(const PolyField& field, const Vec3& p_world);

/// C * vec(A).
Eigen::VectorXd divergence_coefficients(const PolyField& field);

/// Normalized sample positions and target vectors (one column each).
struct FitSamples {
  Eigen::Matrix3Xd points;
  Eigen::Matrix3Xd targets;

  std::size_t size() const { return static_cast<std::size_t>(points.cols()); }
};

FitSamples collect_samples(const PriorField& prior, const Mask& mask,
                           const DomainTransform& domain);

/// sum_s |V_s - A D(u_s)|^2 + ridge |A|_F^2
double fit_objective(const Eigen::Matrix3Xd& coefficients, int order, const FitSamples& samples,
                     double ridge);
Eigen::Matrix3Xd fit_objective_gradient(const Eigen::Matrix3Xd& coefficients, int order,
                                        const FitSamples& samples, double ridge);

/// Minimizes fit_objective subject to divergence_constraints(order).
PolyField fit_ftd(const FitSamples& samples, int order, double ridge,
                  const DomainTransform& domain);

/// Default ridge is 1e-8 * (number of valid samples).
PolyField fit_ftd(const PriorField& prior, const Mask& mask, int order = kDefaultOrder,
                  std::optional<double> ridge = std::nullopt);

void save_poly_field(const std::filesystem::path& path, const PolyField& field);
PolyField load_poly_field(const std::filesystem::path& path);

} // namespace ftd
