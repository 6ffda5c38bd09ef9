#include "ftd/poly_field.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <Eigen/QR>

#include "ftd/io.hpp"

namespace ftd {
namespace {

constexpr int kMaxOrder = 12;

void check_order(int order) {
  if (order < 1 || order > kMaxOrder)
    throw DomainError("polynomial order must be in [1, " + std::to_string(kMaxOrder) + "]");
}

using Powers = std::array<std::array<double, kMaxOrder + 1>, 3>;

void fill_powers(const Vec3& u, int order, Powers& pw) {
  for (int a = 0; a < 3; ++a) {
    pw[static_cast<std::size_t>(a)][0] = 1.0;
    for (int e = 1; e <= order; ++e)
      pw[static_cast<std::size_t>(a)][static_cast<std::size_t>(e)] =
          pw[static_cast<std::size_t>(a)][static_cast<std::size_t>(e - 1)] * u[a];
  }
}

Eigen::MatrixXd design_matrix(const FitSamples& samples, int order) {
  const auto s = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd phi(s, monomial_count(order));
  for (Eigen::Index n = 0; n < s; ++n)
    phi.row(n) = monomial_basis(Vec3(samples.points.col(n)), order).transpose();
  return phi;
}

} // namespace

std::vector<Monomial> monomials(int order) {
  std::vector<Monomial> out;
  out.reserve(static_cast<std::size_t>(monomial_count(order)));
  for (int i = 0; i <= order; ++i)
    for (int j = 0; j <= order - i; ++j)
      for (int k = 0; k <= order - i - j; ++k)
        out.push_back({i, j, k});
  return out;
}

int monomial_position(int order, int i, int j, int k) {
  if (i < 0 || j < 0 || k < 0 || i + j + k > order)
    throw IndexError("monomial exponent outside the basis");
  int m = 0;
  for (int a = 0; a < i; ++a)
    m += (order - a + 1) * (order - a + 2) / 2;
  for (int b = 0; b < j; ++b)
    m += order - i - b + 1;
  return m + k;
}

Eigen::MatrixXd divergence_constraints(int order) {
  check_order(order);
  const int m = monomial_count(order);
  const auto rows = monomials(order - 1);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), 3 * m);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto [p, q, s] = rows[r];
    const auto row = static_cast<Eigen::Index>(r);
    // d/dx of a^x_{p+1,q,s} x^{p+1} y^q z^s contributes (p+1) to x^p y^q z^s
    c(row, 0 * m + monomial_position(order, p + 1, q, s)) = p + 1;
    c(row, 1 * m + monomial_position(order, p, q + 1, s)) = q + 1;
    c(row, 2 * m + monomial_position(order, p, q, s + 1)) = s + 1;
  }
  return c;
}

Eigen::MatrixXd divergence_free_basis(int order) {
  const Eigen::MatrixXd c = divergence_constraints(order);
  const Eigen::Index n = c.cols();
  const Eigen::Index r = c.rows();
  // C has full row rank: each row owns a distinct x-derivative coefficient.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(c.transpose());
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  return q.rightCols(n - r);
}

DomainTransform domain_from_mask(const Mask& mask) {
  const GridGeometry& g = mask.geometry();
  Eigen::Array3d lo = Eigen::Array3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Array3d hi = -lo;
  bool any = false;
  for (std::size_t n = 0; n < mask.size(); ++n) {
    if (mask[n] == 0)
      continue;
    const Eigen::Array3d c = g.center(g.unravel(n)).array();
    lo = lo.min(c - 0.5 * g.spacing);
    hi = hi.max(c + 0.5 * g.spacing);
    any = true;
  }
  if (!any)
    throw DomainError("fit domain of an empty mask");
  DomainTransform d;
  d.offset = 0.5 * (lo + hi);
  const double half = (0.5 * (hi - lo)).maxCoeff();
  d.scale = Eigen::Array3d::Constant(1.0 / half);
  return d;
}

PolyField::PolyField(int order, Eigen::Matrix3Xd coefficients, DomainTransform domain)
    : order_(order), coefficients_(std::move(coefficients)), domain_(domain) {
  check_order(order_);
  if (coefficients_.cols() != monomial_count(order_))
    throw DomainError("coefficient matrix must be 3 x M with M = (N+1)(N+2)(N+3)/6");
  if (!(domain_.scale > 0.0).all())
    throw DomainError("domain scale must be positive");
}

Vec3 PolyField::operator()(const Vec3& p_world) const {
  Powers pw;
  fill_powers(domain_.normalize(p_world), order_, pw);
  Vec3 v = Vec3::Zero();
  Eigen::Index m = 0;
  for (int i = 0; i <= order_; ++i)
    for (int j = 0; j <= order_ - i; ++j) {
      const double xy = pw[0][static_cast<std::size_t>(i)] * pw[1][static_cast<std::size_t>(j)];
      for (int k = 0; k <= order_ - i - j; ++k, ++m)
        v += coefficients_.col(m) * (xy * pw[2][static_cast<std::size_t>(k)]);
    }
  return v;
}

Vec3 eval_field(const PolyField& field, const Vec3& p_world) { return field(p_world); }

double divergence_at(const PolyField& field, const Vec3& p_world) {
  const Eigen::MatrixXd grad =
      monomial_gradient(field.domain().normalize(p_world), field.order());
  return field.coefficients().cwiseProduct(grad).sum();
}

Eigen::VectorXd divergence_coefficients(const PolyField& field) {
  const Eigen::Matrix3Xd& a = field.coefficients();
  Eigen::VectorXd vec(3 * a.cols());
  for (int c = 0; c < 3; ++c)
    vec.segment(c * a.cols(), a.cols()) = a.row(c).transpose();
  return divergence_constraints(field.order()) * vec;
}

FitSamples collect_samples(const PriorField& prior, const Mask& mask,
                           const DomainTransform& domain) {
  if (prior.geometry != mask.geometry())
    throw DomainError("prior and mask grids differ");
  std::vector<std::size_t> idx;
  for (std::size_t n = 0; n < mask.size(); ++n)
    if (mask[n] != 0 && prior.valid[n] != 0)
      idx.push_back(n);
  FitSamples s;
  s.points.resize(3, static_cast<Eigen::Index>(idx.size()));
  s.targets.resize(3, static_cast<Eigen::Index>(idx.size()));
  for (std::size_t c = 0; c < idx.size(); ++c) {
    const auto col = static_cast<Eigen::Index>(c);
    s.points.col(col) = domain.normalize(mask.geometry().center(mask.geometry().unravel(idx[c])));
    s.targets.col(col) = prior.directions[idx[c]];
  }
  return s;
}

double fit_objective(const Eigen::Matrix3Xd& coefficients, int order, const FitSamples& samples,
                     double ridge) {
  const Eigen::MatrixXd phi = design_matrix(samples, order);
  const Eigen::Matrix3Xd residual = samples.targets - coefficients * phi.transpose();
  return residual.squaredNorm() + ridge * coefficients.squaredNorm();
}

Eigen::Matrix3Xd fit_objective_gradient(const Eigen::Matrix3Xd& coefficients, int order,
                                        const FitSamples& samples, double ridge) {
  const Eigen::MatrixXd phi = design_matrix(samples, order);
  const Eigen::Matrix3Xd residual = samples.targets - coefficients * phi.transpose();
  return -2.0 * residual * phi + 2.0 * ridge * coefficients;
}

// Equality-constrained least squares solved through the null space of the
// divergence constraints: with vec(A) = Z y and Z orthonormal, the KKT
// conditions reduce to the unconstrained problem min |B Z y - b|^2 + ridge |y|^2,
// which is solved by column-pivoted QR on the stacked system.
PolyField fit_ftd(const FitSamples& samples, int order, double ridge,
                  const DomainTransform& domain) {
  check_order(order);
  if (!(ridge >= 0.0))
    throw DomainError("ridge must be nonnegative");
  const int m = monomial_count(order);
  const auto s = static_cast<Eigen::Index>(samples.size());
  if (s < m)
    throw UnderdeterminedError("fit needs at least " + std::to_string(m) +
                               " valid samples for order " + std::to_string(order) + ", got " +
                               std::to_string(s) + "; try a lower order");

  const Eigen::MatrixXd z = divergence_free_basis(order);
  const Eigen::Index dof = z.cols();
  const Eigen::MatrixXd phi = design_matrix(samples, order);

  const Eigen::Index extra = ridge > 0.0 ? dof : 0;
  Eigen::MatrixXd system(3 * s + extra, dof);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(3 * s + extra);
  for (int c = 0; c < 3; ++c) {
    system.middleRows(c * s, s).noalias() = phi * z.middleRows(c * m, m);
    rhs.segment(c * s, s) = samples.targets.row(c).transpose();
  }
  if (extra > 0)
    system.bottomRows(extra) = std::sqrt(ridge) * Eigen::MatrixXd::Identity(dof, dof);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(system);
  if (qr.rank() < dof)
    throw ConditioningError("constrained fit is rank deficient (rank " +
                            std::to_string(qr.rank()) + " of " + std::to_string(dof) +
                            "); increase the ridge or lower the order");
  const Eigen::VectorXd y = qr.solve(rhs);
  const Eigen::VectorXd vec = z * y;

  Eigen::Matrix3Xd a(3, m);
  for (int c = 0; c < 3; ++c)
    a.row(c) = vec.segment(c * m, m).transpose();
  PolyField field(order, std::move(a), domain);
  field.ridge = ridge;
  field.samples = samples.size();
  return field;
}

PolyField fit_ftd(const PriorField& prior, const Mask& mask, int order,
                  std::optional<double> ridge) {
  const DomainTransform domain = domain_from_mask(mask);
  const FitSamples samples = collect_samples(prior, mask, domain);
  const double r = ridge.value_or(1e-8 * static_cast<double>(samples.size()));
  return fit_ftd(samples, order, r, domain);
}

void save_poly_field(const std::filesystem::path& path, const PolyField& field) {
  std::ostringstream ss;
  ss << "# polynomial vector field v(p) = A * D((p - offset) * scale)\n";
  ss << "order: " << field.order() << '\n';
  ss << "monomials: " << field.basis_size() << '\n';
  const auto& d = field.domain();
  ss << "scale: " << format_real(d.scale[0]) << ' ' << format_real(d.scale[1]) << ' '
     << format_real(d.scale[2]) << '\n';
  ss << "offset: " << format_real(d.offset[0]) << ' ' << format_real(d.offset[1]) << ' '
     << format_real(d.offset[2]) << '\n';
  ss << "ridge: " << format_real(field.ridge) << '\n';
  ss << "samples: " << field.samples << '\n';
  ss << "coefficients:\n";
  for (int c = 0; c < 3; ++c) {
    for (Eigen::Index m = 0; m < field.coefficients().cols(); ++m)
      ss << (m ? " " : "") << format_real(field.coefficients()(c, m));
    ss << '\n';
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw FormatError("cannot write " + path.string());
  out << ss.str();
}

PolyField load_poly_field(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw FormatError("cannot open " + path.string());
  const std::string name = path.string();
  int order = -1, count = -1;
  DomainTransform domain;
  double ridge = 0.0;
  std::size_t samples = 0;
  bool have_scale = false, have_offset = false;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& what) {
    return FormatError(name + ": line " + std::to_string(line_no) + ": " + what + " '" + line +
                       "'");
  };
  auto read3 = [&](std::istringstream& ss, Eigen::Array3d& out) {
    if (!(ss >> out[0] >> out[1] >> out[2]))
      throw fail("expected three reals");
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#')
      continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos)
      throw fail("expected 'key: value'");
    const std::string key = line.substr(0, colon);
    std::istringstream ss(line.substr(colon + 1));
    if (key == "order") {
      if (!(ss >> order))
        throw fail("invalid order");
    } else if (key == "monomials") {
      if (!(ss >> count))
        throw fail("invalid monomial count");
    } else if (key == "scale") {
      read3(ss, domain.scale);
      have_scale = true;
    } else if (key == "offset") {
      read3(ss, domain.offset);
      have_offset = true;
    } else if (key == "ridge") {
      if (!(ss >> ridge))
        throw fail("invalid ridge");
    } else if (key == "samples") {
      if (!(ss >> samples))
        throw fail("invalid samples");
    } else if (key == "coefficients") {
      break;
    } else {
      throw fail("unknown key");
    }
  }
  if (order < 1 || count != monomial_count(order) || !have_scale || !have_offset)
    throw FormatError(name + ": incomplete or inconsistent field header");
  Eigen::Matrix3Xd a(3, count);
  for (int c = 0; c < 3; ++c) {
    if (!std::getline(in, line))
      throw TruncationError(name + ": missing coefficient row " + std::to_string(c));
    ++line_no;
    std::istringstream ss(line);
    for (int m = 0; m < count; ++m)
      if (!(ss >> a(c, m)))
        throw fail("expected " + std::to_string(count) + " coefficients");
  }
  PolyField field(order, std::move(a), domain);
  field.ridge = ridge;
  field.samples = samples;
  return field;
}

} // namespace ftd
