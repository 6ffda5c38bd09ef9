#pragma once

// Independent reference implementations used as test oracles.

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <string>

#include "ftd/grid.hpp"

namespace ftd::test {

inline GridGeometry cube_geometry(int nx, int ny, int nz, double spacing = 1.0,
                                  const Eigen::Array3d& origin = Eigen::Array3d::Zero()) {
  return GridGeometry({nx, ny, nz}, Eigen::Array3d::Constant(spacing), origin);
}

inline Mask random_mask(const GridGeometry& g, double density, std::mt19937_64& rng) {
  std::bernoulli_distribution fg(density);
  Mask m(g, 0);
  for (std::size_t n = 0; n < m.size(); ++n)
    m[n] = fg(rng) ? 1 : 0;
  m[rng() % m.size()] = 1;
  return m;
}

// All-pairs Euclidean distance to background, with a background shell of
// virtual voxels just outside the grid.
inline double brute_force_distance(const Mask& m, const Index3& x) {
  const auto& g = m.geometry();
  if (m(x) == 0)
    return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (int k = -1; k <= g.dims[2]; ++k)
    for (int j = -1; j <= g.dims[1]; ++j)
      for (int i = -1; i <= g.dims[0]; ++i) {
        const Index3 y(i, j, k);
        if (g.contains(y) && m(y) != 0)
          continue;
        const Eigen::Array3d d = (y - x).cast<double>().array() * g.spacing;
        best = std::min(best, std::sqrt(d.square().sum()));
      }
  return best;
}

struct BruteDistance {
  double hd = 0.0, ahd = 0.0;
};

inline BruteDistance brute_force_hausdorff(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  auto directed = [](const std::vector<Vec3>& p, const std::vector<Vec3>& q, double& mean) {
    double worst = 0.0, sum = 0.0;
    for (const auto& x : p) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& y : q)
        best = std::min(best, (y - x).norm());
      worst = std::max(worst, best);
      sum += best;
    }
    mean = sum / static_cast<double>(p.size());
    return worst;
  };
  double ma = 0.0, mb = 0.0;
  const double da = directed(a, b, ma);
  const double db = directed(b, a, mb);
  return {std::max(da, db), 0.5 * (ma + mb)};
}

// Sparse polynomial in x, y, z keyed by exponent triple.
using Poly = std::map<std::array<int, 3>, double>;

inline Poly derivative(const Poly& p, int axis) {
  Poly out;
  for (const auto& [e, c] : p) {
    if (e[axis] == 0)
      continue;
    auto d = e;
    d[axis] -= 1;
    out[d] += c * e[axis];
  }
  return out;
}

inline Poly subtract(Poly a, const Poly& b) {
  for (const auto& [e, c] : b)
    a[e] -= c;
  return a;
}

inline double evaluate(const Poly& p, const Vec3& u) {
  double s = 0.0;
  for (const auto& [e, c] : p)
    s += c * std::pow(u[0], e[0]) * std::pow(u[1], e[1]) * std::pow(u[2], e[2]);
  return s;
}

// Random polynomial vector potential of total degree <= degree.
inline std::array<Poly, 3> random_potential(int degree, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::array<Poly, 3> psi;
  for (auto& p : psi)
    for (int i = 0; i <= degree; ++i)
      for (int j = 0; i + j <= degree; ++j)
        for (int k = 0; i + j + k <= degree; ++k)
          p[{i, j, k}] = u(rng);
  return psi;
}

// curl psi: divergence-free by construction, degree one less than psi.
inline std::array<Poly, 3> curl(const std::array<Poly, 3>& psi) {
  return {subtract(derivative(psi[2], 1), derivative(psi[1], 2)),
          subtract(derivative(psi[0], 2), derivative(psi[2], 0)),
          subtract(derivative(psi[1], 0), derivative(psi[0], 1))};
}

inline Vec3 evaluate(const std::array<Poly, 3>& v, const Vec3& u) {
  return {evaluate(v[0], u), evaluate(v[1], u), evaluate(v[2], u)};
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ftd_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
}

} // namespace ftd::test
