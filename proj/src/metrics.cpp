#include "ftd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ftd {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<Vec3> pooled(const Tract& t) {
  std::vector<Vec3> out;
  out.reserve(t.point_count());
  for (const auto& s : t.streamlines)
    out.insert(out.end(), s.begin(), s.end());
  return out;
}

// Uniform bucket grid over a point set, queried with an expanding box search
// that stops once no unvisited cell can hold a closer point.
class BucketGrid {
public:
  explicit BucketGrid(std::span<const Vec3> pts) : pts_(pts) {
    lo_ = Vec3::Constant(kInf);
    Vec3 hi = Vec3::Constant(-kInf);
    for (const auto& p : pts) {
      lo_ = lo_.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const Vec3 extent = (hi - lo_).cwiseMax(1e-9);
    const double volume = extent.prod();
    cell_ = std::cbrt(volume / static_cast<double>(pts.size())) * 1.5;
    cell_ = std::max(cell_, extent.maxCoeff() / 256.0);
    for (int a = 0; a < 3; ++a)
      n_[a] = std::max(1, static_cast<int>(std::ceil(extent[a] / cell_)));
    starts_.assign(static_cast<std::size_t>(n_[0]) * n_[1] * n_[2] + 1, 0);
    std::vector<std::size_t> cell_of(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      cell_of[i] = linear(cell_index(pts[i]));
      ++starts_[cell_of[i] + 1];
    }
    for (std::size_t c = 1; c < starts_.size(); ++c)
      starts_[c] += starts_[c - 1];
    order_.resize(pts.size());
    std::vector<std::size_t> fill(starts_.begin(), starts_.end() - 1);
    for (std::size_t i = 0; i < pts.size(); ++i)
      order_[fill[cell_of[i]]++] = i;
  }

  double nearest(const Vec3& q) const {
    const Eigen::Array3i c = cell_index(q);
    double best = kInf;
    for (int r = 0;; ++r) {
      Eigen::Array3i lo = (c - r).max(0);
      Eigen::Array3i hi = (c + r).min(n_ - 1);
      for (int k = lo[2]; k <= hi[2]; ++k)
        for (int j = lo[1]; j <= hi[1]; ++j)
          for (int i = lo[0]; i <= hi[0]; ++i) {
            // only the shell of the box is new at radius r
            if (r > 0 && std::abs(i - c[0]) < r && std::abs(j - c[1]) < r && std::abs(k - c[2]) < r)
              continue;
            const std::size_t cell = linear({i, j, k});
            for (std::size_t s = starts_[cell]; s < starts_[cell + 1]; ++s)
              best = std::min(best, (q - pts_[order_[s]]).norm());
          }
      // distance from q to the nearest cell outside the visited box
      double bound = kInf;
      for (int a = 0; a < 3; ++a) {
        if (c[a] + r < n_[a] - 1)
          bound = std::min(bound, lo_[a] + (c[a] + r + 1) * cell_ - q[a]);
        if (c[a] - r > 0)
          bound = std::min(bound, q[a] - (lo_[a] + (c[a] - r) * cell_));
      }
      if (bound == kInf || best <= std::max(bound, 0.0))
        return best;
    }
  }

private:
  Eigen::Array3i cell_index(const Vec3& p) const {
    Eigen::Array3i c;
    for (int a = 0; a < 3; ++a) {
      const double f = std::floor((p[a] - lo_[a]) / cell_);
      c[a] = static_cast<int>(std::clamp(f, 0.0, static_cast<double>(n_[a] - 1)));
    }
    return c;
  }
  std::size_t linear(const Eigen::Array3i& c) const {
    return static_cast<std::size_t>(c[0]) +
           static_cast<std::size_t>(n_[0]) *
               (static_cast<std::size_t>(c[1]) + static_cast<std::size_t>(n_[1]) * c[2]);
  }

  std::span<const Vec3> pts_;
  Vec3 lo_;
  double cell_ = 1.0;
  Eigen::Array3i n_;
  std::vector<std::size_t> starts_;
  std::vector<std::size_t> order_;
};

} // namespace

Mask voxelize(const Tract& tract, const GridGeometry& reference) {
  reference.validate();
  Mask out(reference, 0);
  const double h = 0.5 * reference.spacing.minCoeff();
  auto mark = [&](const Vec3& p) {
    const Index3 ijk = reference.nearest_index(p);
    if (reference.contains(ijk))
      out(ijk) = 1;
  };
  for (const auto& line : tract.streamlines) {
    if (line.empty())
      continue;
    mark(line.front());
    for (std::size_t i = 1; i < line.size(); ++i) {
      const Vec3 d = line[i] - line[i - 1];
      const int pieces = std::max(1, static_cast<int>(std::ceil(d.norm() / h)));
      for (int s = 1; s <= pieces; ++s)
        mark(line[i - 1] + d * (static_cast<double>(s) / pieces));
    }
  }
  return out;
}

double spatial_overlap(const Mask& a, const Mask& b) {
  if (a.geometry() != b.geometry())
    throw DomainError("overlap needs identical grids");
  std::size_t na = 0, nb = 0, both = 0;
  for (std::size_t n = 0; n < a.size(); ++n) {
    const bool x = a[n] != 0, y = b[n] != 0;
    na += x;
    nb += y;
    both += x && y;
  }
  if (na + nb == 0)
    return 0.0;
  return 200.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

std::vector<double> nearest_distances(std::span<const Vec3> queries,
                                      std::span<const Vec3> targets) {
  if (targets.empty())
    throw DomainError("nearest distance to an empty point set");
  const BucketGrid grid(targets);
  std::vector<double> out(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i)
    out[i] = grid.nearest(queries[i]);
  return out;
}

FiberDistance hausdorff(const Tract& a, const Tract& b) {
  const auto pa = pooled(a);
  const auto pb = pooled(b);
  if (pa.empty() || pb.empty())
    throw DomainError("fiber distance needs two nonempty tracts");
  const auto dab = nearest_distances(pa, pb);
  const auto dba = nearest_distances(pb, pa);
  double max_ab = 0.0, sum_ab = 0.0, max_ba = 0.0, sum_ba = 0.0;
  for (double d : dab) {
    max_ab = std::max(max_ab, d);
    sum_ab += d;
  }
  for (double d : dba) {
    max_ba = std::max(max_ba, d);
    sum_ba += d;
  }
  FiberDistance r;
  r.hd = std::max(max_ab, max_ba);
  r.ahd = 0.5 * (sum_ab / static_cast<double>(dab.size()) + sum_ba / static_cast<double>(dba.size()));
  return r;
}

double completion_fraction(const Tract& tract, const Centerline& axis, double tolerance) {
  if (tract.empty())
    return 0.0;
  if (axis.empty())
    throw DomainError("completion needs a nonempty axis");
  std::vector<double> s(axis.points.size(), 0.0);
  for (std::size_t i = 1; i < s.size(); ++i)
    s[i] = s[i - 1] + (axis.points[i] - axis.points[i - 1]).norm();
  const double total = s.back();
  std::size_t complete = 0;
  for (const auto& line : tract.streamlines) {
    double lo = kInf, hi = -kInf;
    for (const auto& p : line) {
      const double pos = s[nearest_point_index(axis, p)];
      lo = std::min(lo, pos);
      hi = std::max(hi, pos);
    }
    if (lo <= tolerance && hi >= total - tolerance)
      ++complete;
  }
  return static_cast<double>(complete) / static_cast<double>(tract.streamlines.size());
}

} // namespace ftd
