#include "ftd/centerline.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <cmath>
#include <limits>
#include <queue>

namespace ftd {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One axis of the squared-distance transform: out[q] = min_p w*(q-p)^2 + f[p].
// Sites with f = inf are skipped so the envelope arithmetic stays finite.
void lower_envelope_1d(const std::vector<double>& f, double w, std::vector<double>& out,
                       std::vector<int>& v, std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  out.assign(static_cast<std::size_t>(n), kInf);
  v.resize(static_cast<std::size_t>(n));
  z.resize(static_cast<std::size_t>(n) + 1);
  int k = -1;
  auto key = [&](int q) { return f[static_cast<std::size_t>(q)] + w * double(q) * double(q); };
  for (int q = 0; q < n; ++q) {
    if (f[static_cast<std::size_t>(q)] == kInf)
      continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    double s = 0.0;
    while (true) {
      const int p = v[static_cast<std::size_t>(k)];
      s = (key(q) - key(p)) / (2.0 * w * double(q - p));
      if (s <= z[static_cast<std::size_t>(k)] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    if (s <= z[static_cast<std::size_t>(k)]) {
      // k == 0 and the new site dominates everywhere
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    z[static_cast<std::size_t>(k)] = s;
    z[static_cast<std::size_t>(k) + 1] = kInf;
  }
  if (k < 0)
    return;
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[static_cast<std::size_t>(j) + 1] < double(q))
      ++j;
    const int p = v[static_cast<std::size_t>(j)];
    const double d = double(q - p);
    out[static_cast<std::size_t>(q)] = w * d * d + f[static_cast<std::size_t>(p)];
  }
}

const std::array<Index3, 13>& half_neighbourhood() {
  static const std::array<Index3, 13> dirs = [] {
    std::array<Index3, 13> d;
    int n = 0;
    for (int k = -1; k <= 1; ++k)
      for (int j = -1; j <= 1; ++j)
        for (int i = -1; i <= 1; ++i) {
          const Index3 o(i, j, k);
          // keep the lexicographically positive half
          if (k > 0 || (k == 0 && j > 0) || (k == 0 && j == 0 && i > 0))
            d[static_cast<std::size_t>(n++)] = o;
        }
    return d;
  }();
  return dirs;
}

Vec3 nearest_foreground_center(const Mask& mask, const Vec3& p) {
  double best = kInf;
  Vec3 out = p;
  for (std::size_t n = 0; n < mask.size(); ++n) {
    if (mask[n] == 0)
      continue;
    const Vec3 c = mask.geometry().center(mask.geometry().unravel(n));
    const double d = (c - p).squaredNorm();
    if (d < best) {
      best = d;
      out = c;
    }
  }
  return out;
}

void project_into_mask(const Mask& mask, std::vector<Vec3>& points) {
  for (auto& p : points)
    if (!inside(mask, p))
      p = nearest_foreground_center(mask, p);
}

std::vector<Vec3> smooth(std::vector<Vec3> pts, int passes) {
  if (pts.size() < 3)
    return pts;
  std::vector<Vec3> next = pts;
  for (int pass = 0; pass < passes; ++pass) {
    for (std::size_t i = 1; i + 1 < pts.size(); ++i)
      next[i] = (pts[i - 1] + pts[i] + pts[i + 1]) / 3.0;
    std::swap(pts, next);
    next = pts;
  }
  return pts;
}

std::vector<Vec3> resample(const std::vector<Vec3>& pts, double step) {
  const double total = arc_length(pts);
  if (pts.size() < 2 || total == 0.0)
    return {pts.front()};
  const auto segments = static_cast<std::size_t>(std::max(1.0, std::round(total / step)));
  const double h = total / static_cast<double>(segments);
  std::vector<Vec3> out;
  out.reserve(segments + 1);
  out.push_back(pts.front());
  std::size_t i = 1;
  double walked = 0.0; // arc length at pts[i-1]
  for (std::size_t s = 1; s < segments; ++s) {
    const double target = h * static_cast<double>(s);
    double seg = (pts[i] - pts[i - 1]).norm();
    while (walked + seg < target && i + 1 < pts.size()) {
      walked += seg;
      ++i;
      seg = (pts[i] - pts[i - 1]).norm();
    }
    const double t = seg > 0.0 ? std::clamp((target - walked) / seg, 0.0, 1.0) : 0.0;
    out.push_back(pts[i - 1] + t * (pts[i] - pts[i - 1]));
  }
  out.push_back(pts.back());
  return out;
}

} // namespace

DistanceField distance_transform(const Mask& mask) {
  const GridGeometry& g = mask.geometry();
  if (foreground_count(mask) == 0)
    throw DomainError("distance transform of an empty mask");

  // pad by one background voxel on every side
  const Eigen::Array3i pd = g.dims + 2;
  auto pidx = [&](int i, int j, int k) {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(pd[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(pd[1]) * static_cast<std::size_t>(k));
  };
  std::vector<double> sq(static_cast<std::size_t>(pd[0]) * pd[1] * pd[2], 0.0);
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i)
        if (mask(i, j, k) != 0)
          sq[pidx(i + 1, j + 1, k + 1)] = kInf;

  std::vector<double> line, out, z;
  std::vector<int> v;
  for (int axis = 0; axis < 3; ++axis) {
    const double w = g.spacing[axis] * g.spacing[axis];
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
    line.resize(static_cast<std::size_t>(pd[axis]));
    for (int u2 = 0; u2 < pd[a2]; ++u2)
      for (int u1 = 0; u1 < pd[a1]; ++u1) {
        Eigen::Array3i c;
        c[a1] = u1;
        c[a2] = u2;
        for (int t = 0; t < pd[axis]; ++t) {
          c[axis] = t;
          line[static_cast<std::size_t>(t)] = sq[pidx(c[0], c[1], c[2])];
        }
        lower_envelope_1d(line, w, out, v, z);
        for (int t = 0; t < pd[axis]; ++t) {
          c[axis] = t;
          sq[pidx(c[0], c[1], c[2])] = out[static_cast<std::size_t>(t)];
        }
      }
  }

  DistanceField dt(g, 0.0);
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i)
        if (mask(i, j, k) != 0)
          dt(i, j, k) = std::sqrt(sq[pidx(i + 1, j + 1, k + 1)]);
  return dt;
}

std::vector<Index3> medial_axis(const DistanceField& dt) {
  std::vector<Index3> out;
  const GridGeometry& g = dt.geometry();
  for (std::size_t n = 0; n < dt.size(); ++n) {
    const double here = dt[n];
    if (here <= 0.0)
      continue;
    const Index3 x = g.unravel(n);
    for (const Index3& d : half_neighbourhood()) {
      if (here >= dt.value_or(x + d, 0.0) && here >= dt.value_or(x - d, 0.0)) {
        out.push_back(x);
        break;
      }
    }
  }
  return out;
}

double centerline_cost(double distance) { return 1.0 / (distance + kCenterlineEpsilon); }

double path_energy(const DistanceField& dt, const std::vector<Index3>& path) {
  double e = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const double len = ((path[i] - path[i - 1]).cast<double>().array() * dt.geometry().spacing)
                           .matrix()
                           .norm();
    e += len * 0.5 * (centerline_cost(dt(path[i - 1])) + centerline_cost(dt(path[i])));
  }
  return e;
}

std::vector<Index3> minimal_path(const Mask& mask, const DistanceField& dt, const Index3& from,
                                 const Index3& to) {
  const GridGeometry& g = mask.geometry();
  if (!g.contains(from) || mask(from) == 0 || !g.contains(to) || mask(to) == 0)
    throw DomainError("minimal path endpoints must be foreground voxels");

  std::array<Index3, 26> nbrs;
  std::array<double, 26> lens;
  {
    int n = 0;
    for (int k = -1; k <= 1; ++k)
      for (int j = -1; j <= 1; ++j)
        for (int i = -1; i <= 1; ++i) {
          if (i == 0 && j == 0 && k == 0)
            continue;
          nbrs[static_cast<std::size_t>(n)] = Index3(i, j, k);
          lens[static_cast<std::size_t>(n)] =
              (Eigen::Array3d(i, j, k) * g.spacing).matrix().norm();
          ++n;
        }
  }

  const std::size_t source = g.linear(from);
  const std::size_t target = g.linear(to);
  std::vector<double> dist(g.voxel_count(), kInf);
  std::vector<std::size_t> prev(g.voxel_count(), std::numeric_limits<std::size_t>::max());
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist[source] = 0.0;
  queue.emplace(0.0, source);
  while (!queue.empty()) {
    const auto [d, u] = queue.top();
    queue.pop();
    if (d > dist[u])
      continue;
    if (u == target)
      break;
    const Index3 ui = g.unravel(u);
    const double hu = centerline_cost(dt[u]);
    for (std::size_t e = 0; e < nbrs.size(); ++e) {
      const Index3 wi = ui + nbrs[e];
      if (!g.contains(wi) || mask(wi) == 0)
        continue;
      const std::size_t w = g.linear(wi);
      const double nd = d + lens[e] * 0.5 * (hu + centerline_cost(dt[w]));
      if (nd < dist[w]) {
        dist[w] = nd;
        prev[w] = u;
        queue.emplace(nd, w);
      }
    }
  }
  if (dist[target] == kInf)
    throw ConnectivityError("centerline endpoints are not connected through the mask");

  std::vector<Index3> path;
  for (std::size_t n = target; n != source; n = prev[n])
    path.push_back(g.unravel(n));
  path.push_back(from);
  std::reverse(path.begin(), path.end());
  return path;
}

Centerline centerline_from_points(std::vector<Vec3> points) {
  Centerline cl;
  if (points.empty())
    return cl;
  const std::size_t n = points.size();
  cl.tangents.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 d = Vec3::Zero();
    if (n > 1) {
      const std::size_t a = i == 0 ? 0 : i - 1;
      const std::size_t b = i + 1 == n ? n - 1 : i + 1;
      d = points[b] - points[a];
    }
    const double len = d.norm();
    if (len > 0.0)
      cl.tangents[i] = d / len;
    else
      cl.tangents[i] = i > 0 ? cl.tangents[i - 1] : Vec3::UnitX();
    if (i > 0 && cl.tangents[i].dot(cl.tangents[i - 1]) < 0.0)
      cl.tangents[i] = -cl.tangents[i];
  }
  cl.length = arc_length(points);
  cl.p1 = points.front();
  cl.p2 = points.back();
  cl.points = std::move(points);
  return cl;
}

Centerline extract_centerline(const Mask& mask, const Vec3& p1, const Vec3& p2,
                              const CenterlineOptions& options) {
  if (!(options.resample_step > 0.0))
    throw DomainError("centerline resample step must be positive");
  if (!inside(mask, p1) || !inside(mask, p2))
    throw DomainError("centerline endpoint lies in the background");
  const GridGeometry& g = mask.geometry();
  if (p1 == p2)
    return centerline_from_points({p1});

  const DistanceField dt = distance_transform(mask);
  const auto path = minimal_path(mask, dt, g.nearest_index(p1), g.nearest_index(p2));

  std::vector<Vec3> pts;
  pts.reserve(path.size() + 1);
  for (const auto& ijk : path)
    pts.push_back(g.center(ijk));
  pts.front() = p1;
  if (pts.size() == 1)
    pts.push_back(p2);
  else
    pts.back() = p2;

  pts = smooth(std::move(pts), options.smoothing_passes);
  project_into_mask(mask, pts);
  pts = resample(pts, options.resample_step);
  project_into_mask(mask, pts);
  return centerline_from_points(std::move(pts));
}

std::size_t nearest_point_index(const Centerline& cl, const Vec3& p) {
  std::size_t best = 0;
  double best_d = kInf;
  for (std::size_t i = 0; i < cl.points.size(); ++i) {
    const double d = (cl.points[i] - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

Vec3 cross_section_normal(const Centerline& cl, const Vec3& p) {
  if (cl.empty())
    throw DomainError("cross-section normal of an empty centerline");
  return cl.tangents[nearest_point_index(cl, p)];
}

std::vector<Index3> cross_section_voxels(const Mask& mask, const Centerline& cl,
                                         std::size_t index) {
  if (cl.empty())
    throw DomainError("cross-section of an empty centerline");
  index = std::min(index, cl.points.size() - 1);
  const Vec3 c = cl.points[index];
  const Vec3 t = cl.tangents[index];
  const double half = 0.5 * mask.geometry().spacing.maxCoeff();
  const double seg =
      cl.points.size() > 1 ? cl.length / static_cast<double>(cl.points.size() - 1) : 1.0;
  const auto reach = static_cast<std::ptrdiff_t>(std::ceil(4.0 * half / std::max(seg, 1e-12))) + 1;
  std::vector<Index3> out;
  for (const Index3& ijk : foreground_voxels(mask)) {
    const Vec3 x = mask.geometry().center(ijk);
    if (std::abs((x - c).dot(t)) > half)
      continue;
    const auto near = static_cast<std::ptrdiff_t>(nearest_point_index(cl, x));
    if (std::abs(near - static_cast<std::ptrdiff_t>(index)) <= reach)
      out.push_back(ijk);
  }
  return out;
}

} // namespace ftd
