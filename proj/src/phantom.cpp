#include "ftd/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Geometry>

#include "ftd/io.hpp"
#include "ftd/tracker.hpp"

namespace ftd {
namespace {

using std::numbers::pi;

struct KeyValue {
  std::string value;
  int line = 0;
};

std::map<std::string, KeyValue> parse_key_values(const std::string& text, const std::string& name) {
  std::map<std::string, KeyValue> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#')
      continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos)
      throw FormatError(name + ": line " + std::to_string(line_no) +
                        ": expected 'key: value', got '" + line + "'");
    auto strip = [](std::string s) {
      const auto f = s.find_first_not_of(" \t\r");
      const auto l = s.find_last_not_of(" \t\r");
      return f == std::string::npos ? std::string() : s.substr(f, l - f + 1);
    };
    const std::string key = strip(line.substr(0, colon));
    if (out.contains(key))
      throw FormatError(name + ": line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    out[key] = {strip(line.substr(colon + 1)), line_no};
  }
  return out;
}

template <typename T>
T parse_value(const std::string& key, const KeyValue& kv, const std::string& name) {
  std::istringstream ss(kv.value);
  T v{};
  std::string rest;
  if (!(ss >> v) || (ss >> rest))
    throw FormatError(name + ": line " + std::to_string(kv.line) + ": invalid " + key + " '" +
                      kv.value + "'");
  return v;
}

template <typename Array>
Array parse_triple(const std::string& key, const KeyValue& kv, const std::string& name) {
  std::istringstream ss(kv.value);
  Array a;
  std::string rest;
  if (!(ss >> a[0] >> a[1] >> a[2]) || (ss >> rest))
    throw FormatError(name + ": line " + std::to_string(kv.line) + ": invalid " + key + " '" +
                      kv.value + "'");
  return a;
}

// Consumes the spec keys from `kv`; what remains is left for the caller.
PhantomSpec spec_from_key_values(std::map<std::string, KeyValue>& kv, const std::string& name) {
  PhantomSpec s;
  auto take = [&](const char* key) -> std::optional<KeyValue> {
    auto it = kv.find(key);
    if (it == kv.end())
      return std::nullopt;
    KeyValue v = it->second;
    kv.erase(it);
    return v;
  };
  if (auto v = take("kind"))
    s.kind = phantom_kind_from_string(v->value);
  auto real = [&](const char* key, double& out) {
    if (auto v = take(key))
      out = parse_value<double>(key, *v, name);
  };
  real("radius", s.radius);
  real("length", s.length);
  real("major_radius", s.major_radius);
  real("helix_radius", s.helix_radius);
  real("pitch", s.pitch);
  real("turns", s.turns);
  real("fan_rate", s.fan_rate);
  real("spacing", s.spacing);
  real("distractor_amplitude", s.distractor_amplitude);
  real("distractor_band", s.distractor_band);
  real("noise_deg", s.noise_deg);
  if (auto v = take("margin"))
    s.margin = parse_value<int>("margin", *v, name);
  if (auto v = take("distractors"))
    s.distractors = parse_value<int>("distractors", *v, name);
  if (auto v = take("dims"))
    s.dims = parse_triple<Eigen::Array3i>("dims", *v, name);
  if (auto v = take("origin"))
    s.origin = parse_triple<Eigen::Array3d>("origin", *v, name);
  s.validate();
  return s;
}

} // namespace

std::string to_string(PhantomKind kind) {
  switch (kind) {
  case PhantomKind::straight_tube:
    return "straight-tube";
  case PhantomKind::quarter_torus:
    return "quarter-torus";
  case PhantomKind::helix:
    return "helix";
  case PhantomKind::fanning:
    return "fanning";
  }
  return "unknown";
}

PhantomKind phantom_kind_from_string(const std::string& name) {
  for (auto k : {PhantomKind::straight_tube, PhantomKind::quarter_torus, PhantomKind::helix,
                 PhantomKind::fanning})
    if (to_string(k) == name)
      return k;
  throw FormatError("unknown phantom kind '" + name + "'");
}

void PhantomSpec::validate() const {
  if (!(radius > 0.0) || !(spacing > 0.0))
    throw DomainError("phantom radius and spacing must be positive");
  if (margin < 0)
    throw DomainError("phantom margin must be nonnegative");
  if (distractors < 0 || distractors > 2)
    throw DomainError("phantom distractors must be 0, 1 or 2");
  if (!(distractor_amplitude >= 0.0) || !(distractor_band >= 0.0 && distractor_band <= 1.0))
    throw DomainError("invalid distractor configuration");
  if (!(noise_deg >= 0.0))
    throw DomainError("noise must be nonnegative");
  switch (kind) {
  case PhantomKind::straight_tube:
  case PhantomKind::fanning:
    if (!(length > 0.0))
      throw DomainError("phantom length must be positive");
    if (kind == PhantomKind::fanning && !(fan_rate >= 0.0))
      throw DomainError("fan rate must be nonnegative");
    break;
  case PhantomKind::quarter_torus:
    if (!(major_radius > radius))
      throw DomainError("torus major radius must exceed the tube radius");
    break;
  case PhantomKind::helix:
    if (!(helix_radius > radius) || !(pitch > 0.0) || !(turns > 0.0))
      throw DomainError("helix needs radius > tube radius, pitch > 0, turns > 0");
    break;
  }
  if (dims.has_value() != origin.has_value())
    throw DomainError("explicit phantom grid needs both dims and origin");
  if (dims && (*dims < 1).any())
    throw DomainError("phantom dims must be >= 1");
}

PhantomSpec parse_phantom_spec(const std::string& text) {
  auto kv = parse_key_values(text, "phantom spec");
  PhantomSpec s = spec_from_key_values(kv, "phantom spec");
  if (!kv.empty())
    throw FormatError("phantom spec: line " + std::to_string(kv.begin()->second.line) +
                      ": unknown key '" + kv.begin()->first + "'");
  return s;
}

PhantomSpec load_phantom_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  auto kv = parse_key_values(ss.str(), path.string());
  PhantomSpec s = spec_from_key_values(kv, path.string());
  if (!kv.empty())
    throw FormatError(path.string() + ": line " + std::to_string(kv.begin()->second.line) +
                      ": unknown key '" + kv.begin()->first + "'");
  return s;
}

std::string format_phantom_spec(const PhantomSpec& s) {
  std::ostringstream ss;
  ss << "kind: " << to_string(s.kind) << '\n';
  ss << "radius: " << format_real(s.radius) << '\n';
  ss << "length: " << format_real(s.length) << '\n';
  ss << "major_radius: " << format_real(s.major_radius) << '\n';
  ss << "helix_radius: " << format_real(s.helix_radius) << '\n';
  ss << "pitch: " << format_real(s.pitch) << '\n';
  ss << "turns: " << format_real(s.turns) << '\n';
  ss << "fan_rate: " << format_real(s.fan_rate) << '\n';
  ss << "spacing: " << format_real(s.spacing) << '\n';
  ss << "margin: " << s.margin << '\n';
  ss << "distractors: " << s.distractors << '\n';
  ss << "distractor_amplitude: " << format_real(s.distractor_amplitude) << '\n';
  ss << "distractor_band: " << format_real(s.distractor_band) << '\n';
  ss << "noise_deg: " << format_real(s.noise_deg) << '\n';
  if (s.dims) {
    ss << "dims: " << (*s.dims)[0] << ' ' << (*s.dims)[1] << ' ' << (*s.dims)[2] << '\n';
    ss << "origin: " << format_real((*s.origin)[0]) << ' ' << format_real((*s.origin)[1]) << ' '
       << format_real((*s.origin)[2]) << '\n';
  }
  return ss.str();
}

AnalyticField::AnalyticField(const PhantomSpec& spec) : spec_(spec) { spec_.validate(); }

Vec3 AnalyticField::operator()(const Vec3& p) const {
  switch (spec_.kind) {
  case PhantomKind::straight_tube:
    return Vec3::UnitX();
  case PhantomKind::quarter_torus:
    return Vec3(-p.y(), p.x(), 0.0) / spec_.major_radius;
  case PhantomKind::helix:
    return Vec3(-p.y(), p.x(), spec_.pitch) / axis_speed();
  case PhantomKind::fanning:
    return Vec3(1.0, spec_.fan_rate * p.y(), -spec_.fan_rate * p.z());
  }
  return Vec3::Zero();
}

double AnalyticField::divergence(const Vec3&) const {
  switch (spec_.kind) {
  case PhantomKind::straight_tube:
    return 0.0;
  case PhantomKind::quarter_torus: // d(-y)/dx + d(x)/dy
    return (0.0 + 0.0) / spec_.major_radius;
  case PhantomKind::helix: // d(-y)/dx + d(x)/dy + d(c)/dz
    return (0.0 + 0.0 + 0.0) / axis_speed();
  case PhantomKind::fanning: // d(1)/dx + d(a y)/dy + d(-a z)/dz
    return 0.0 + spec_.fan_rate - spec_.fan_rate;
  }
  return 0.0;
}

Vec3 AnalyticField::axis_point(double t) const {
  switch (spec_.kind) {
  case PhantomKind::straight_tube:
  case PhantomKind::fanning:
    return Vec3(t, 0.0, 0.0);
  case PhantomKind::quarter_torus:
    return spec_.major_radius * Vec3(std::cos(t), std::sin(t), 0.0);
  case PhantomKind::helix:
    return Vec3(spec_.helix_radius * std::cos(t), spec_.helix_radius * std::sin(t),
                spec_.pitch * t);
  }
  return Vec3::Zero();
}

Vec3 AnalyticField::axis_tangent(double t) const {
  switch (spec_.kind) {
  case PhantomKind::straight_tube:
  case PhantomKind::fanning:
    return Vec3::UnitX();
  case PhantomKind::quarter_torus:
    return Vec3(-std::sin(t), std::cos(t), 0.0);
  case PhantomKind::helix:
    return Vec3(-spec_.helix_radius * std::sin(t), spec_.helix_radius * std::cos(t), spec_.pitch) /
           axis_speed();
  }
  return Vec3::UnitX();
}

double AnalyticField::t_max() const {
  switch (spec_.kind) {
  case PhantomKind::straight_tube:
  case PhantomKind::fanning:
    return spec_.length;
  case PhantomKind::quarter_torus:
    return pi / 2.0;
  case PhantomKind::helix:
    return 2.0 * pi * spec_.turns;
  }
  return 0.0;
}

double AnalyticField::axis_speed() const {
  switch (spec_.kind) {
  case PhantomKind::straight_tube:
  case PhantomKind::fanning:
    return 1.0;
  case PhantomKind::quarter_torus:
    return spec_.major_radius;
  case PhantomKind::helix:
    return std::hypot(spec_.helix_radius, spec_.pitch);
  }
  return 1.0;
}

double AnalyticField::nearest_parameter(const Vec3& p) const {
  switch (spec_.kind) {
  case PhantomKind::straight_tube:
  case PhantomKind::fanning:
    return std::clamp(p.x(), 0.0, spec_.length);
  case PhantomKind::quarter_torus: {
    const double a = std::atan2(p.y(), p.x());
    if (a >= 0.0 && a <= pi / 2.0)
      return a;
    const double d0 = (p - axis_point(0.0)).squaredNorm();
    const double d1 = (p - axis_point(pi / 2.0)).squaredNorm();
    return d0 <= d1 ? 0.0 : pi / 2.0;
  }
  case PhantomKind::helix: {
    const double dt = 0.25 * spec_.spacing / axis_speed();
    const int n = std::max(2, static_cast<int>(std::ceil(t_max() / dt)));
    double best_t = 0.0, best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= n; ++i) {
      const double t = t_max() * i / n;
      const double d = (p - axis_point(t)).squaredNorm();
      if (d < best) {
        best = d;
        best_t = t;
      }
    }
    // golden-section refinement around the best sample
    double lo = std::max(0.0, best_t - t_max() / n), hi = std::min(t_max(), best_t + t_max() / n);
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 60; ++it) {
      const double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
      if ((p - axis_point(a)).squaredNorm() <= (p - axis_point(b)).squaredNorm())
        hi = b;
      else
        lo = a;
    }
    return 0.5 * (lo + hi);
  }
  }
  return 0.0;
}

bool AnalyticField::in_bundle(const Vec3& p) const {
  if (spec_.kind == PhantomKind::fanning) {
    if (p.x() < 0.0 || p.x() > spec_.length)
      return false;
    const double e = std::exp(spec_.fan_rate * p.x());
    const double y0 = p.y() / e, z0 = p.z() * e;
    return y0 * y0 + z0 * z0 <= spec_.radius * spec_.radius;
  }
  return (p - axis_point(nearest_parameter(p))).norm() <= spec_.radius;
}

Centerline analytic_axis(const AnalyticField& field, double step) {
  if (!(step > 0.0))
    throw DomainError("axis sampling step must be positive");
  const double len = field.arc_length();
  const int n = std::max(1, static_cast<int>(std::ceil(len / step)));
  Centerline cl;
  for (int k = 0; k <= n; ++k) {
    const double t = field.t_max() * k / n;
    cl.points.push_back(field.axis_point(t));
    cl.tangents.push_back(field.axis_tangent(t));
  }
  cl.length = len;
  cl.p1 = cl.points.front();
  cl.p2 = cl.points.back();
  return cl;
}

Phantom generate(const PhantomSpec& spec, std::uint64_t rng_seed) {
  spec.validate();
  const AnalyticField field(spec);
  const double s = spec.spacing;

  // bundle bounding box
  Eigen::Array3d lo = Eigen::Array3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Array3d hi = -lo;
  const int samples = std::max(16, static_cast<int>(std::ceil(field.arc_length() / (0.25 * s))));
  for (int i = 0; i <= samples; ++i) {
    const Eigen::Array3d c = field.axis_point(field.t_max() * i / samples).array();
    lo = lo.min(c);
    hi = hi.max(c);
  }
  Eigen::Array3d reach = Eigen::Array3d::Constant(spec.radius);
  if (spec.kind == PhantomKind::fanning)
    reach[1] = spec.radius * std::exp(spec.fan_rate * spec.length);
  lo -= reach;
  hi += reach;
  if (spec.kind == PhantomKind::fanning) {
    lo[0] = 0.0;
    hi[0] = spec.length;
  }

  GridGeometry g;
  g.spacing = Eigen::Array3d::Constant(s);
  if (spec.dims) {
    g.dims = *spec.dims;
    g.origin = *spec.origin;
    const Eigen::Array3d gmin = g.origin - 0.5 * s;
    const Eigen::Array3d gmax = g.origin + (g.dims.cast<double>() - 0.5) * s;
    if ((lo < gmin).any() || (hi > gmax).any())
      throw GeometryError("phantom bundle exits the requested grid");
  } else {
    g.origin = (lo / s).floor() * s - spec.margin * s;
    g.dims = ((hi - g.origin) / s).ceil().cast<int>() + spec.margin + 1;
  }
  if (static_cast<double>(g.dims.cast<double>().prod()) > 512.0 * 512.0 * 512.0)
    throw GeometryError("phantom grid too large");
  g.validate();

  Phantom ph{spec, Mask(g, 0), PeaksField(g, 1 + spec.distractors), analytic_axis(field, 0.5 * s),
             field};

  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double jitter = spec.noise_deg * pi / 180.0;
  const double band_lo = 0.5 * (1.0 - spec.distractor_band) * field.t_max();
  const double band_hi = 0.5 * (1.0 + spec.distractor_band) * field.t_max();
  std::size_t fg = 0;
  for (std::size_t n = 0; n < g.voxel_count(); ++n) {
    const Index3 ijk = g.unravel(n);
    const Vec3 p = g.center(ijk);
    if (!field.in_bundle(p))
      continue;
    ph.mask[n] = 1;
    ++fg;
    const Vec3 primary = field(p).normalized();
    Vec3 d = primary;
    if (jitter > 0.0) {
      const Vec3 e1 = primary.unitOrthogonal();
      const Vec3 e2 = primary.cross(e1);
      const double a = gauss(rng) * jitter, b = gauss(rng) * jitter;
      d = (primary + a * e1 + b * e2).normalized();
    }
    std::vector<Peak> peaks{{d.cast<float>(), 1.0f}};
    const double t = field.nearest_parameter(p);
    if (spec.distractors > 0 && t >= band_lo && t <= band_hi) {
      for (int k = 0; k < spec.distractors; ++k) {
        Vec3 o(gauss(rng), gauss(rng), gauss(rng));
        o -= o.dot(primary) * primary;
        if (o.norm() < 1e-9)
          o = primary.unitOrthogonal();
        peaks.push_back({o.normalized().cast<float>(), static_cast<float>(spec.distractor_amplitude)});
      }
    }
    ph.peaks.set(ijk, std::move(peaks));
  }
  if (fg == 0)
    throw GeometryError("phantom bundle contains no voxel centers");
  return ph;
}

std::vector<Vec3> analytic_streamline(const AnalyticField& field, const Vec3& seed,
                                      double arc_length, double fine_step) {
  if (!(fine_step > 0.0) || !(arc_length >= 0.0))
    throw DomainError("analytic streamline needs a positive step and nonnegative length");
  std::vector<Vec3> pts{seed};
  if (arc_length == 0.0)
    return pts;
  const auto n = static_cast<long>(std::ceil(arc_length / fine_step));
  const double h = arc_length / static_cast<double>(n);
  Vec3 eta = seed;
  std::optional<Vec3> prev;
  for (long k = 0; k < n; ++k) {
    Vec3 d0 = field(eta);
    if (!(d0.norm() >= kZeroField))
      break;
    d0.normalize();
    if (prev && d0.dot(*prev) < 0.0)
      d0 = -d0;
    const auto next = rk4_step(field, eta, d0, h);
    if (!next)
      break;
    prev = d0;
    eta = *next;
    pts.push_back(eta);
  }
  return pts;
}

Tract reference_tract(const AnalyticField& field, const Mask& mask, std::span<const Vec3> seeds,
                      double step) {
  if (!(step > 0.0))
    throw DomainError("reference step must be positive");
  constexpr int kSub = 10;
  const double h = step / kSub;
  const long max_steps = static_cast<long>(std::ceil(4.0 * (field.arc_length() + 4.0 * field.spec().radius) / h));
  Tract tract;
  tract.step = step;
  for (const Vec3& seed : seeds) {
    if (!inside(mask, seed))
      continue;
    std::vector<Vec3> halves[2];
    for (int dir = 0; dir < 2; ++dir) {
      Vec3 ref = field(seed).normalized() * (dir == 0 ? 1.0 : -1.0);
      Vec3 eta = seed;
      for (long k = 1; k <= max_steps; ++k) {
        Vec3 d0 = field(eta).normalized();
        if (d0.dot(ref) < 0.0)
          d0 = -d0;
        const auto next = rk4_step(field, eta, d0, h);
        if (!next || !inside(mask, *next)) {
          if (k % kSub != 1 && (halves[dir].empty() || halves[dir].back() != eta) && eta != seed)
            halves[dir].push_back(eta);
          break;
        }
        ref = d0;
        eta = *next;
        if (k % kSub == 0)
          halves[dir].push_back(eta);
      }
    }
    Streamline line(halves[1].rbegin(), halves[1].rend());
    line.push_back(seed);
    line.insert(line.end(), halves[0].begin(), halves[0].end());
    if (line.size() >= 2)
      tract.streamlines.push_back(std::move(line));
  }
  return tract;
}

void save_descriptor(const std::filesystem::path& path, const Phantom& ph,
                     std::uint64_t rng_seed) {
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw FormatError("cannot write " + path.string());
  const auto& f = ph.field;
  out << "# phantom descriptor\n";
  out << format_phantom_spec(ph.spec);
  out << "rng_seed: " << rng_seed << '\n';
  out << "arc_length: " << format_real(f.arc_length()) << '\n';
  const Vec3 p1 = f.axis_point(0.0), p2 = f.axis_point(f.t_max());
  out << "p1: " << format_real(p1[0]) << ' ' << format_real(p1[1]) << ' ' << format_real(p1[2])
      << '\n';
  out << "p2: " << format_real(p2[0]) << ' ' << format_real(p2[1]) << ' ' << format_real(p2[2])
      << '\n';
  switch (ph.spec.kind) {
  case PhantomKind::straight_tube:
    out << "field: (1, 0, 0)\n";
    break;
  case PhantomKind::quarter_torus:
    out << "field: (-y, x, 0) / major_radius\n";
    break;
  case PhantomKind::helix:
    out << "field: (-y, x, pitch) / sqrt(helix_radius^2 + pitch^2)\n";
    break;
  case PhantomKind::fanning:
    out << "field: (1, fan_rate * y, -fan_rate * z)\n";
    break;
  }
}

PhantomSpec load_descriptor(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  auto kv = parse_key_values(ss.str(), path.string());
  PhantomSpec spec = spec_from_key_values(kv, path.string());
  for (const auto& [key, v] : kv)
    if (key != "rng_seed" && key != "arc_length" && key != "p1" && key != "p2" && key != "field")
      throw FormatError(path.string() + ": line " + std::to_string(v.line) + ": unknown key '" +
                        key + "'");
  return spec;
}

} // namespace ftd
