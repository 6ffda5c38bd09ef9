#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ftd/io.hpp"
#include "ftd/metrics.hpp"

namespace ftd::cli {
namespace {

using json = nlohmann::ordered_json;

json to_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

json to_json(const TrackParams& p) {
  return {{"step", p.step},
          {"sigma", p.sigma},
          {"max_steps", p.max_steps},
          {"seed_count", p.seed_count},
          {"rng_seed", p.rng_seed},
          {"min_len", p.min_length()},
          {"bidirectional", p.bidirectional},
          {"jitter_seeds", p.jitter_seeds}};
}

json to_json(const SeedOptions& s) {
  json j{{"mode", s.mode}, {"position", s.position}, {"depth", s.depth}};
  if (s.centerline)
    j["centerline"] = s.centerline->string();
  return j;
}

void write_manifest(const fs::path& path, const std::string& subcommand,
                    const std::vector<std::string>& command, json parameters, json inputs,
                    json outputs) {
  json m;
  m["tool"] = "ftdtrack";
  m["version"] = kVersion;
  m["subcommand"] = subcommand;
  m["command"] = command;
  m["parameters"] = std::move(parameters);
  m["inputs"] = std::move(inputs);
  m["outputs"] = std::move(outputs);
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw FormatError("cannot write " + path.string());
  out << m.dump(2) << '\n';
}

fs::path manifest_for(const fs::path& output) { return fs::path(output.string() + ".json"); }

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path())
    fs::create_directories(p.parent_path());
}

std::vector<Vec3> read_points(const fs::path& path) {
  std::ifstream in(path);
  if (!in)
    throw FormatError("cannot open " + path.string());
  std::vector<Vec3> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#')
      continue;
    std::istringstream ss(line);
    Vec3 p;
    std::string rest;
    if (!(ss >> p[0] >> p[1] >> p[2]) || (ss >> rest))
      throw FormatError(path.string() + ": line " + std::to_string(n) + ": expected 'x y z'");
    out.push_back(p);
  }
  return out;
}

std::string fixed(double v, int digits) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

} // namespace

Centerline load_centerline(const fs::path& path) {
  const Tract t = load_tract(path);
  if (t.streamlines.size() != 1)
    throw FormatError(path.string() + ": a centerline file holds exactly one polyline");
  return centerline_from_points(t.streamlines.front());
}

void save_centerline(const fs::path& path, const Centerline& cl, double step) {
  Tract t;
  t.step = step;
  t.streamlines.push_back(cl.points);
  save_tract(path, t, {"centerline"});
}

std::vector<Vec3> resolve_seeds(const Mask& mask, const SeedOptions& options) {
  std::vector<Index3> voxels;
  if (options.mode == "cross-section") {
    if (!options.centerline)
      throw DomainError("cross-section seeding needs a centerline");
    if (!(options.position >= 0.0 && options.position <= 1.0))
      throw DomainError("seed position must lie in [0, 1]");
    const Centerline cl = load_centerline(*options.centerline);
    const auto index = static_cast<std::size_t>(
        std::lround(options.position * static_cast<double>(cl.points.size() - 1)));
    voxels = cross_section_voxels(mask, cl, index);
  } else if (options.mode == "mask") {
    voxels = foreground_voxels(mask);
  } else {
    return read_points(options.mode);
  }
  if (options.depth > 0.0) {
    const DistanceField dt = distance_transform(mask);
    std::erase_if(voxels, [&](const Index3& v) { return dt(v) < options.depth; });
  }
  std::vector<Vec3> seeds;
  seeds.reserve(voxels.size());
  for (const auto& v : voxels)
    seeds.push_back(mask.geometry().center(v));
  if (seeds.empty())
    throw EmptyTractError("seed selection produced no seeds");
  return seeds;
}

void run_phantom(const PhantomStage& s, const std::vector<std::string>& command) {
  const Phantom ph = generate(s.spec, s.rng_seed);
  fs::create_directories(s.out);
  save_mask(s.out / "mask.rvf", ph.mask);
  save_peaks(s.out / "peaks.rvf", ph.peaks);
  save_centerline(s.out / "axis.trk", ph.axis, 0.5 * s.spec.spacing);
  save_descriptor(s.out / "descriptor.txt", ph, s.rng_seed);

  const std::size_t mid = ph.axis.points.size() / 2;
  std::vector<Vec3> seeds;
  for (const auto& v : cross_section_voxels(ph.mask, ph.axis, mid))
    seeds.push_back(ph.mask.geometry().center(v));
  const Tract reference = reference_tract(ph.field, ph.mask, seeds, s.reference_step);
  save_tract(s.out / "reference.trk", reference, {"reference"});

  json params{{"spec", format_phantom_spec(s.spec)},
              {"rng_seed", s.rng_seed},
              {"reference_step", s.reference_step}};
  write_manifest(s.out / "manifest.json", "phantom", command, params, json::object(),
                 {{"mask", (s.out / "mask.rvf").string()},
                  {"peaks", (s.out / "peaks.rvf").string()},
                  {"axis", (s.out / "axis.trk").string()},
                  {"descriptor", (s.out / "descriptor.txt").string()},
                  {"reference", (s.out / "reference.trk").string()}});
}

void run_centerline(const CenterlineStage& s, const std::vector<std::string>& command) {
  const Mask mask = load_mask(s.mask);
  Vec3 p1, p2;
  if (s.descriptor) {
    const AnalyticField field(load_descriptor(*s.descriptor));
    p1 = field.axis_point(field.t_min());
    p2 = field.axis_point(field.t_max());
  }
  if (s.p1)
    p1 = *s.p1;
  if (s.p2)
    p2 = *s.p2;
  if (!s.descriptor && (!s.p1 || !s.p2))
    throw DomainError("centerline needs --p1 and --p2 or a --descriptor");
  const Centerline cl = extract_centerline(mask, p1, p2, s.options);
  ensure_parent(s.out);
  save_centerline(s.out, cl, s.options.resample_step);
  json inputs{{"mask", s.mask.string()}};
  if (s.descriptor)
    inputs["descriptor"] = s.descriptor->string();
  write_manifest(manifest_for(s.out), "centerline", command,
                 {{"p1", to_json(p1)},
                  {"p2", to_json(p2)},
                  {"resample_step", s.options.resample_step},
                  {"smoothing_passes", s.options.smoothing_passes},
                  {"length", cl.length}},
                 inputs, {{"centerline", s.out.string()}});
}

void run_prior(const PriorStage& s, const std::vector<std::string>& command) {
  const PeaksField peaks = load_peaks(s.peaks);
  const Mask mask = load_mask(s.mask);
  const Centerline cl = load_centerline(s.centerline);
  const PriorField prior = build_prior(peaks, cl, mask, s.options);
  ensure_parent(s.out);
  save_peaks(s.out, prior_to_peaks(prior));
  write_manifest(manifest_for(s.out), "prior", command,
                 {{"cutoff", s.options.min_amp},
                  {"centerline_only", s.options.centerline_only},
                  {"valid_voxels", prior.valid_count()},
                  {"foreground_voxels", foreground_count(mask)}},
                 {{"peaks", s.peaks.string()},
                  {"mask", s.mask.string()},
                  {"centerline", s.centerline.string()}},
                 {{"prior", s.out.string()}});
}

void run_fit(const FitStage& s, const std::vector<std::string>& command) {
  const PriorField prior = prior_from_peaks(load_peaks(s.prior));
  const Mask mask = load_mask(s.mask);
  const PolyField field = fit_ftd(prior, mask, s.order, s.ridge);
  ensure_parent(s.out);
  save_poly_field(s.out, field);
  write_manifest(manifest_for(s.out), "fit", command,
                 {{"order", s.order},
                  {"basis_size", field.basis_size()},
                  {"ridge", field.ridge},
                  {"samples", field.samples},
                  {"max_divergence_coefficient", divergence_coefficients(field).cwiseAbs().maxCoeff()}},
                 {{"prior", s.prior.string()}, {"mask", s.mask.string()}},
                 {{"field", s.out.string()}});
}

void run_track(const TrackStage& s, const std::vector<std::string>& command) {
  const PolyField field = load_poly_field(s.field);
  const Mask mask = load_mask(s.mask);
  const auto seeds = resolve_seeds(mask, s.seeds);
  std::vector<std::size_t> skipped;
  const Tract tract = track(field, mask, seeds, s.params, &skipped);
  ensure_parent(s.out);
  save_tract(s.out, tract, {"ftd tract"});
  write_manifest(manifest_for(s.out), "track", command,
                 {{"track", to_json(s.params)},
                  {"seeds", to_json(s.seeds)},
                  {"seed_points", seeds.size()},
                  {"skipped_seeds", skipped.size()},
                  {"streamlines", tract.streamlines.size()}},
                 {{"field", s.field.string()}, {"mask", s.mask.string()}},
                 {{"tract", s.out.string()}});
}

void run_baseline(const BaselineStage& s, const std::vector<std::string>& command) {
  const PeaksField peaks = load_peaks(s.peaks);
  const Mask mask = load_mask(s.mask);
  const auto seeds = resolve_seeds(mask, s.seeds);
  std::vector<std::size_t> skipped;
  const Tract tract =
      baseline_peak_track(peaks, mask, seeds, s.params, s.angle_max, s.cutoff, &skipped);
  ensure_parent(s.out);
  save_tract(s.out, tract, {"baseline tract"});
  write_manifest(manifest_for(s.out), "baseline", command,
                 {{"track", to_json(s.params)},
                  {"angle_max", s.angle_max},
                  {"cutoff", s.cutoff},
                  {"seeds", to_json(s.seeds)},
                  {"seed_points", seeds.size()},
                  {"skipped_seeds", skipped.size()},
                  {"streamlines", tract.streamlines.size()}},
                 {{"peaks", s.peaks.string()}, {"mask", s.mask.string()}},
                 {{"tract", s.out.string()}});
}

std::string MetricsRecord::line() const {
  std::ostringstream ss;
  ss << "overlap=" << fixed(overlap, 4);
  if (has_distance)
    ss << " hd=" << fixed(hd, 4) << " ahd=" << fixed(ahd, 4);
  if (completion)
    ss << " completion=" << fixed(*completion, 4);
  ss << " streamlines=" << streamlines;
  return ss.str();
}

MetricsRecord run_metrics(const MetricsStage& s, const std::vector<std::string>& command) {
  const Tract tract = load_tract(s.tract);
  const Mask mask = load_mask(s.mask);
  MetricsRecord r;
  r.streamlines = tract.streamlines.size();
  r.overlap = spatial_overlap(voxelize(tract, mask.geometry()), mask);
  if (s.reference) {
    const FiberDistance d = hausdorff(tract, load_tract(*s.reference));
    r.hd = d.hd;
    r.ahd = d.ahd;
    r.has_distance = true;
  }
  const double tol = s.tolerance.value_or(2.0 * mask.geometry().spacing.maxCoeff());
  if (s.axis)
    r.completion = completion_fraction(tract, load_centerline(*s.axis), tol);
  if (s.out) {
    ensure_parent(*s.out);
    std::ofstream out(*s.out, std::ios::trunc);
    if (!out)
      throw FormatError("cannot write " + s.out->string());
    out << r.line() << '\n';
    json inputs{{"tract", s.tract.string()}, {"mask", s.mask.string()}};
    if (s.reference)
      inputs["reference"] = s.reference->string();
    if (s.axis)
      inputs["axis"] = s.axis->string();
    json params{{"overlap_definition", "Dice x 100 against the mask"},
                {"distance_units", "mm"},
                {"completion_tolerance", tol}};
    json results{{"overlap", r.overlap}, {"streamlines", r.streamlines}};
    if (r.has_distance) {
      results["hd"] = r.hd;
      results["ahd"] = r.ahd;
    }
    if (r.completion)
      results["completion"] = *r.completion;
    params["results"] = results;
    write_manifest(manifest_for(*s.out), "metrics", command, params, inputs,
                   {{"record", s.out->string()}});
  }
  return r;
}

namespace {

void print_table(std::ostream& out, const MetricsRecord& r) {
  out << "  spatial overlap (Dice) [%]  " << fixed(r.overlap, 2) << '\n';
  if (r.has_distance) {
    out << "  Hausdorff distance [mm]     " << fixed(r.hd, 3) << '\n';
    out << "  average Hausdorff [mm]      " << fixed(r.ahd, 3) << '\n';
  }
  if (r.completion)
    out << "  end-to-end completion       " << fixed(*r.completion, 3) << '\n';
  out << "  streamlines                 " << r.streamlines << '\n';
}

Vec3 to_vec3(const std::vector<double>& v) { return Vec3(v[0], v[1], v[2]); }

struct TrackFlags {
  TrackParams params;
  std::optional<double> min_len;
  SeedOptions seeds;
  std::string seeds_mode = "cross-section";
  std::string centerline;
};

void add_track_flags(CLI::App* app, TrackFlags& f) {
  app->add_option("--step", f.params.step, "step length lambda in mm")->capture_default_str();
  app->add_option("--sigma", f.params.sigma, "std of the direction perturbation")
      ->capture_default_str();
  app->add_option("--seed-count", f.params.seed_count, "streamlines per seed")
      ->capture_default_str();
  app->add_option("--rng-seed", f.params.rng_seed, "random seed")->capture_default_str();
  app->add_option("--max-steps", f.params.max_steps, "steps per direction")->capture_default_str();
  app->add_option("--min-len", f.min_len, "minimum streamline length in mm (default 3 * step)");
  app->add_flag("!--no-bidirectional", f.params.bidirectional, "track forward only");
  app->add_flag("!--no-jitter", f.params.jitter_seeds, "start every repetition at the seed point");
  app->add_option("--seeds", f.seeds.mode, "cross-section | mask | <points file>")
      ->capture_default_str();
  app->add_option("--seed-centerline", f.centerline, "centerline for cross-section seeding");
  app->add_option("--seed-position", f.seeds.position, "relative arc position of the seed plane")
      ->capture_default_str();
  app->add_option("--seed-depth", f.seeds.depth, "minimum seed depth below the mask surface, mm")
      ->capture_default_str();
}

void finish_track_flags(TrackFlags& f) {
  f.params.min_len = f.min_len;
  if (!f.centerline.empty())
    f.seeds.centerline = f.centerline;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<std::string> command{"ftdtrack"};
  command.insert(command.end(), args.begin(), args.end());

  CLI::App app{"Fiber trajectory reconstruction with divergence-free polynomial fields",
               "ftdtrack"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // phantom
  PhantomStage ph;
  std::string spec_file, kind;
  std::optional<int> distractors;
  std::optional<double> noise_deg, radius, spacing, turns;
  auto* c_ph = app.add_subcommand("phantom", "generate a synthetic bundle");
  c_ph->add_option("--spec", spec_file, "phantom spec file (key: value lines)");
  c_ph->add_option("--kind", kind, "straight-tube | quarter-torus | helix | fanning");
  c_ph->add_option("--distractors", distractors, "orthogonal distractor peaks per voxel");
  c_ph->add_option("--noise-deg", noise_deg, "angular jitter of the true peaks, degrees");
  c_ph->add_option("--radius", radius, "tube radius, mm");
  c_ph->add_option("--spacing", spacing, "voxel size, mm");
  c_ph->add_option("--turns", turns, "helix turns");
  c_ph->add_option("--rng-seed", ph.rng_seed, "random seed")->capture_default_str();
  c_ph->add_option("--step", ph.reference_step, "reference tract step, mm")->capture_default_str();
  c_ph->add_option("--out", ph.out, "output directory")->required();

  // centerline
  CenterlineStage cs;
  std::string descriptor;
  std::vector<double> p1, p2;
  auto* c_cl = app.add_subcommand("centerline", "extract the minimal-energy centerline");
  c_cl->add_option("--mask", cs.mask, "bundle mask")->required();
  c_cl->add_option("--descriptor", descriptor, "phantom descriptor giving the endpoints");
  c_cl->add_option("--p1", p1, "first endpoint x y z")->expected(3);
  c_cl->add_option("--p2", p2, "second endpoint x y z")->expected(3);
  c_cl->add_option("--resample", cs.options.resample_step, "resampling step, mm")
      ->capture_default_str();
  c_cl->add_option("--smoothing", cs.options.smoothing_passes, "moving-average passes")
      ->capture_default_str();
  c_cl->add_option("--out", cs.out, "centerline file")->required();

  // prior
  PriorStage pr;
  auto* c_pr = app.add_subcommand("prior", "select the anatomical orientation prior");
  c_pr->add_option("--peaks", pr.peaks, "peaks file")->required();
  c_pr->add_option("--mask", pr.mask, "bundle mask")->required();
  c_pr->add_option("--centerline", pr.centerline, "centerline file")->required();
  c_pr->add_option("--cutoff", pr.options.min_amp, "minimum peak amplitude")
      ->capture_default_str();
  c_pr->add_flag("--centerline-only", pr.options.centerline_only,
                 "keep only voxels on the centerline");
  c_pr->add_option("--out", pr.out, "prior file (peaks format, K = 1)")->required();

  // fit
  FitStage fi;
  auto* c_fi = app.add_subcommand("fit", "fit the divergence-free polynomial field");
  c_fi->add_option("--prior", fi.prior, "prior file")->required();
  c_fi->add_option("--mask", fi.mask, "bundle mask")->required();
  c_fi->add_option("--order", fi.order, "polynomial order N")->capture_default_str();
  c_fi->add_option("--ridge", fi.ridge, "ridge weight (default 1e-8 * samples)");
  c_fi->add_option("--out", fi.out, "field file")->required();
  // accepted for symmetry with the tracking flags
  double fit_step = kDefaultStep;
  c_fi->add_option("--step", fit_step, "ignored by fit")->capture_default_str();

  // track
  TrackStage tr;
  TrackFlags tr_flags;
  auto* c_tr = app.add_subcommand("track", "integrate streamlines through the fitted field");
  c_tr->add_option("--field", tr.field, "field file")->required();
  c_tr->add_option("--mask", tr.mask, "bundle mask")->required();
  add_track_flags(c_tr, tr_flags);
  c_tr->add_option("--out", tr.out, "tract file")->required();

  // baseline
  BaselineStage bl;
  TrackFlags bl_flags;
  auto* c_bl = app.add_subcommand("baseline", "deterministic peak-following tracker");
  c_bl->add_option("--peaks", bl.peaks, "peaks file")->required();
  c_bl->add_option("--mask", bl.mask, "bundle mask")->required();
  c_bl->add_option("--angle-max", bl.angle_max, "turning-angle stop, degrees")
      ->capture_default_str();
  c_bl->add_option("--cutoff", bl.cutoff, "minimum peak amplitude")->capture_default_str();
  add_track_flags(c_bl, bl_flags);
  c_bl->add_option("--out", bl.out, "tract file")->required();

  // metrics
  MetricsStage me;
  std::string me_reference, me_axis, me_out;
  auto* c_me = app.add_subcommand("metrics", "overlap, Hausdorff and completion");
  c_me->add_option("--tract", me.tract, "tract file")->required();
  c_me->add_option("--mask", me.mask, "reference mask (grid and overlap target)")->required();
  c_me->add_option("--reference", me_reference, "reference tract for HD/AHD");
  c_me->add_option("--axis", me_axis, "axis centerline for completion");
  c_me->add_option("--tolerance", me.tolerance, "completion tolerance, mm");
  c_me->add_option("--out", me_out, "record file");

  // pipeline
  fs::path pl_out;
  std::string pl_spec;
  int pl_order = kDefaultOrder;
  double pl_cutoff = kDefaultCutoff, pl_angle = kDefaultAngleMax;
  bool pl_centerline_only = false;
  std::optional<double> pl_ridge;
  TrackFlags pl_flags;
  std::uint64_t pl_phantom_seed = 0;
  auto* c_pl = app.add_subcommand("pipeline", "phantom, centerline, prior, fit, track, metrics");
  c_pl->add_option("--spec", pl_spec, "phantom spec file")->required();
  c_pl->add_option("--out", pl_out, "output directory")->required();
  c_pl->add_option("--phantom-seed", pl_phantom_seed, "phantom random seed")
      ->capture_default_str();
  c_pl->add_option("--order", pl_order, "polynomial order N")->capture_default_str();
  c_pl->add_option("--ridge", pl_ridge, "ridge weight (default 1e-8 * samples)");
  c_pl->add_option("--cutoff", pl_cutoff, "minimum peak amplitude")->capture_default_str();
  c_pl->add_option("--angle-max", pl_angle, "baseline turning-angle stop, degrees")
      ->capture_default_str();
  c_pl->add_flag("--centerline-only", pl_centerline_only, "prior on centerline voxels only");
  add_track_flags(c_pl, pl_flags);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return ExitCode::ok;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return ExitCode::ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return ExitCode::usage;
  }

  try {
    if (c_ph->parsed()) {
      if (!spec_file.empty())
        ph.spec = load_phantom_spec(spec_file);
      if (!kind.empty())
        ph.spec.kind = phantom_kind_from_string(kind);
      if (distractors)
        ph.spec.distractors = *distractors;
      if (noise_deg)
        ph.spec.noise_deg = *noise_deg;
      if (radius)
        ph.spec.radius = *radius;
      if (spacing)
        ph.spec.spacing = *spacing;
      if (turns)
        ph.spec.turns = *turns;
      run_phantom(ph, command);
      out << "phantom written to " << ph.out.string() << '\n';
    } else if (c_cl->parsed()) {
      if (!descriptor.empty())
        cs.descriptor = descriptor;
      if (!p1.empty())
        cs.p1 = to_vec3(p1);
      if (!p2.empty())
        cs.p2 = to_vec3(p2);
      run_centerline(cs, command);
    } else if (c_pr->parsed()) {
      run_prior(pr, command);
    } else if (c_fi->parsed()) {
      run_fit(fi, command);
    } else if (c_tr->parsed()) {
      finish_track_flags(tr_flags);
      tr.params = tr_flags.params;
      tr.seeds = tr_flags.seeds;
      run_track(tr, command);
    } else if (c_bl->parsed()) {
      finish_track_flags(bl_flags);
      bl.params = bl_flags.params;
      bl.seeds = bl_flags.seeds;
      run_baseline(bl, command);
    } else if (c_me->parsed()) {
      if (!me_reference.empty())
        me.reference = me_reference;
      if (!me_axis.empty())
        me.axis = me_axis;
      if (!me_out.empty())
        me.out = me_out;
      const MetricsRecord r = run_metrics(me, command);
      out << r.line() << '\n';
      print_table(out, r);
    } else if (c_pl->parsed()) {
      finish_track_flags(pl_flags);
      const PhantomSpec spec = load_phantom_spec(pl_spec);
      const fs::path d = pl_out;

      run_phantom({spec, pl_phantom_seed, pl_flags.params.step, d}, command);

      CenterlineStage c;
      c.mask = d / "mask.rvf";
      c.descriptor = d / "descriptor.txt";
      c.out = d / "centerline.trk";
      run_centerline(c, command);

      PriorStage p{d / "peaks.rvf", d / "mask.rvf", d / "centerline.trk",
                   {pl_cutoff, pl_centerline_only}, d / "prior.rvf"};
      run_prior(p, command);

      run_fit({d / "prior.rvf", d / "mask.rvf", pl_order, pl_ridge, d / "field.ftd"}, command);

      SeedOptions seeds = pl_flags.seeds;
      if (seeds.mode == "cross-section" && !seeds.centerline)
        seeds.centerline = d / "centerline.trk";
      run_track({d / "field.ftd", d / "mask.rvf", seeds, pl_flags.params, d / "tract.trk"},
                command);
      run_baseline({d / "peaks.rvf", d / "mask.rvf", seeds, pl_flags.params, pl_angle, pl_cutoff,
                    d / "baseline.trk"},
                   command);

      const double tol = spec.radius + spec.spacing;
      const MetricsRecord r = run_metrics(
          {d / "tract.trk", d / "mask.rvf", d / "reference.trk", d / "axis.trk", tol,
           d / "metrics.txt"},
          command);
      const MetricsRecord b = run_metrics(
          {d / "baseline.trk", d / "mask.rvf", d / "reference.trk", d / "axis.trk", tol,
           d / "baseline_metrics.txt"},
          command);

      json params{{"spec", format_phantom_spec(spec)},
                  {"phantom_seed", pl_phantom_seed},
                  {"order", pl_order},
                  {"cutoff", pl_cutoff},
                  {"angle_max", pl_angle},
                  {"centerline_only", pl_centerline_only},
                  {"track", to_json(pl_flags.params)},
                  {"seeds", to_json(seeds)},
                  {"completion_tolerance", tol}};
      if (pl_ridge)
        params["ridge"] = *pl_ridge;
      json outputs;
      for (const char* f : {"mask.rvf", "peaks.rvf", "axis.trk", "descriptor.txt", "reference.trk",
                            "centerline.trk", "prior.rvf", "field.ftd", "tract.trk",
                            "baseline.trk", "metrics.txt", "baseline_metrics.txt"})
        outputs[f] = (d / f).string();
      write_manifest(d / "manifest.json", "pipeline", command, params, {{"spec", pl_spec}},
                     outputs);
      out << "ftd      " << r.line() << '\n';
      print_table(out, r);
      out << "baseline " << b.line() << '\n';
      print_table(out, b);
    }
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return ExitCode::numerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return ExitCode::data;
  }
  return ExitCode::ok;
}

} // namespace ftd::cli
