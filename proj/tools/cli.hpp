#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ftd/phantom.hpp"
#include "ftd/poly_field.hpp"
#include "ftd/prior.hpp"
#include "ftd/tracker.hpp"

namespace ftd::cli {

namespace fs = std::filesystem;

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { ok = 0, usage = 1, data = 2, numerical = 3 };

// Each stage reads its inputs from files and writes its outputs plus a JSON
// manifest, so `pipeline` and hand-run subcommands produce the same bytes.

struct PhantomStage {
  PhantomSpec spec;
  std::uint64_t rng_seed = 0;
  double reference_step = kDefaultStep;
  fs::path out; // directory
};

struct CenterlineStage {
  fs::path mask;
  std::optional<fs::path> descriptor; // endpoints from the phantom axis
  std::optional<Vec3> p1, p2;
  CenterlineOptions options;
  fs::path out;
};

struct PriorStage {
  fs::path peaks, mask, centerline;
  PriorOptions options;
  fs::path out;
};

struct FitStage {
  fs::path prior, mask;
  int order = kDefaultOrder;
  std::optional<double> ridge;
  fs::path out;
};

/// Seed selection: "cross-section" (voxels of the cross-section at relative
/// arc position `position` of `centerline`), "mask" (every foreground voxel)
/// or the path of a text file with one `x y z` point per line. Voxels closer
/// than `depth` mm to the background are dropped.
struct SeedOptions {
  std::string mode = "cross-section";
  std::optional<fs::path> centerline;
  double position = 0.5;
  double depth = 0.0;
};

struct TrackStage {
  fs::path field, mask;
  SeedOptions seeds;
  TrackParams params;
  fs::path out;
};

struct BaselineStage {
  fs::path peaks, mask;
  SeedOptions seeds;
  TrackParams params;
  double angle_max = kDefaultAngleMax;
  double cutoff = kDefaultCutoff;
  fs::path out;
};

struct MetricsRecord {
  double overlap = 0.0;
  double hd = 0.0, ahd = 0.0;
  bool has_distance = false;
  std::optional<double> completion;
  std::size_t streamlines = 0;

  std::string line() const;
};

struct MetricsStage {
  fs::path tract, mask;
  std::optional<fs::path> reference; // tract for HD/AHD
  std::optional<fs::path> axis;      // centerline for completion
  std::optional<double> tolerance;   // mm; default 2 * max spacing
  std::optional<fs::path> out;
};

void run_phantom(const PhantomStage& s, const std::vector<std::string>& command);
void run_centerline(const CenterlineStage& s, const std::vector<std::string>& command);
void run_prior(const PriorStage& s, const std::vector<std::string>& command);
void run_fit(const FitStage& s, const std::vector<std::string>& command);
void run_track(const TrackStage& s, const std::vector<std::string>& command);
void run_baseline(const BaselineStage& s, const std::vector<std::string>& command);
MetricsRecord run_metrics(const MetricsStage& s, const std::vector<std::string>& command);

std::vector<Vec3> resolve_seeds(const Mask& mask, const SeedOptions& options);
Centerline load_centerline(const fs::path& path);
void save_centerline(const fs::path& path, const Centerline& cl, double step);

/// Entry point without the program name. Returns an ExitCode.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace ftd::cli
