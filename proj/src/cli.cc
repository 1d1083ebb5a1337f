#include "surfmatch/cli.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "surfmatch/geometry.h"
#include "surfmatch/io.h"
#include "surfmatch/metrics.h"
#include "surfmatch/raster.h"
#include "surfmatch/registration.h"
#include "surfmatch/surface.h"
#include "surfmatch/synth.h"

namespace surfmatch {
namespace cli {

namespace {

namespace fs = std::filesystem;

std::string OneLine(std::string text) {
  std::replace(text.begin(), text.end(), '\n', ' ');
  while (!text.empty() && text.back() == ' ') text.pop_back();
  return text;
}

void Diagnose(std::ostream& err, const std::string& code,
              const std::string& message) {
  err << "error code=" << code << " msg=" << OneLine(message) << '\n';
}

std::ofstream OpenOutput(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::kInvalidArgument,
                "cannot open output file " + path.string());
  }
  return out;
}

struct RasterizeArgs {
  std::string input;
  double gsd = kDefaultGsd;
  std::vector<double> extent;
  std::string output;
};

struct RegisterArgs {
  std::string search;
  std::string reference;
  double k = 5.0;
  bool estimate_scale = false;
  int max_iter = 50;
  double max_dist = kDefaultMaxDistance;
  std::string output;
  std::string log;
};

struct EvaluateArgs {
  std::string search;
  std::string reference;
  std::string transform;
  bool identity = false;
  double k = 100.0;
  double k_step1 = 5.0;
  double max_dist = kDefaultMaxDistance;
  std::string scenarios;
  bool mask_reference = false;
  std::string output_dir;
  double hist_width = kDefaultHistogramWidth;
  double hist_min = kDefaultHistogramLow;
  double hist_max = kDefaultHistogramHigh;
};

struct SynthArgs {
  std::string kind = "buildings";
  double extent_x = 100.0;
  double extent_y = 100.0;
  double gsd = 0.5;
  double amplitude = 6.0;
  std::uint64_t seed = 1;
  double tx = 0.0, ty = 0.0, tz = 0.0;
  double omega = 0.0, phi = 0.0, kappa = 0.0;
  double scale = 1.0;
  double noise = 0.0;
  double blunder_fraction = 0.0;
  double blunder_magnitude = 5.0;
  std::string reference;
  std::string search;
  std::string labels;
};

struct MaskArgs {
  std::string input;
  std::string polygons;
  std::string mode = "keep-inside";
  std::string output;
};

int CmdRasterize(const RasterizeArgs& a, int threads, std::ostream& out) {
  const PointCloud cloud = ReadCloud(fs::path(a.input));
  GridSpec spec;
  if (a.extent.empty()) {
    if (cloud.empty()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "--input has no points and no --extent was given");
    }
    spec = GridSpec::Covering(cloud, a.gsd);
  } else {
    if (!(a.extent[2] > a.extent[0]) || !(a.extent[3] > a.extent[1])) {
      throw Error(ErrorCode::kInvalidArgument,
                  "--extent must be xmin ymin xmax ymax with xmax > xmin "
                  "and ymax > ymin");
    }
    spec = GridSpec::FromExtent(a.extent[0], a.extent[1], a.extent[2],
                                a.extent[3], a.gsd);
  }
  const RasterGrid grid = Rasterize(cloud, spec, threads);
  WriteRasterGrid(fs::path(a.output), grid);
  out << "ncols=" << spec.ncols << " nrows=" << spec.nrows
      << " cells=" << spec.num_cells()
      << " occupied=" << grid.occupied_count()
      << " nodata=" << grid.nodata_count()
      << " outside=" << grid.outside_count() << '\n';
  return kExitOk;
}

SpatialIndex LoadReference(const std::string& path,
                           const std::vector<Polygon>* mask = nullptr,
                           MaskMode mode = MaskMode::kKeepInside) {
  RasterGrid grid = ReadRasterGrid(fs::path(path));
  if (mask != nullptr) {
    std::vector<CellEntry> kept;
    for (const CellEntry& e : grid.entries()) {
      bool inside = false;
      for (const Polygon& p : *mask) {
        if (PointInPolygon(p, e.point.x(), e.point.y())) {
          inside = true;
          break;
        }
      }
      if (inside == (mode == MaskMode::kKeepInside)) kept.push_back(e);
    }
    grid = RasterGrid(grid.spec(), std::move(kept), grid.outside_count());
  }
  return BuildIndex(MeshFromGrid(grid));
}

int CmdRegister(const RegisterArgs& a, int threads, std::ostream& out,
                std::ostream& err) {
  const PointCloud cloud = ReadCloud(fs::path(a.search));
  const SpatialIndex index = LoadReference(a.reference);
  RegistrationConfig config;
  config.k_blunder = a.k;
  config.estimate_scale = a.estimate_scale;
  config.max_iterations = a.max_iter;
  config.max_dist = a.max_dist;
  config.num_threads = threads;
  const RegistrationResult result = Register(cloud, index, config);

  {
    auto file = OpenOutput(fs::path(a.output));
    WriteTransform(file, {result.transform, result.sigma0},
                   {{"iterations", std::to_string(result.iterations)},
                    {"converged", result.converged ? "true" : "false"},
                    {"used", std::to_string(result.used_count)},
                    {"blunder", std::to_string(result.blunder_count)},
                    {"invalid", std::to_string(result.invalid_count)}});
  }
  if (!a.log.empty()) {
    auto file = OpenOutput(fs::path(a.log));
    WriteIterationLog(file, result.log);
  }
  out << "iterations=" << result.iterations
      << " converged=" << (result.converged ? "true" : "false")
      << " sigma0=" << FormatFixed(result.sigma0, 6)
      << " used=" << result.used_count
      << " blunder=" << result.blunder_count
      << " invalid=" << result.invalid_count << '\n';
  if (!result.converged) {
    Diagnose(err, "NOT_CONVERGED",
             "no convergence after " + std::to_string(result.iterations) +
                 " iterations");
    return kExitNotConverged;
  }
  return kExitOk;
}

int CmdEvaluate(const EvaluateArgs& a, int threads, std::ostream& out) {
  if (a.identity == !a.transform.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "exactly one of --transform and --identity is required");
  }
  TransformRecord record;
  if (!a.identity) record = ReadTransform(fs::path(a.transform));
  const PointCloud cloud = ReadCloud(fs::path(a.search));
  const RasterGrid reference_grid = ReadRasterGrid(fs::path(a.reference));
  const GridSpec& error_spec = reference_grid.spec();

  struct Scenario {
    std::string name;
    MaskMode mode = MaskMode::kKeepInside;
    std::optional<std::vector<Polygon>> polygons;
  };
  std::vector<Scenario> scenarios{{"whole", MaskMode::kKeepInside, {}}};
  if (!a.scenarios.empty()) {
    for (const ScenarioEntry& e : ReadScenarioManifest(a.scenarios)) {
      if (e.name == "whole" ||
          std::any_of(scenarios.begin(), scenarios.end(),
                      [&](const Scenario& s) { return s.name == e.name; })) {
        throw Error(ErrorCode::kParseError,
                    "duplicate scenario name '" + e.name + "'");
      }
      scenarios.push_back({e.name, e.mode, ReadPolygons(e.polygons)});
    }
  }

  const fs::path dir(a.output_dir);
  fs::create_directories(dir);
  const SpatialIndex whole_index = BuildIndex(MeshFromGrid(reference_grid));
  std::vector<EvaluationReport> reports;
  for (const Scenario& s : scenarios) {
    PointCloud search = cloud;
    std::optional<SpatialIndex> masked_index;
    if (s.polygons) {
      search = ApplyMask(cloud, *s.polygons, s.mode);
      if (a.mask_reference) {
        masked_index = LoadReference(a.reference, &*s.polygons, s.mode);
      }
    }
    const SpatialIndex& index = masked_index ? *masked_index : whole_index;
    const FixedEvaluation eval = EvaluateFixed(
        search, record.transform, index, a.k, a.max_dist, threads);
    SummaryOptions options;
    options.scenario = s.name;
    options.k_step1 = a.k_step1;
    options.sigma0 = record.sigma0;
    reports.push_back(Summarize(eval.correspondences, options));

    const std::vector<double> residuals = ValidResiduals(eval.correspondences);
    const Histogram hist =
        MakeHistogram(residuals, a.hist_width, a.hist_min, a.hist_max);
    {
      auto file = OpenOutput(dir / (s.name + ".report.txt"));
      WriteReport(file, reports.back());
    }
    {
      auto file = OpenOutput(dir / (s.name + ".hist.tsv"));
      WriteHistogram(file, hist);
    }
    const AsciiGrid errors =
        ToAsciiGrid(MakeErrorGrid(eval.correspondences, error_spec));
    WriteAsciiGrid(dir / (s.name + ".errors.asc"), errors.spec,
                   errors.values);
  }
  {
    auto file = OpenOutput(dir / "summary.tsv");
    WriteReportTable(file, reports);
  }
  {
    auto file = OpenOutput(dir / "report.txt");
    for (std::size_t i = 0; i < reports.size(); ++i) {
      if (i > 0) file << '\n';
      WriteReport(file, reports[i]);
    }
  }
  for (const EvaluationReport& r : reports) {
    out << "scenario=" << r.scenario
        << " matching=" << FormatFixed(r.matching_percentage, 2)
        << " completeness=" << FormatFixed(r.completeness, 2)
        << " rmse=" << FormatFixed(r.rmse, 4) << '\n';
  }
  return kExitOk;
}

SceneKind ParseKind(const std::string& kind) {
  if (kind == "plane") return SceneKind::kPlane;
  if (kind == "terrain") return SceneKind::kRidgedTerrain;
  if (kind == "buildings") return SceneKind::kBuildingBlocks;
  throw Error(ErrorCode::kInvalidArgument,
              "--kind must be plane, terrain or buildings");
}

int CmdSynth(const SynthArgs& a, std::ostream& out) {
  SceneSpec scene_spec;
  scene_spec.kind = ParseKind(a.kind);
  scene_spec.extent_x = a.extent_x;
  scene_spec.extent_y = a.extent_y;
  scene_spec.gsd = a.gsd;
  scene_spec.amplitude = a.amplitude;
  scene_spec.seed = a.seed;
  const Scene scene = MakeScene(scene_spec);

  PerturbationSpec perturb;
  perturb.transform = SimilarityTransform(Vec3(a.tx, a.ty, a.tz), a.omega,
                                          a.phi, a.kappa, a.scale);
  perturb.noise_sigma = a.noise;
  perturb.blunder_fraction = a.blunder_fraction;
  perturb.blunder_magnitude = a.blunder_magnitude;
  perturb.seed = a.seed;
  const PerturbedCloud search = Perturb(scene.samples, perturb);

  WriteRasterGrid(fs::path(a.reference), scene.grid);
  WriteCloud(fs::path(a.search), search.cloud);
  if (!a.labels.empty()) {
    auto file = OpenOutput(fs::path(a.labels));
    WriteLabels(file, search.is_blunder);
  }
  const auto blunders = static_cast<std::size_t>(
      std::count(search.is_blunder.begin(), search.is_blunder.end(), true));
  out << "points=" << search.cloud.size() << " blunders=" << blunders
      << " triangles=" << scene.mesh.triangles().size() << '\n';
  return kExitOk;
}

int CmdMask(const MaskArgs& a, std::ostream& out) {
  const MaskMode mode = ParseMaskMode(a.mode);
  const PointCloud cloud = ReadCloud(fs::path(a.input));
  const std::vector<Polygon> polygons = ReadPolygons(fs::path(a.polygons));
  const PointCloud kept = ApplyMask(cloud, polygons, mode);
  WriteCloud(fs::path(a.output), kept);
  out << "input=" << cloud.size() << " kept=" << kept.size() << '\n';
  return kExitOk;
}

}  // namespace

int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParseError:
      return kExitParseError;
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kInvalidPolygon:
      return kExitInvalidArgument;
    case ErrorCode::kRankDeficient:
      return kExitRankDeficient;
    case ErrorCode::kNoCorrespondences:
      return kExitNoCorrespondences;
    case ErrorCode::kDegenerateGrid:
      return kExitDegenerateGrid;
  }
  return kExitInvalidArgument;
}

int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Surface-based co-registration and accuracy assessment of "
               "photogrammetric point clouds.",
               "surfmatch"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  int threads = 0;
  app.add_option("--threads", threads,
                 "Worker threads, 0 = all cores; output does not depend on it")
      ->check(CLI::NonNegativeNumber);

  RasterizeArgs ra;
  auto* rasterize =
      app.add_subcommand("rasterize", "Z-buffer a point cloud into a grid");
  rasterize->add_option("--input", ra.input, "Point cloud (x y z lines)")
      ->required();
  rasterize->add_option("--gsd", ra.gsd, "Cell size in meters")
      ->check(CLI::PositiveNumber);
  rasterize->add_option("--extent", ra.extent, "xmin ymin xmax ymax")
      ->expected(4);
  rasterize->add_option("--output", ra.output, "Output ASCII grid")
      ->required();

  RegisterArgs rg;
  auto* reg = app.add_subcommand(
      "register", "Estimate the transform aligning a cloud to a grid surface");
  reg->add_option("--search", rg.search, "Cloud to be aligned")->required();
  reg->add_option("--reference", rg.reference, "Reference grid")->required();
  reg->add_option("--k", rg.k, "Blunder threshold in units of delta")
      ->check(CLI::PositiveNumber);
  auto* est = reg->add_flag("--estimate-scale", rg.estimate_scale,
                            "Estimate the scale factor");
  reg->add_flag("--fix-scale{false}", rg.estimate_scale,
                "Keep the scale at 1 (default)")
      ->excludes(est);
  reg->add_option("--max-iter", rg.max_iter, "Maximum parameter updates")
      ->check(CLI::PositiveNumber);
  reg->add_option("--max-dist", rg.max_dist, "Correspondence search radius")
      ->check(CLI::PositiveNumber);
  reg->add_option("--output", rg.output, "Transform file")->required();
  reg->add_option("--log", rg.log, "Iteration log (TSV)");

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand(
      "evaluate", "Compute accuracy statistics with the transform held fixed");
  evaluate->add_option("--search", ev.search, "Cloud to evaluate")
      ->required();
  evaluate->add_option("--reference", ev.reference, "Reference grid")
      ->required();
  auto* tf =
      evaluate->add_option("--transform", ev.transform, "Transform file");
  evaluate->add_flag("--identity", ev.identity, "Use the identity transform")
      ->excludes(tf);
  evaluate->add_option("--k", ev.k, "Blunder threshold of the evaluation")
      ->check(CLI::PositiveNumber);
  evaluate->add_option("--k-step1", ev.k_step1,
                       "Threshold defining blunder-free matches")
      ->check(CLI::PositiveNumber);
  evaluate->add_option("--max-dist", ev.max_dist, "Search radius")
      ->check(CLI::PositiveNumber);
  evaluate->add_option("--scenarios", ev.scenarios,
                       "Manifest of masked scenarios");
  evaluate->add_flag("--mask-reference", ev.mask_reference,
                     "Apply scenario masks to the reference as well");
  evaluate->add_option("--output-dir", ev.output_dir, "Output directory")
      ->required();
  evaluate->add_option("--hist-width", ev.hist_width, "Histogram bin width")
      ->check(CLI::PositiveNumber);
  evaluate->add_option("--hist-min", ev.hist_min, "Histogram lower bound");
  evaluate->add_option("--hist-max", ev.hist_max, "Histogram upper bound");

  SynthArgs sy;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic scene");
  synth->add_option("--kind", sy.kind, "plane, terrain or buildings")
      ->check(CLI::IsMember({"plane", "terrain", "buildings"}));
  synth->add_option("--extent-x", sy.extent_x, "Scene width (m)")
      ->check(CLI::PositiveNumber);
  synth->add_option("--extent-y", sy.extent_y, "Scene height (m)")
      ->check(CLI::PositiveNumber);
  synth->add_option("--gsd", sy.gsd, "Sample spacing (m)")
      ->check(CLI::PositiveNumber);
  synth->add_option("--amplitude", sy.amplitude, "Relief amplitude (m)")
      ->check(CLI::NonNegativeNumber);
  synth->add_option("--seed", sy.seed, "Random seed");
  synth->add_option("--tx", sy.tx, "Injected translation x (m)");
  synth->add_option("--ty", sy.ty, "Injected translation y (m)");
  synth->add_option("--tz", sy.tz, "Injected translation z (m)");
  synth->add_option("--omega", sy.omega, "Injected rotation about x (rad)");
  synth->add_option("--phi", sy.phi, "Injected rotation about y (rad)");
  synth->add_option("--kappa", sy.kappa, "Injected rotation about z (rad)");
  synth->add_option("--scale", sy.scale, "Injected scale")
      ->check(CLI::PositiveNumber);
  synth->add_option("--noise", sy.noise, "Gaussian noise sigma (m)")
      ->check(CLI::NonNegativeNumber);
  synth->add_option("--blunder-fraction", sy.blunder_fraction,
                    "Share of points shifted in z")
      ->check(CLI::Range(0.0, 1.0));
  synth->add_option("--blunder-magnitude", sy.blunder_magnitude,
                    "Largest blunder shift (m)")
      ->check(CLI::NonNegativeNumber);
  synth->add_option("--reference", sy.reference, "Reference grid output")
      ->required();
  synth->add_option("--search", sy.search, "Perturbed cloud output")
      ->required();
  synth->add_option("--labels", sy.labels, "Per-point clean/blunder labels");

  MaskArgs ma;
  auto* mask = app.add_subcommand("mask", "Clip a point cloud by polygons");
  mask->add_option("--input", ma.input, "Point cloud")->required();
  mask->add_option("--polygons", ma.polygons, "Polygon file")->required();
  mask->add_option("--mode", ma.mode, "keep-inside or keep-outside")
      ->check(CLI::IsMember({"keep-inside", "keep-outside"}));
  mask->add_option("--output", ma.output, "Output cloud")->required();

  std::vector<const char*> argv{"surfmatch"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    Diagnose(err, "INVALID_ARGUMENT", e.what());
    return kExitInvalidArgument;
  }

  try {
    if (*rasterize) return CmdRasterize(ra, threads, out);
    if (*reg) return CmdRegister(rg, threads, out, err);
    if (*evaluate) return CmdEvaluate(ev, threads, out);
    if (*synth) return CmdSynth(sy, out);
    if (*mask) return CmdMask(ma, out);
  } catch (const Error& e) {
    Diagnose(err, std::string(ToString(e.code())), e.what());
    return ExitCodeFor(e.code());
  } catch (const std::exception& e) {
    Diagnose(err, "INTERNAL", e.what());
    return 1;
  }
  return kExitInvalidArgument;
}

}  // namespace cli
}  // namespace surfmatch
