#ifndef SURFMATCH_IO_H_
#define SURFMATCH_IO_H_

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "surfmatch/geometry.h"
#include "surfmatch/metrics.h"
#include "surfmatch/raster.h"
#include "surfmatch/registration.h"

namespace surfmatch {

inline constexpr double kNoDataValue = -9999.0;

// Clouds: one "x y z" line per point, '#' starts a comment. Written in
// shortest round-trip fixed notation so a write/read cycle is lossless.
PointCloud ReadCloud(std::istream& in);
PointCloud ReadCloud(const std::filesystem::path& path);
void WriteCloud(std::ostream& out, const PointCloud& cloud);
void WriteCloud(const std::filesystem::path& path, const PointCloud& cloud);

// ESRI ASCII grid. Values are held south row first (the library's row
// order) and written north row first, as the format requires, with six
// decimals.
struct AsciiGrid {
  GridSpec spec;
  std::vector<std::optional<double>> values;
};

AsciiGrid ReadAsciiGrid(std::istream& in);
AsciiGrid ReadAsciiGrid(const std::filesystem::path& path);
void WriteAsciiGrid(std::ostream& out, const GridSpec& spec,
                    const std::vector<std::optional<double>>& values);
void WriteAsciiGrid(const std::filesystem::path& path, const GridSpec& spec,
                    const std::vector<std::optional<double>>& values);

// "<grid>.points.xyz": the original point of every occupied cell, in the
// library's row-major order.
std::filesystem::path SidecarPath(const std::filesystem::path& grid_path);

// Writes the Z grid and its original-coordinate sidecar.
void WriteRasterGrid(const std::filesystem::path& grid_path,
                     const RasterGrid& grid);
// Pairs the k-th sidecar point with the k-th occupied cell of the grid.
RasterGrid ReadRasterGrid(const std::filesystem::path& grid_path);

AsciiGrid ToAsciiGrid(const RasterGrid& grid);
AsciiGrid ToAsciiGrid(const ErrorGrid& grid);

// Key-value transform file: tx, ty, tz, omega, phi, kappa, scale, sigma0 at
// twelve significant digits, followed by any extra keys.
struct TransformRecord {
  SimilarityTransform transform;
  double sigma0 = 0.0;
};

void WriteTransform(std::ostream& out, const TransformRecord& record,
                    const std::vector<std::pair<std::string, std::string>>&
                        extras = {});
TransformRecord ReadTransform(std::istream& in);
TransformRecord ReadTransform(const std::filesystem::path& path);

// One polygon per line: "x1 y1 x2 y2 ...", implicitly closed.
std::vector<Polygon> ReadPolygons(std::istream& in);
std::vector<Polygon> ReadPolygons(const std::filesystem::path& path);

// Scenario manifest: "name keep-inside|keep-outside polygon_file" per line;
// relative polygon paths resolve against the manifest's directory.
struct ScenarioEntry {
  std::string name;
  MaskMode mode = MaskMode::kKeepInside;
  std::filesystem::path polygons;
};

std::vector<ScenarioEntry> ReadScenarioManifest(
    const std::filesystem::path& path);

MaskMode ParseMaskMode(const std::string& text);

void WriteReport(std::ostream& out, const EvaluationReport& report);
// Rows follow the accuracy table layout (Matching percentage through
// Maximum), one column per scenario, then the 3-STD blunder block.
void WriteReportTable(std::ostream& out,
                      const std::vector<EvaluationReport>& reports);
// "bin_center<TAB>count" lines; under/overflow as comments.
void WriteHistogram(std::ostream& out, const Histogram& histogram);
void WriteIterationLog(std::ostream& out, const std::vector<IterationLog>& log);
// "clean" or "blunder" per point.
void WriteLabels(std::ostream& out, const std::vector<bool>& is_blunder);

// Fixed notation with `decimals` places.
std::string FormatFixed(double value, int decimals);

}  // namespace surfmatch

#endif  // SURFMATCH_IO_H_
