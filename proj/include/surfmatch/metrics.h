#ifndef SURFMATCH_METRICS_H_
#define SURFMATCH_METRICS_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "surfmatch/geometry.h"
#include "surfmatch/raster.h"
#include "surfmatch/registration.h"

namespace surfmatch {

// Accuracy statistics of one evaluation scenario. Percentages are 0..100,
// distances in meters.
struct EvaluationReport {
  std::string scenario = "whole";
  // Share of all points with a valid, blunder-free correspondence.
  double matching_percentage = 0.0;
  // Share of all points with a valid correspondence, blunders included.
  double completeness = 0.0;
  // Standard deviation of unit weight of the registration run.
  double sigma0 = 0.0;
  double rmse = 0.0;
  // Population standard deviation (divides by n).
  double std = 0.0;
  double mean = 0.0;
  double minimum = 0.0;
  double maximum = 0.0;
  std::size_t blunder_count_3std = 0;
  double blunder_percentage_3std = 0.0;
  std::size_t n_total = 0;
  std::size_t n_valid = 0;
  // USED after the evaluation pass that produced the correspondences.
  std::size_t n_used = 0;
};

struct SummaryOptions {
  std::string scenario = "whole";
  // K that defines a blunder-free correspondence for matching_percentage.
  double k_step1 = 5.0;
  double sigma0 = 0.0;
  // Statistics over USED correspondences only instead of all valid ones.
  bool exclude_blunders = false;
};

// Throws kNoCorrespondences when no correspondence is valid.
EvaluationReport Summarize(const std::vector<Correspondence>& correspondences,
                           const SummaryOptions& options = {});

std::vector<double> ValidResiduals(
    const std::vector<Correspondence>& correspondences);

struct Histogram {
  double bin_width = 0.0;
  // counts.size() + 1 ascending edges; bin i is [edge i, edge i+1).
  std::vector<double> bin_edges;
  std::vector<std::size_t> counts;
  std::size_t underflow = 0;
  std::size_t overflow = 0;

  std::size_t total() const;
  double BinCenter(std::size_t i) const {
    return 0.5 * (bin_edges[i] + bin_edges[i + 1]);
  }
};

inline constexpr double kDefaultHistogramWidth = 0.1;
inline constexpr double kDefaultHistogramLow = -2.0;
inline constexpr double kDefaultHistogramHigh = 2.0;

// Values below lo go to underflow, values >= hi to overflow. Throws
// kInvalidArgument unless bin_width > 0 and lo < hi.
Histogram MakeHistogram(std::span<const double> residuals,
                        double bin_width = kDefaultHistogramWidth,
                        double lo = kDefaultHistogramLow,
                        double hi = kDefaultHistogramHigh);

// Per-cell residual at the transformed point's position; the largest
// magnitude wins when several land in one cell. Cells without a valid
// correspondence are empty.
struct ErrorGrid {
  GridSpec spec;
  std::vector<std::optional<double>> values;

  std::size_t occupied_count() const;
};

ErrorGrid MakeErrorGrid(const std::vector<Correspondence>& correspondences,
                        const GridSpec& spec);

using Polygon = std::vector<Eigen::Vector2d>;

enum class MaskMode { kKeepInside, kKeepOutside };

// Throws kInvalidPolygon for fewer than three vertices or a self-
// intersecting outline. The closing edge is implicit.
void ValidatePolygon(const Polygon& polygon);

// Even-odd rule; points on an edge or vertex count as inside.
bool PointInPolygon(const Polygon& polygon, double x, double y);

// A point is inside when it is inside any of the polygons. Order is
// preserved.
PointCloud ApplyMask(const PointCloud& cloud,
                     const std::vector<Polygon>& polygons, MaskMode mode);

}  // namespace surfmatch

#endif  // SURFMATCH_METRICS_H_
