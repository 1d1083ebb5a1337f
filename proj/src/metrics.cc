#include "surfmatch/metrics.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "surfmatch/error.h"

namespace surfmatch {

namespace {

// Neumaier-compensated running sum; sequential, so deterministic.
class CompensatedSum {
 public:
  void Add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      c_ += (sum_ - t) + x;
    } else {
      c_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + c_; }

 private:
  double sum_ = 0.0;
  double c_ = 0.0;
};

struct Moments {
  double mean = 0.0;
  double rmse = 0.0;
  // Population convention.
  double std = 0.0;
};

Moments ComputeMoments(const std::vector<double>& values) {
  const double n = static_cast<double>(values.size());
  CompensatedSum sum, sum_sq;
  for (const double r : values) {
    sum.Add(r);
    sum_sq.Add(r * r);
  }
  Moments m;
  m.mean = sum.value() / n;
  m.rmse = std::sqrt(sum_sq.value() / n);
  CompensatedSum centered;
  for (const double r : values) centered.Add((r - m.mean) * (r - m.mean));
  m.std = std::sqrt(centered.value() / n);
  return m;
}

double Cross(const Eigen::Vector2d& o, const Eigen::Vector2d& a,
             const Eigen::Vector2d& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

bool OnSegment(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
               const Eigen::Vector2d& p) {
  return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) &&
         std::min(a.y(), b.y()) <= p.y() && p.y() <= std::max(a.y(), b.y());
}

bool SegmentsIntersect(const Eigen::Vector2d& p1, const Eigen::Vector2d& p2,
                       const Eigen::Vector2d& q1, const Eigen::Vector2d& q2) {
  const double d1 = Cross(q1, q2, p1);
  const double d2 = Cross(q1, q2, p2);
  const double d3 = Cross(p1, p2, q1);
  const double d4 = Cross(p1, p2, q2);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
      ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
    return true;
  }
  return (d1 == 0 && OnSegment(q1, q2, p1)) ||
         (d2 == 0 && OnSegment(q1, q2, p2)) ||
         (d3 == 0 && OnSegment(p1, p2, q1)) ||
         (d4 == 0 && OnSegment(p1, p2, q2));
}

constexpr double kEdgeTolerance = 1e-9;

}  // namespace

std::vector<double> ValidResiduals(
    const std::vector<Correspondence>& correspondences) {
  std::vector<double> out;
  out.reserve(correspondences.size());
  for (const Correspondence& c : correspondences) {
    if (c.valid()) out.push_back(c.residual);
  }
  return out;
}

EvaluationReport Summarize(const std::vector<Correspondence>& correspondences,
                           const SummaryOptions& options) {
  EvaluationReport report;
  report.scenario = options.scenario;
  report.sigma0 = options.sigma0;
  report.n_total = correspondences.size();

  std::vector<double> valid;
  std::vector<double> stats;
  for (const Correspondence& c : correspondences) {
    if (!c.valid()) continue;
    valid.push_back(c.residual);
    report.n_used += c.status == CorrespondenceStatus::kUsed;
    if (!options.exclude_blunders ||
        c.status == CorrespondenceStatus::kUsed) {
      stats.push_back(c.residual);
    }
  }
  report.n_valid = valid.size();
  if (valid.empty() || stats.empty()) {
    throw Error(ErrorCode::kNoCorrespondences,
                "no valid correspondences in scenario '" + options.scenario +
                    "'");
  }

  // Blunder-free means within k_step1 standard deviations of all valid
  // residuals.
  const double valid_threshold = options.k_step1 * ComputeMoments(valid).std;
  const auto blunder_free = static_cast<std::size_t>(
      std::count_if(valid.begin(), valid.end(), [&](double r) {
        return std::abs(r) <= valid_threshold;
      }));
  const double total = static_cast<double>(report.n_total);
  report.completeness = 100.0 * static_cast<double>(report.n_valid) / total;
  report.matching_percentage =
      100.0 * static_cast<double>(blunder_free) / total;

  const Moments m = ComputeMoments(stats);
  report.mean = m.mean;
  report.rmse = m.rmse;
  report.std = m.std;
  report.minimum = *std::min_element(stats.begin(), stats.end());
  report.maximum = *std::max_element(stats.begin(), stats.end());

  const double threshold = 3.0 * report.std;
  for (const double r : stats) {
    report.blunder_count_3std += std::abs(r) > threshold;
  }
  report.blunder_percentage_3std =
      100.0 * static_cast<double>(report.blunder_count_3std) /
      static_cast<double>(report.n_valid);
  return report;
}

std::size_t Histogram::total() const {
  std::size_t sum = underflow + overflow;
  for (const std::size_t c : counts) sum += c;
  return sum;
}

Histogram MakeHistogram(std::span<const double> residuals, double bin_width,
                        double lo, double hi) {
  if (!(bin_width > 0.0) || !(lo < hi)) {
    throw Error(ErrorCode::kInvalidArgument,
                "histogram needs bin_width > 0 and lo < hi");
  }
  const auto num_bins =
      static_cast<std::size_t>(std::ceil((hi - lo) / bin_width - 1e-9));
  Histogram h;
  h.bin_width = bin_width;
  h.counts.assign(num_bins, 0);
  h.bin_edges.resize(num_bins + 1);
  for (std::size_t i = 0; i < num_bins; ++i) {
    h.bin_edges[i] = lo + static_cast<double>(i) * bin_width;
  }
  h.bin_edges[num_bins] = hi;

  for (const double r : residuals) {
    if (r < lo) {
      ++h.underflow;
    } else if (r >= hi) {
      ++h.overflow;
    } else {
      auto bin = static_cast<std::size_t>(std::floor((r - lo) / bin_width));
      bin = std::min(bin, num_bins - 1);
      // Rounding in the division can land one bin off at an edge.
      if (r < h.bin_edges[bin]) --bin;
      else if (r >= h.bin_edges[bin + 1]) ++bin;
      ++h.counts[bin];
    }
  }
  return h;
}

std::size_t ErrorGrid::occupied_count() const {
  return static_cast<std::size_t>(
      std::count_if(values.begin(), values.end(),
                    [](const auto& v) { return v.has_value(); }));
}

ErrorGrid MakeErrorGrid(const std::vector<Correspondence>& correspondences,
                        const GridSpec& spec) {
  spec.Validate();
  ErrorGrid grid{spec, std::vector<std::optional<double>>(spec.num_cells())};
  for (const Correspondence& c : correspondences) {
    if (!c.valid()) continue;
    const auto cell =
        spec.CellOf(c.transformed_point.x(), c.transformed_point.y());
    if (!cell) continue;
    auto& value = grid.values[*cell];
    if (!value || std::abs(c.residual) > std::abs(*value)) {
      value = c.residual;
    }
  }
  return grid;
}

void ValidatePolygon(const Polygon& polygon) {
  const std::size_t n = polygon.size();
  if (n < 3) {
    throw Error(ErrorCode::kInvalidPolygon,
                "polygon needs at least three vertices");
  }
  for (const auto& v : polygon) {
    if (!std::isfinite(v.x()) || !std::isfinite(v.y())) {
      throw Error(ErrorCode::kInvalidPolygon, "polygon vertex not finite");
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a1 = polygon[i];
    const auto& a2 = polygon[(i + 1) % n];
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      const auto& b1 = polygon[j];
      const auto& b2 = polygon[(j + 1) % n];
      if (adjacent) {
        // Adjacent edges may only share their common vertex: reject a fold
        // back along the previous edge.
        if (n == 3) continue;
        const auto& shared = (j == i + 1) ? a2 : a1;
        const auto& far_a = (j == i + 1) ? a1 : a2;
        const auto& far_b = (j == i + 1) ? b2 : b1;
        if (Cross(shared, far_a, far_b) == 0.0 &&
            (far_a - shared).dot(far_b - shared) > 0.0) {
          throw Error(ErrorCode::kInvalidPolygon,
                      "polygon edges overlap");
        }
        continue;
      }
      if (SegmentsIntersect(a1, a2, b1, b2)) {
        throw Error(ErrorCode::kInvalidPolygon,
                    "polygon is self-intersecting");
      }
    }
  }
}

bool PointInPolygon(const Polygon& polygon, double x, double y) {
  const std::size_t n = polygon.size();
  const Eigen::Vector2d p(x, y);
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Eigen::Vector2d& a = polygon[j];
    const Eigen::Vector2d& b = polygon[i];
    const Eigen::Vector2d ab = b - a;
    const double len = ab.norm();
    if (len > 0.0 && std::abs(Cross(a, b, p)) <= kEdgeTolerance * len &&
        (p - a).dot(ab) >= -kEdgeTolerance * len &&
        (p - b).dot(-ab) >= -kEdgeTolerance * len) {
      return true;
    }
    if (len == 0.0 && (p - a).norm() <= kEdgeTolerance) {
      return true;
    }
    if ((a.y() > y) != (b.y() > y)) {
      const double x_cross = a.x() + (y - a.y()) * ab.x() / ab.y();
      if (x < x_cross) inside = !inside;
    }
  }
  return inside;
}

PointCloud ApplyMask(const PointCloud& cloud,
                     const std::vector<Polygon>& polygons, MaskMode mode) {
  for (const Polygon& polygon : polygons) {
    ValidatePolygon(polygon);
  }
  std::vector<Point3> kept;
  for (const Point3& p : cloud) {
    bool inside = false;
    for (const Polygon& polygon : polygons) {
      if (PointInPolygon(polygon, p.x(), p.y())) {
        inside = true;
        break;
      }
    }
    if (inside == (mode == MaskMode::kKeepInside)) {
      kept.push_back(p);
    }
  }
  return PointCloud(std::move(kept));
}

}  // namespace surfmatch
