#include "surfmatch/raster.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "surfmatch/error.h"
#include "surfmatch/parallel.h"

namespace surfmatch {

namespace {

std::size_t CellCount(double length, double gsd) {
  const double n = length / gsd;
  return static_cast<std::size_t>(std::max(1.0, std::ceil(n - 1e-9)));
}

// Z-buffer order: higher z first, then lower input index.
bool Beats(const PointCloud& cloud, std::size_t a, std::size_t b) {
  const double za = cloud[a].z();
  const double zb = cloud[b].z();
  return za > zb || (za == zb && a < b);
}

}  // namespace

void GridSpec::Validate() const {
  if (!(gsd > 0.0) || !std::isfinite(gsd)) {
    throw Error(ErrorCode::kInvalidArgument, "gsd must be positive");
  }
  if (ncols < 1 || nrows < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "grid must have at least one row and column");
  }
  if (!std::isfinite(origin_x) || !std::isfinite(origin_y)) {
    throw Error(ErrorCode::kInvalidArgument, "grid origin must be finite");
  }
  if (num_cells() >= std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::kInvalidArgument, "grid too large");
  }
}

std::optional<std::size_t> GridSpec::CellOf(double x, double y) const {
  const double fc = std::floor((x - origin_x) / gsd);
  const double fr = std::floor((y - origin_y) / gsd);
  if (!(fc >= 0.0) || !(fr >= 0.0) || fc >= static_cast<double>(ncols) ||
      fr >= static_cast<double>(nrows)) {
    return std::nullopt;
  }
  return Index(static_cast<std::size_t>(fr), static_cast<std::size_t>(fc));
}

Point3 GridSpec::CellCenter(std::size_t index, double z) const {
  const std::size_t row = index / ncols;
  const std::size_t col = index % ncols;
  return {origin_x + (static_cast<double>(col) + 0.5) * gsd,
          origin_y + (static_cast<double>(row) + 0.5) * gsd, z};
}

GridSpec GridSpec::FromExtent(double xmin, double ymin, double xmax,
                              double ymax, double gsd) {
  if (!(gsd > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "gsd must be positive");
  }
  if (!(xmax > xmin) || !(ymax > ymin)) {
    throw Error(ErrorCode::kInvalidArgument, "extent must be non-empty");
  }
  GridSpec spec{xmin, ymin, gsd, CellCount(xmax - xmin, gsd),
                CellCount(ymax - ymin, gsd)};
  spec.Validate();
  return spec;
}

GridSpec GridSpec::Covering(const PointCloud& cloud, double gsd) {
  if (!(gsd > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "gsd must be positive");
  }
  if (cloud.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "cannot size a grid for an empty cloud");
  }
  double xmin = cloud[0].x(), xmax = xmin, ymin = cloud[0].y(), ymax = ymin;
  for (const Point3& p : cloud) {
    xmin = std::min(xmin, p.x());
    xmax = std::max(xmax, p.x());
    ymin = std::min(ymin, p.y());
    ymax = std::max(ymax, p.y());
  }
  GridSpec spec{std::floor(xmin / gsd) * gsd, std::floor(ymin / gsd) * gsd,
                gsd, 1, 1};
  // Derive the dimensions with the same floor rule CellOf uses, so the
  // extreme points are guaranteed to land inside.
  spec.ncols =
      static_cast<std::size_t>(std::floor((xmax - spec.origin_x) / gsd)) + 1;
  spec.nrows =
      static_cast<std::size_t>(std::floor((ymax - spec.origin_y) / gsd)) + 1;
  spec.Validate();
  return spec;
}

RasterGrid::RasterGrid(const GridSpec& spec)
    : spec_(spec), slot_(), entries_(), outside_count_(0) {
  spec_.Validate();
  slot_.assign(spec_.num_cells(), kNoData);
}

RasterGrid::RasterGrid(const GridSpec& spec, std::vector<CellEntry> entries,
                       std::size_t outside_count)
    : RasterGrid(spec) {
  entries_ = std::move(entries);
  outside_count_ = outside_count;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const CellEntry& e = entries_[i];
    if (e.cell >= spec_.num_cells() ||
        (i > 0 && e.cell <= entries_[i - 1].cell)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "raster entries must have increasing valid cell indices");
    }
    if (spec_.CellOf(e.point.x(), e.point.y()) != e.cell) {
      throw Error(ErrorCode::kInvalidArgument,
                  "raster entry " + std::to_string(i) +
                      " lies outside its cell");
    }
    slot_[e.cell] = static_cast<std::uint32_t>(i);
  }
}

const CellEntry* RasterGrid::Cell(std::size_t index) const {
  const std::uint32_t s = slot_[index];
  return s == kNoData ? nullptr : &entries_[s];
}

bool RasterGrid::operator==(const RasterGrid& other) const {
  if (!(spec_ == other.spec_) || outside_count_ != other.outside_count_ ||
      entries_.size() != other.entries_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const CellEntry& a = entries_[i];
    const CellEntry& b = other.entries_[i];
    if (a.cell != b.cell || a.point != b.point ||
        a.source_index != b.source_index) {
      return false;
    }
  }
  return true;
}

RasterGrid Rasterize(const PointCloud& cloud, const GridSpec& spec,
                     int num_threads) {
  spec.Validate();
  constexpr std::size_t kOutside = std::numeric_limits<std::size_t>::max();

  // Per chunk: the best candidate for every cell the chunk touches.
  struct Candidate {
    std::size_t cell;
    std::size_t index;
  };
  std::vector<std::vector<Candidate>> chunk_candidates(ChunkCount(cloud.size()));
  std::vector<std::size_t> chunk_outside(chunk_candidates.size(), 0);
  ParallelForChunks(
      cloud.size(), num_threads,
      [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        std::vector<Candidate> local;
        local.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) {
          const auto cell = spec.CellOf(cloud[i].x(), cloud[i].y());
          if (!cell) {
            ++chunk_outside[chunk];
            continue;
          }
          local.push_back({*cell, i});
        }
        std::sort(local.begin(), local.end(),
                  [&](const Candidate& a, const Candidate& b) {
                    if (a.cell != b.cell) return a.cell < b.cell;
                    return Beats(cloud, a.index, b.index);
                  });
        local.erase(std::unique(local.begin(), local.end(),
                                [](const Candidate& a, const Candidate& b) {
                                  return a.cell == b.cell;
                                }),
                    local.end());
        chunk_candidates[chunk] = std::move(local);
      });

  std::vector<std::size_t> winner(spec.num_cells(), kOutside);
  std::size_t outside = 0;
  for (std::size_t c = 0; c < chunk_candidates.size(); ++c) {
    outside += chunk_outside[c];
    for (const Candidate& cand : chunk_candidates[c]) {
      std::size_t& w = winner[cand.cell];
      if (w == kOutside || Beats(cloud, cand.index, w)) {
        w = cand.index;
      }
    }
  }

  std::vector<CellEntry> entries;
  for (std::size_t cell = 0; cell < winner.size(); ++cell) {
    if (winner[cell] != kOutside) {
      entries.push_back({cell, cloud[winner[cell]], winner[cell]});
    }
  }
  return RasterGrid(spec, std::move(entries), outside);
}

PointCloud ExtractCloud(const RasterGrid& grid) {
  std::vector<Point3> points;
  points.reserve(grid.occupied_count());
  for (const CellEntry& e : grid.entries()) {
    points.push_back(e.point);
  }
  return PointCloud(std::move(points));
}

SurfaceMesh MeshFromGrid(const RasterGrid& grid) {
  const GridSpec& spec = grid.spec();
  std::vector<Point3> vertices;
  vertices.reserve(grid.occupied_count());
  for (const CellEntry& e : grid.entries()) {
    vertices.push_back(e.point);
  }
  const auto vertex_of = [&](std::size_t row,
                             std::size_t col) -> std::optional<std::uint32_t> {
    const CellEntry* e = grid.Cell(row, col);
    if (e == nullptr) return std::nullopt;
    return static_cast<std::uint32_t>(e - grid.entries().data());
  };

  std::vector<TriangleIndices> triangles;
  const auto emit = [&](std::uint32_t a, std::uint32_t b, std::uint32_t c) {
    const Vec3 cross =
        (vertices[b] - vertices[a]).cross(vertices[c] - vertices[a]);
    const double norm = cross.norm();
    // Skip slivers and facets standing exactly on edge in plan view.
    if (0.5 * norm <= kMinTriangleArea || std::abs(cross.z()) <= 1e-12 * norm) {
      return;
    }
    triangles.push_back({a, b, c});
  };

  for (std::size_t r = 0; r + 1 < spec.nrows; ++r) {
    for (std::size_t c = 0; c + 1 < spec.ncols; ++c) {
      const auto sw = vertex_of(r, c);
      const auto se = vertex_of(r, c + 1);
      const auto nw = vertex_of(r + 1, c);
      const auto ne = vertex_of(r + 1, c + 1);
      const int present = sw.has_value() + se.has_value() + nw.has_value() +
                          ne.has_value();
      if (present == 4) {
        emit(*sw, *se, *nw);
        emit(*se, *ne, *nw);
      } else if (present == 3) {
        std::vector<std::uint32_t> v;
        for (const auto& x : {sw, se, ne, nw}) {
          if (x) v.push_back(*x);
        }
        emit(v[0], v[1], v[2]);
      }
    }
  }
  if (triangles.empty()) {
    throw Error(ErrorCode::kDegenerateGrid,
                "grid has no occupied 2x2 neighborhood to triangulate");
  }
  return SurfaceMesh(std::move(vertices), std::move(triangles));
}

}  // namespace surfmatch
