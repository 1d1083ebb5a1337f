#ifndef SURFMATCH_RASTER_H_
#define SURFMATCH_RASTER_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "surfmatch/geometry.h"
#include "surfmatch/surface.h"

namespace surfmatch {

inline constexpr double kDefaultGsd = 0.10;

// Regular grid anchored at its lower-left corner. Row 0 is the southernmost
// row; cell (row, col) covers the half-open square
// [x0 + col*gsd, x0 + (col+1)*gsd) x [y0 + row*gsd, y0 + (row+1)*gsd).
struct GridSpec {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double gsd = kDefaultGsd;
  std::size_t ncols = 1;
  std::size_t nrows = 1;

  // Throws kInvalidArgument unless gsd > 0 and both dimensions are >= 1.
  void Validate() const;

  std::size_t num_cells() const { return ncols * nrows; }
  std::size_t Index(std::size_t row, std::size_t col) const {
    return row * ncols + col;
  }
  std::optional<std::size_t> CellOf(double x, double y) const;
  Point3 CellCenter(std::size_t index, double z = 0.0) const;

  // Grid covering [xmin, xmax) x [ymin, ymax) with the origin at (xmin,
  // ymin); dimensions are rounded up, ignoring floating-point dust.
  static GridSpec FromExtent(double xmin, double ymin, double xmax,
                             double ymax, double gsd);
  // Bounding box of the cloud snapped outward to multiples of gsd. Every
  // point of the cloud falls inside the returned grid.
  static GridSpec Covering(const PointCloud& cloud, double gsd);

  bool operator==(const GridSpec&) const = default;
};

struct CellEntry {
  std::size_t cell = 0;
  Point3 point;
  // Position of the winning point in the rasterized cloud.
  std::size_t source_index = 0;
};

// Upper-layer raster. Each occupied cell keeps the original 3D point that
// won the Z-buffer test, never a resampled value.
class RasterGrid {
 public:
  RasterGrid() = default;
  explicit RasterGrid(const GridSpec& spec);
  // Entries must have strictly increasing, in-range cell indices and points
  // inside their cells.
  RasterGrid(const GridSpec& spec, std::vector<CellEntry> entries,
             std::size_t outside_count = 0);

  const GridSpec& spec() const { return spec_; }
  // nullptr for NO_DATA.
  const CellEntry* Cell(std::size_t index) const;
  const CellEntry* Cell(std::size_t row, std::size_t col) const {
    return Cell(spec_.Index(row, col));
  }
  // Occupied cells in row-major order.
  const std::vector<CellEntry>& entries() const { return entries_; }
  std::size_t occupied_count() const { return entries_.size(); }
  std::size_t nodata_count() const {
    return spec_.num_cells() - entries_.size();
  }
  // Input points that fell outside the grid extent.
  std::size_t outside_count() const { return outside_count_; }

  bool operator==(const RasterGrid& other) const;

 private:
  static constexpr std::uint32_t kNoData = 0xffffffffu;

  GridSpec spec_;
  std::vector<std::uint32_t> slot_;
  std::vector<CellEntry> entries_;
  std::size_t outside_count_ = 0;
};

// Z-buffer: every cell keeps the highest point falling in it; equal heights
// resolve to the lowest input index. The result does not depend on the
// thread count.
RasterGrid Rasterize(const PointCloud& cloud, const GridSpec& spec,
                     int num_threads = 1);

// One point per occupied cell, row-major.
PointCloud ExtractCloud(const RasterGrid& grid);

// Two triangles per fully occupied 2x2 block, split along the NW-SE
// diagonal; one triangle where exactly one cell of the block is empty.
// Vertices are the stored original points, one per occupied cell in
// row-major order. Throws kDegenerateGrid if no triangle can be formed.
SurfaceMesh MeshFromGrid(const RasterGrid& grid);

}  // namespace surfmatch

#endif  // SURFMATCH_RASTER_H_
