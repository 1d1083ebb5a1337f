#include "surfmatch/synth.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "surfmatch/error.h"

namespace surfmatch {

namespace {

std::uint64_t SplitMix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Streams of the scene and perturbation draws.
enum Stream : std::uint64_t {
  kTerrainStream = 1,
  kBuildingStream = 2,
  kNoiseStream = 3,
  kBlunderSelectStream = 4,
  kBlunderValueStream = 5,
};

// Sum of the wave weights 1 + 1/2 + 1/3 + 1/4; normalizes ridged relief.
constexpr double kWaveWeightSum = 25.0 / 12.0;

struct Block {
  double xmin, xmax, ymin, ymax, roof;
};

class HeightField {
 public:
  explicit HeightField(const SceneSpec& spec) : spec_(spec) {
    const CounterRng rng(spec.seed, kTerrainStream);
    for (int k = 0; k < 4; ++k) {
      const double theta = rng.Uniform(4 * k, 0.0, 2.0 * std::numbers::pi);
      waves_[k] = {std::cos(theta), std::sin(theta),
                   rng.Uniform(4 * k + 1, 1.0, 3.0 + k),
                   rng.Uniform(4 * k + 2, 0.0, 2.0 * std::numbers::pi),
                   1.0 / (k + 1)};
    }
    if (spec.kind == SceneKind::kBuildingBlocks) {
      MakeBlocks();
    }
  }

  double operator()(double x, double y) const {
    switch (spec_.kind) {
      case SceneKind::kPlane:
        return spec_.amplitude * 0.5 *
               (waves_[0].dx * x / spec_.extent_x +
                waves_[0].dy * y / spec_.extent_y);
      case SceneKind::kRidgedTerrain: {
        double z = 0.0;
        for (const Wave& w : waves_) {
          z += w.weight * (1.0 - std::abs(std::sin(Phase(w, x, y))));
        }
        return spec_.amplitude * z / kWaveWeightSum;
      }
      case SceneKind::kBuildingBlocks: {
        double z = Ground(x, y);
        for (const Block& b : blocks_) {
          if (x >= b.xmin && x < b.xmax && y >= b.ymin && y < b.ymax) {
            z = std::max(z, b.roof);
          }
        }
        return z;
      }
    }
    return 0.0;
  }

 private:
  struct Wave {
    double dx, dy, frequency, phase, weight;
  };

  double Phase(const Wave& w, double x, double y) const {
    const double length = std::max(spec_.extent_x, spec_.extent_y);
    return 2.0 * std::numbers::pi * w.frequency * (w.dx * x + w.dy * y) /
               length +
           w.phase;
  }

  double Ground(double x, double y) const {
    double z = 0.0;
    for (int k = 0; k < 2; ++k) {
      z += waves_[k].weight * std::sin(Phase(waves_[k], x, y));
    }
    return 0.05 * spec_.amplitude * z;
  }

  void MakeBlocks() {
    const CounterRng rng(spec_.seed, kBuildingStream);
    const double area = spec_.extent_x * spec_.extent_y;
    const int count = std::max(1, static_cast<int>(std::lround(area / 1000.0)));
    const double max_half =
        std::min({10.0, spec_.extent_x / 4.0, spec_.extent_y / 4.0});
    const double min_half = 0.4 * max_half;
    for (int i = 0; i < count; ++i) {
      const std::uint64_t c = 8ull * i;
      const double hx = rng.Uniform(c, min_half, max_half);
      const double hy = rng.Uniform(c + 1, min_half, max_half);
      const double cx = rng.Uniform(c + 2, -0.5 * spec_.extent_x + hx,
                                    0.5 * spec_.extent_x - hx);
      const double cy = rng.Uniform(c + 3, -0.5 * spec_.extent_y + hy,
                                    0.5 * spec_.extent_y - hy);
      const double height =
          rng.Uniform(c + 4, 0.5 * spec_.amplitude, spec_.amplitude);
      blocks_.push_back(
          {cx - hx, cx + hx, cy - hy, cy + hy, Ground(cx, cy) + height});
    }
  }

  SceneSpec spec_;
  Wave waves_[4];
  std::vector<Block> blocks_;
};

}  // namespace

std::uint64_t CounterRng::Bits(std::uint64_t counter) const {
  return SplitMix(SplitMix(SplitMix(seed_) ^ stream_) ^ counter);
}

double CounterRng::Uniform(std::uint64_t counter) const {
  return static_cast<double>(Bits(counter) >> 11) * 0x1.0p-53;
}

double CounterRng::Normal(std::uint64_t counter) const {
  // (0, 1] keeps the logarithm finite.
  const double u1 =
      static_cast<double>((Bits(2 * counter) >> 11) + 1) * 0x1.0p-53;
  const double u2 = Uniform(2 * counter + 1);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

void SceneSpec::Validate() const {
  if (!(extent_x > 0.0) || !(extent_y > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "scene extents must be positive");
  }
  if (!(gsd > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "scene gsd must be positive");
  }
  if (!std::isfinite(amplitude) || amplitude < 0.0) {
    throw Error(ErrorCode::kInvalidArgument,
                "scene amplitude must be non-negative");
  }
}

Scene MakeScene(const SceneSpec& spec) {
  spec.Validate();
  const GridSpec grid_spec = GridSpec::FromExtent(
      -0.5 * spec.extent_x, -0.5 * spec.extent_y, 0.5 * spec.extent_x,
      0.5 * spec.extent_y, spec.gsd);
  const HeightField height(spec);

  std::vector<CellEntry> entries;
  entries.reserve(grid_spec.num_cells());
  for (std::size_t cell = 0; cell < grid_spec.num_cells(); ++cell) {
    Point3 p = grid_spec.CellCenter(cell);
    p.z() = height(p.x(), p.y());
    entries.push_back({cell, p, cell});
  }
  Scene scene;
  scene.grid = RasterGrid(grid_spec, std::move(entries));
  scene.mesh = MeshFromGrid(scene.grid);
  scene.samples = ExtractCloud(scene.grid);
  return scene;
}

void PerturbationSpec::Validate() const {
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw Error(ErrorCode::kInvalidArgument, "noise_sigma must be >= 0");
  }
  if (!(blunder_fraction >= 0.0 && blunder_fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "blunder_fraction must be in [0, 1]");
  }
  if (!(blunder_magnitude >= 0.0) || !std::isfinite(blunder_magnitude)) {
    throw Error(ErrorCode::kInvalidArgument,
                "blunder_magnitude must be >= 0");
  }
}

PerturbedCloud Perturb(const PointCloud& cloud, const PerturbationSpec& spec) {
  spec.Validate();
  const std::size_t n = cloud.size();
  const SimilarityTransform to_search = Invert(spec.transform);
  const CounterRng noise(spec.seed, kNoiseStream);

  std::vector<Point3> points;
  points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Point3 p = Apply(to_search, cloud[i]);
    if (spec.noise_sigma > 0.0) {
      p += spec.noise_sigma * Vec3(noise.Normal(3 * i), noise.Normal(3 * i + 1),
                                   noise.Normal(3 * i + 2));
    }
    points.push_back(p);
  }

  PerturbedCloud out;
  out.is_blunder.assign(n, false);
  const auto num_blunders = static_cast<std::size_t>(
      std::llround(spec.blunder_fraction * static_cast<double>(n)));
  if (num_blunders > 0) {
    const CounterRng select(spec.seed, kBlunderSelectStream);
    std::vector<std::pair<std::uint64_t, std::size_t>> keys(n);
    for (std::size_t i = 0; i < n; ++i) {
      keys[i] = {select.Bits(i), i};
    }
    std::partial_sort(keys.begin(), keys.begin() + num_blunders, keys.end());
    const CounterRng value(spec.seed, kBlunderValueStream);
    for (std::size_t k = 0; k < num_blunders; ++k) {
      const std::size_t i = keys[k].second;
      const double sign = (value.Bits(2 * i) & 1) ? 1.0 : -1.0;
      const double magnitude =
          value.Uniform(2 * i + 1, 0.1 * spec.blunder_magnitude,
                        spec.blunder_magnitude);
      points[i].z() += sign * magnitude;
      out.is_blunder[i] = true;
    }
  }
  out.cloud = PointCloud(std::move(points));
  return out;
}

FootPoint BruteForceClosest(const SurfaceMesh& mesh, const Point3& q) {
  if (mesh.empty()) {
    throw Error(ErrorCode::kDegenerateGrid, "mesh has no triangles");
  }
  double best_d2 = std::numeric_limits<double>::infinity();
  std::size_t best_id = 0;
  TriangleClosestPoint best{};
  const auto& v = mesh.vertices();
  for (std::size_t id = 0; id < mesh.num_triangles(); ++id) {
    const TriangleIndices& tri = mesh.triangles()[id];
    const Point3 corners[3] = {v[tri[0]], v[tri[1]], v[tri[2]]};

    // Projection onto the supporting plane, accepted when it falls inside.
    const Vec3 e1 = corners[1] - corners[0];
    const Vec3 e2 = corners[2] - corners[0];
    const Vec3 d = q - corners[0];
    const double a11 = e1.dot(e1), a12 = e1.dot(e2), a22 = e2.dot(e2);
    const double b1 = d.dot(e1), b2 = d.dot(e2);
    const double det = a11 * a22 - a12 * a12;
    const double s = (a22 * b1 - a12 * b2) / det;
    const double t = (a11 * b2 - a12 * b1) / det;
    TriangleClosestPoint candidate;
    if (s >= 0.0 && t >= 0.0 && s + t <= 1.0) {
      candidate = {corners[0] + s * e1 + t * e2, {1.0 - s - t, s, t}};
    } else {
      // Otherwise the minimum lies on one of the three closed edges.
      double edge_best = std::numeric_limits<double>::infinity();
      for (int k = 0; k < 3; ++k) {
        const Point3& a = corners[k];
        const Point3& b = corners[(k + 1) % 3];
        const double len2 = (b - a).squaredNorm();
        const double u = std::clamp((q - a).dot(b - a) / len2, 0.0, 1.0);
        const Point3 p = a + u * (b - a);
        const double d2 = (q - p).squaredNorm();
        if (d2 < edge_best) {
          edge_best = d2;
          std::array<double, 3> w{0.0, 0.0, 0.0};
          w[k] = 1.0 - u;
          w[(k + 1) % 3] = u;
          candidate = {p, w};
        }
      }
    }
    const double d2 = (q - candidate.point).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best_id = id;
      best = candidate;
    }
  }
  return MakeFootPoint(mesh, best_id, q, best);
}

}  // namespace surfmatch
