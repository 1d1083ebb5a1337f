#ifndef SURFMATCH_SYNTH_H_
#define SURFMATCH_SYNTH_H_

#include <cstdint>
#include <vector>

#include "surfmatch/geometry.h"
#include "surfmatch/raster.h"
#include "surfmatch/surface.h"

namespace surfmatch {

// Stateless counter-based generator: every draw is a pure function of
// (seed, stream, counter), so results do not depend on call order, thread
// schedule or platform.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {}

  std::uint64_t Bits(std::uint64_t counter) const;
  // Uniform in [0, 1).
  double Uniform(std::uint64_t counter) const;
  double Uniform(std::uint64_t counter, double lo, double hi) const {
    return lo + (hi - lo) * Uniform(counter);
  }
  // Standard normal (Box-Muller on counters 2c and 2c + 1).
  double Normal(std::uint64_t counter) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
};

enum class SceneKind { kPlane, kRidgedTerrain, kBuildingBlocks };

struct SceneSpec {
  SceneKind kind = SceneKind::kBuildingBlocks;
  double extent_x = 100.0;
  double extent_y = 100.0;
  double gsd = 0.5;
  // Terrain relief or maximum building height, meters.
  double amplitude = 6.0;
  std::uint64_t seed = 1;

  void Validate() const;
};

struct Scene {
  // Generating grid: one cell-center sample of the height field per cell,
  // centered on the origin.
  RasterGrid grid;
  SurfaceMesh mesh;
  // Exact surface samples (the mesh vertices), row-major.
  PointCloud samples;
};

// Deterministic per seed. Building blocks are axis-aligned flat-roofed
// boxes on gently undulating ground, so the mesh has steep walls at roof
// edges.
Scene MakeScene(const SceneSpec& spec);

struct PerturbationSpec {
  SimilarityTransform transform;
  double noise_sigma = 0.0;
  double blunder_fraction = 0.0;
  double blunder_magnitude = 0.0;
  std::uint64_t seed = 1;

  void Validate() const;
};

struct PerturbedCloud {
  PointCloud cloud;
  // true where the point carries an injected blunder.
  std::vector<bool> is_blunder;
};

// Maps every point through the inverse of spec.transform (registering the
// result against the original surface recovers spec.transform), adds
// isotropic Gaussian noise, then shifts round(fraction * n) points along z
// by a random sign times a magnitude uniform in
// [0.1 * blunder_magnitude, blunder_magnitude].
PerturbedCloud Perturb(const PointCloud& cloud, const PerturbationSpec& spec);

// Exhaustive scan over every facet, independent of the spatial index and
// of its closest-point-on-triangle routine. Equal distances resolve to the
// lowest triangle id. Throws kDegenerateGrid on an empty mesh.
FootPoint BruteForceClosest(const SurfaceMesh& mesh, const Point3& q);

}  // namespace surfmatch

#endif  // SURFMATCH_SYNTH_H_
