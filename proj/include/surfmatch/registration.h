#ifndef SURFMATCH_REGISTRATION_H_
#define SURFMATCH_REGISTRATION_H_

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "surfmatch/geometry.h"
#include "surfmatch/surface.h"

namespace surfmatch {

enum class CorrespondenceStatus { kUsed, kBlunder, kInvalid };

struct Correspondence {
  std::size_t source_index = 0;
  // Point in the search frame, before the transform.
  Point3 source_point;
  Point3 transformed_point;
  // Present whenever a surface point was found within max_dist, including
  // boundary feet (which are nevertheless INVALID).
  std::optional<FootPoint> foot;
  double residual = 0.0;
  CorrespondenceStatus status = CorrespondenceStatus::kInvalid;

  bool valid() const { return status != CorrespondenceStatus::kInvalid; }
};

inline constexpr int kMaxParameters = 7;

// Parameter order everywhere: tx, ty, tz, omega, phi, kappa[, scale].
struct RegistrationConfig {
  double k_blunder = 5.0;
  bool estimate_scale = false;
  int max_iterations = 50;
  double convergence_translation = 1e-4;
  double convergence_rotation = 1e-6;
  double convergence_scale = 1e-6;
  double max_dist = kDefaultMaxDistance;
  SimilarityTransform initial_transform;
  // 0 = hardware concurrency. Results are identical for every value.
  int num_threads = 1;

  int num_parameters() const { return estimate_scale ? 7 : 6; }
  // Throws kInvalidArgument.
  void Validate() const;
};

struct IterationLog {
  int iteration = 0;
  // K-sigma test statistic after this iteration's correspondence pass.
  double delta = 0.0;
  std::size_t used = 0;
  std::size_t blunder = 0;
  std::size_t invalid = 0;
  // Sum of squared residuals over USED correspondences.
  double objective = 0.0;
  // Max-abs components of the update that produced this state.
  double translation_update = 0.0;
  double rotation_update = 0.0;
  double scale_update = 0.0;
  int step_halvings = 0;
};

struct RegistrationResult {
  SimilarityTransform transform;
  // A-posteriori standard deviation of unit weight.
  double sigma0 = 0.0;
  // Number of accepted parameter updates.
  int iterations = 0;
  std::size_t used_count = 0;
  std::size_t blunder_count = 0;
  std::size_t invalid_count = 0;
  // sigma0^2 * N^-1 in parameter order; 6x6 or 7x7.
  Eigen::MatrixXd parameter_covariance;
  bool converged = false;
  // Final correspondence pass, evaluated at `transform`.
  std::vector<Correspondence> correspondences;
  // Entry 0 is the initial state; entry i follows the i-th update.
  std::vector<IterationLog> log;
};

// One correspondence per cloud point, in cloud order. A point is INVALID
// when no surface point lies within max_dist or its foot is on the mesh
// boundary; otherwise USED with its signed residual.
std::vector<Correspondence> FindCorrespondences(const PointCloud& cloud,
                                                const SimilarityTransform& t,
                                                const SpatialIndex& index,
                                                double max_dist,
                                                int num_threads = 1);

// Analytic partials of n . (s R p + T - f) with the foot held fixed, in
// parameter order. Size 6 or 7.
Eigen::VectorXd JacobianRow(const Correspondence& c,
                            const SimilarityTransform& t, bool estimate_scale);

// Gauss-Newton update from the USED correspondences with unit weights.
// Throws kNoCorrespondences with fewer USED correspondences than free
// parameters and kRankDeficient when the Jacobi-scaled normal matrix has a
// condition number above 1e12.
Eigen::VectorXd SolveStep(const std::vector<Correspondence>& correspondences,
                          const SimilarityTransform& t,
                          const RegistrationConfig& config);

SimilarityTransform ApplyUpdate(const SimilarityTransform& t,
                                const Eigen::VectorXd& update);

// K-sigma blunder test. Flags are recomputed from scratch: previous BLUNDER
// marks are cleared, then the test
//   delta = sample standard deviation of the USED residuals,
//   |residual| > k * delta  ->  BLUNDER
// is repeated on the surviving set until it flags nothing new. A pass that
// would leave fewer than two USED correspondences is not applied. Returns
// the delta of the last applied pass. Throws kNoCorrespondences if fewer
// than two correspondences are valid.
double RejectBlunders(std::vector<Correspondence>& correspondences, double k);

// Iterative least-squares surface matching: correspondences, blunder test,
// Gauss-Newton update, until every update component is below its
// convergence threshold or max_iterations updates were made. An update
// that increases the objective over the current USED set is halved; if no
// step decreases it the run stops unconverged.
RegistrationResult Register(const PointCloud& cloud, const SpatialIndex& index,
                            const RegistrationConfig& config);

struct FixedEvaluation {
  std::vector<Correspondence> correspondences;
  double delta = 0.0;
};

// One correspondence pass and one blunder test at a fixed transform.
FixedEvaluation EvaluateFixed(const PointCloud& cloud,
                              const SimilarityTransform& t,
                              const SpatialIndex& index, double k,
                              double max_dist, int num_threads = 1);

struct StatusCounts {
  std::size_t used = 0;
  std::size_t blunder = 0;
  std::size_t invalid = 0;
};
StatusCounts CountStatuses(const std::vector<Correspondence>& correspondences);

}  // namespace surfmatch

#endif  // SURFMATCH_REGISTRATION_H_
