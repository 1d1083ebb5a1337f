#include "surfmatch/registration.h"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "surfmatch/error.h"
#include "surfmatch/parallel.h"

namespace surfmatch {

namespace {

using Vec7 = Eigen::Matrix<double, kMaxParameters, 1>;
using Mat7 = Eigen::Matrix<double, kMaxParameters, kMaxParameters>;

constexpr double kMaxConditionNumber = 1e12;
constexpr int kMaxStepHalvings = 8;
// Objective increases below (1e-9 m)^2 per observation are rounding noise.
constexpr double kObjectiveFloorPerPoint = 1e-18;
constexpr double kObjectiveRelativeTolerance = 1e-12;

// Facet normal for interior feet. A foot on an edge or vertex is a crease
// of the distance field, where the gradient is the unit offset from the
// foot instead.
Vec3 ResidualDirection(const Correspondence& c) {
  const FootPoint& foot = *c.foot;
  const bool interior =
      std::all_of(foot.barycentric.begin(), foot.barycentric.end(),
                  [](double w) { return w > kBoundaryTolerance; });
  const Vec3 offset = c.transformed_point - foot.point;
  const double length = offset.norm();
  if (interior || !(length > 1e-12)) return foot.normal;
  return (c.residual < 0.0 ? -offset : offset) / length;
}

// Full 7-vector; the scale partial sits in the last slot.
Vec7 FullJacobianRow(const Correspondence& c, const SimilarityTransform& t,
                     const std::array<Mat3, 3>& partials) {
  const Vec3 n = ResidualDirection(c);
  const Point3& p = c.source_point;
  Vec7 row;
  row.head<3>() = n;
  for (int k = 0; k < 3; ++k) {
    row[3 + k] = t.scale() * n.dot(partials[k] * p);
  }
  row[6] = n.dot(t.rotation() * p);
  return row;
}

struct NormalEquations {
  Mat7 n = Mat7::Zero();
  Vec7 b = Vec7::Zero();
  std::size_t count = 0;
};

// Chunked accumulation, combined in chunk order so the sums do not depend
// on the thread count.
NormalEquations Assemble(const std::vector<Correspondence>& correspondences,
                         const SimilarityTransform& t, int num_threads) {
  const auto partials = RotationMatrixPartials(t.omega(), t.phi(), t.kappa());
  std::vector<NormalEquations> partial_sums(ChunkCount(correspondences.size()));
  ParallelForChunks(
      correspondences.size(), num_threads,
      [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        NormalEquations& local = partial_sums[chunk];
        for (std::size_t i = begin; i < end; ++i) {
          const Correspondence& c = correspondences[i];
          if (c.status != CorrespondenceStatus::kUsed) continue;
          const Vec7 row = FullJacobianRow(c, t, partials);
          local.n.selfadjointView<Eigen::Upper>().rankUpdate(row);
          local.b -= row * c.residual;
          ++local.count;
        }
      });
  NormalEquations total;
  for (const NormalEquations& part : partial_sums) {
    total.n += part.n;
    total.b += part.b;
    total.count += part.count;
  }
  total.n = total.n.selfadjointView<Eigen::Upper>();
  return total;
}

double UsedObjective(const std::vector<Correspondence>& correspondences) {
  double sum = 0.0;
  for (const Correspondence& c : correspondences) {
    if (c.status == CorrespondenceStatus::kUsed) {
      sum += c.residual * c.residual;
    }
  }
  return sum;
}

struct UpdateSize {
  double translation = 0.0;
  double rotation = 0.0;
  double scale = 0.0;
};

UpdateSize MeasureUpdate(const Eigen::VectorXd& update) {
  UpdateSize size;
  size.translation = update.head<3>().cwiseAbs().maxCoeff();
  size.rotation = update.segment<3>(3).cwiseAbs().maxCoeff();
  size.scale = update.size() > 6 ? std::abs(update[6]) : 0.0;
  return size;
}

bool IsSmall(const UpdateSize& size, const RegistrationConfig& config) {
  return size.translation < config.convergence_translation &&
         size.rotation < config.convergence_rotation &&
         size.scale < config.convergence_scale;
}

IterationLog MakeLog(int iteration, double delta,
                     const std::vector<Correspondence>& correspondences) {
  const StatusCounts counts = CountStatuses(correspondences);
  IterationLog log;
  log.iteration = iteration;
  log.delta = delta;
  log.used = counts.used;
  log.blunder = counts.blunder;
  log.invalid = counts.invalid;
  log.objective = UsedObjective(correspondences);
  return log;
}

}  // namespace

void RegistrationConfig::Validate() const {
  if (!(k_blunder > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "k_blunder must be positive");
  }
  if (max_iterations < 1) {
    throw Error(ErrorCode::kInvalidArgument, "max_iterations must be >= 1");
  }
  if (!(max_dist > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "max_dist must be positive");
  }
  if (!(convergence_translation > 0.0) || !(convergence_rotation > 0.0) ||
      !(convergence_scale > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "convergence thresholds must be positive");
  }
}

StatusCounts CountStatuses(const std::vector<Correspondence>& correspondences) {
  StatusCounts counts;
  for (const Correspondence& c : correspondences) {
    switch (c.status) {
      case CorrespondenceStatus::kUsed:
        ++counts.used;
        break;
      case CorrespondenceStatus::kBlunder:
        ++counts.blunder;
        break;
      case CorrespondenceStatus::kInvalid:
        ++counts.invalid;
        break;
    }
  }
  return counts;
}

std::vector<Correspondence> FindCorrespondences(const PointCloud& cloud,
                                                const SimilarityTransform& t,
                                                const SpatialIndex& index,
                                                double max_dist,
                                                int num_threads) {
  if (!(max_dist > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "max_dist must be positive");
  }
  std::vector<Correspondence> out(cloud.size());
  ParallelForChunks(cloud.size(), num_threads,
                    [&](std::size_t, std::size_t begin, std::size_t end) {
                      for (std::size_t i = begin; i < end; ++i) {
                        Correspondence& c = out[i];
                        c.source_index = i;
                        c.source_point = cloud[i];
                        c.transformed_point = Apply(t, cloud[i]);
                        c.foot = index.ClosestPoint(c.transformed_point,
                                                    max_dist);
                        if (!c.foot || c.foot->on_boundary) {
                          c.status = CorrespondenceStatus::kInvalid;
                          c.residual = 0.0;
                        } else {
                          c.status = CorrespondenceStatus::kUsed;
                          c.residual =
                              SignedDistance(c.transformed_point, *c.foot);
                        }
                      }
                    });
  return out;
}

Eigen::VectorXd JacobianRow(const Correspondence& c,
                            const SimilarityTransform& t, bool estimate_scale) {
  if (!c.foot) {
    throw Error(ErrorCode::kInvalidArgument,
                "correspondence has no foot point");
  }
  const Vec7 row = FullJacobianRow(
      c, t, RotationMatrixPartials(t.omega(), t.phi(), t.kappa()));
  return estimate_scale ? Eigen::VectorXd(row) : Eigen::VectorXd(row.head<6>());
}

Eigen::VectorXd SolveStep(const std::vector<Correspondence>& correspondences,
                          const SimilarityTransform& t,
                          const RegistrationConfig& config) {
  const int u = config.num_parameters();
  const NormalEquations eq =
      Assemble(correspondences, t, config.num_threads);
  if (eq.count < static_cast<std::size_t>(u)) {
    throw Error(ErrorCode::kNoCorrespondences,
                "only " + std::to_string(eq.count) +
                    " USED correspondences for " + std::to_string(u) +
                    " parameters");
  }
  const Eigen::MatrixXd n = eq.n.topLeftCorner(u, u);
  const Eigen::VectorXd b = eq.b.head(u);

  // Condition is judged on the Jacobi-scaled matrix so that mixing meters
  // and radians does not count as ill-conditioning.
  const Eigen::VectorXd diag = n.diagonal();
  if ((diag.array() <= 0.0).any()) {
    throw Error(ErrorCode::kRankDeficient,
                "normal matrix has an unconstrained parameter");
  }
  const Eigen::VectorXd inv_sqrt = diag.array().sqrt().inverse();
  const Eigen::MatrixXd scaled =
      inv_sqrt.asDiagonal() * n * inv_sqrt.asDiagonal();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
      scaled, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > kMaxConditionNumber) {
    throw Error(ErrorCode::kRankDeficient,
                "normal matrix condition number exceeds 1e12");
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(scaled);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kRankDeficient,
                "normal matrix is not positive definite");
  }
  const Eigen::VectorXd scaled_b = inv_sqrt.asDiagonal() * b;
  return inv_sqrt.asDiagonal() * llt.solve(scaled_b);
}

SimilarityTransform ApplyUpdate(const SimilarityTransform& t,
                                const Eigen::VectorXd& update) {
  const double scale = update.size() > 6 ? t.scale() + update[6] : t.scale();
  return SimilarityTransform(t.translation() + update.head<3>(),
                             t.omega() + update[3], t.phi() + update[4],
                             t.kappa() + update[5], scale);
}

double RejectBlunders(std::vector<Correspondence>& correspondences, double k) {
  if (!(k > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "k must be positive");
  }
  std::size_t used = 0;
  for (Correspondence& c : correspondences) {
    if (c.status == CorrespondenceStatus::kBlunder) {
      c.status = CorrespondenceStatus::kUsed;
    }
    used += c.status == CorrespondenceStatus::kUsed;
  }
  if (used < 2) {
    throw Error(ErrorCode::kNoCorrespondences,
                "fewer than two valid correspondences");
  }

  double delta = 0.0;
  bool applied = false;
  while (true) {
    double sum = 0.0;
    for (const Correspondence& c : correspondences) {
      if (c.status == CorrespondenceStatus::kUsed) sum += c.residual;
    }
    const double mean = sum / static_cast<double>(used);
    double ss = 0.0;
    for (const Correspondence& c : correspondences) {
      if (c.status == CorrespondenceStatus::kUsed) {
        ss += (c.residual - mean) * (c.residual - mean);
      }
    }
    const double pass_delta = std::sqrt(ss / static_cast<double>(used - 1));
    const double threshold = k * pass_delta;

    std::size_t flagged = 0;
    for (const Correspondence& c : correspondences) {
      flagged += c.status == CorrespondenceStatus::kUsed &&
                 std::abs(c.residual) > threshold;
    }
    if (flagged == 0) {
      return pass_delta;
    }
    if (used - flagged < 2) {
      return applied ? delta : pass_delta;
    }
    for (Correspondence& c : correspondences) {
      if (c.status == CorrespondenceStatus::kUsed &&
          std::abs(c.residual) > threshold) {
        c.status = CorrespondenceStatus::kBlunder;
      }
    }
    used -= flagged;
    delta = pass_delta;
    applied = true;
  }
}

FixedEvaluation EvaluateFixed(const PointCloud& cloud,
                              const SimilarityTransform& t,
                              const SpatialIndex& index, double k,
                              double max_dist, int num_threads) {
  FixedEvaluation result;
  result.correspondences =
      FindCorrespondences(cloud, t, index, max_dist, num_threads);
  result.delta = RejectBlunders(result.correspondences, k);
  return result;
}

RegistrationResult Register(const PointCloud& cloud, const SpatialIndex& index,
                            const RegistrationConfig& config) {
  config.Validate();
  if (cloud.empty()) {
    throw Error(ErrorCode::kNoCorrespondences, "search cloud is empty");
  }
  const int u = config.num_parameters();

  SimilarityTransform t = config.initial_transform;
  std::vector<Correspondence> corr =
      FindCorrespondences(cloud, t, index, config.max_dist, config.num_threads);
  double delta = RejectBlunders(corr, config.k_blunder);

  RegistrationResult result;
  result.log.push_back(MakeLog(0, delta, corr));

  bool last_small = false;
  while (true) {
    if (last_small) {
      result.converged = true;
      break;
    }
    if (result.iterations >= config.max_iterations) {
      break;
    }

    const Eigen::VectorXd update = SolveStep(corr, t, config);
    const double old_objective = UsedObjective(corr);
    const double tolerance =
        old_objective * kObjectiveRelativeTolerance +
        kObjectiveFloorPerPoint * static_cast<double>(corr.size());

    double step = 1.0;
    int halvings = 0;
    bool accepted = false;
    SimilarityTransform trial;
    std::vector<Correspondence> trial_corr;
    double trial_delta = delta;
    for (; halvings <= kMaxStepHalvings; ++halvings, step *= 0.5) {
      trial = ApplyUpdate(t, step * update);
      trial_corr = FindCorrespondences(cloud, trial, index, config.max_dist,
                                       config.num_threads);
      // Same observation set as the current objective.
      double new_objective = 0.0;
      for (std::size_t i = 0; i < corr.size(); ++i) {
        if (corr[i].status == CorrespondenceStatus::kUsed &&
            trial_corr[i].valid()) {
          new_objective += trial_corr[i].residual * trial_corr[i].residual;
        }
      }
      if (new_objective > old_objective + tolerance) continue;
      // The logged delta must not grow either; near the optimum a point
      // flipping in or out of the USED set can raise it.
      trial_delta = RejectBlunders(trial_corr, config.k_blunder);
      if (trial_delta <= delta * (1.0 + kObjectiveRelativeTolerance)) {
        accepted = true;
        break;
      }
    }
    const UpdateSize size = MeasureUpdate(step * update);
    if (!accepted) {
      // No descent left. At a minimum this is convergence; otherwise the
      // run stops without it.
      result.converged = IsSmall(MeasureUpdate(update), config);
      break;
    }

    t = trial;
    corr = std::move(trial_corr);
    delta = trial_delta;
    ++result.iterations;

    IterationLog log = MakeLog(result.iterations, delta, corr);
    log.translation_update = size.translation;
    log.rotation_update = size.rotation;
    log.scale_update = size.scale;
    log.step_halvings = halvings;
    result.log.push_back(log);
    last_small = IsSmall(size, config);
  }

  const StatusCounts counts = CountStatuses(corr);
  result.used_count = counts.used;
  result.blunder_count = counts.blunder;
  result.invalid_count = counts.invalid;
  if (counts.used <= static_cast<std::size_t>(u)) {
    throw Error(ErrorCode::kNoCorrespondences,
                "too few USED correspondences to estimate sigma0");
  }
  const double objective = UsedObjective(corr);
  result.sigma0 =
      std::sqrt(objective / static_cast<double>(counts.used - u));

  const NormalEquations eq = Assemble(corr, t, config.num_threads);
  const Eigen::MatrixXd n = eq.n.topLeftCorner(u, u);
  result.parameter_covariance =
      result.sigma0 * result.sigma0 *
      n.ldlt().solve(Eigen::MatrixXd::Identity(u, u));
  result.transform = t;
  result.correspondences = std::move(corr);
  return result;
}

}  // namespace surfmatch
