#include "surfmatch/registration.h"

#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "support.h"
#include "surfmatch/error.h"
#include "surfmatch/raster.h"
#include "surfmatch/synth.h"

namespace surfmatch {
namespace {

using testing::BuildingScene;
using testing::ExampleTransform;

std::vector<Correspondence> WithResiduals(const std::vector<double>& r) {
  std::vector<Correspondence> out(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    out[i].source_index = i;
    out[i].residual = r[i];
    out[i].status = CorrespondenceStatus::kUsed;
  }
  return out;
}

// Horizontal 20 m x 20 m square at z = 0 made of 1 m cells.
SurfaceMesh FlatMesh() {
  SceneSpec spec;
  spec.kind = SceneKind::kPlane;
  spec.extent_x = 20.0;
  spec.extent_y = 20.0;
  spec.gsd = 1.0;
  spec.amplitude = 0.0;
  return MakeScene(spec).mesh;
}

// Points strictly inside the footprint, on the surface.
PointCloud InteriorSamples(const SpatialIndex& index, double half_width,
                           int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-half_width, half_width);
  PointCloud cloud;
  while (static_cast<int>(cloud.size()) < n) {
    const Point3 top(u(rng), u(rng), 100.0);
    const auto foot = index.ClosestPoint(Point3(top.x(), top.y(), 0.0), 50.0);
    if (!foot || foot->on_boundary) continue;
    // Drop onto the surface along the vertical through the foot's facet.
    const Vec3& n = foot->normal;
    const double dz =
        n.dot(foot->point - Point3(top.x(), top.y(), 0.0)) / n.z();
    cloud.Add(Point3(top.x(), top.y(), dz));
  }
  return cloud;
}

class BuildingSceneTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    scene_ = new Scene(MakeScene(BuildingScene()));
    index_ = new SpatialIndex(BuildIndex(scene_->mesh));
  }
  static void TearDownTestSuite() {
    delete index_;
    delete scene_;
  }
  static PerturbedCloud Search(double noise, double blunders) {
    PerturbationSpec p;
    p.transform = ExampleTransform();
    p.noise_sigma = noise;
    p.blunder_fraction = blunders;
    p.blunder_magnitude = 5.0;
    p.seed = 1;
    return Perturb(scene_->samples, p);
  }
  static Scene* scene_;
  static SpatialIndex* index_;
};

Scene* BuildingSceneTest::scene_ = nullptr;
SpatialIndex* BuildingSceneTest::index_ = nullptr;

TEST(FindCorrespondencesTest, OnSurfaceCloudHasZeroResiduals) {
  const SpatialIndex index = BuildIndex(FlatMesh());
  const PointCloud cloud = InteriorSamples(index, 9.0, 500, 1);
  const auto corr = FindCorrespondences(cloud, SimilarityTransform(), index,
                                        kDefaultMaxDistance);
  ASSERT_EQ(corr.size(), cloud.size());
  for (const Correspondence& c : corr) {
    EXPECT_EQ(c.status, CorrespondenceStatus::kUsed);
    EXPECT_NEAR(c.residual, 0.0, 1e-12);
  }
}

TEST(FindCorrespondencesTest, FarPointIsInvalid) {
  const SpatialIndex index = BuildIndex(FlatMesh());
  const PointCloud cloud({Point3(0, 0, 0.1), Point3(30.0, 0, 0)});
  const auto corr = FindCorrespondences(cloud, SimilarityTransform(), index,
                                        10.0);
  EXPECT_EQ(corr[0].status, CorrespondenceStatus::kUsed);
  EXPECT_EQ(corr[1].status, CorrespondenceStatus::kInvalid);
  EXPECT_FALSE(corr[1].foot.has_value());
}

TEST(FindCorrespondencesTest, BoundaryFootIsInvalid) {
  const SpatialIndex index = BuildIndex(FlatMesh());
  // Just past the east edge of the footprint.
  const PointCloud cloud({Point3(9.9, 0.0, 0.2)});
  const auto corr =
      FindCorrespondences(cloud, SimilarityTransform(), index, 10.0);
  ASSERT_TRUE(corr[0].foot.has_value());
  EXPECT_TRUE(corr[0].foot->on_boundary);
  EXPECT_EQ(corr[0].status, CorrespondenceStatus::kInvalid);
}

TEST(FindCorrespondencesTest, LiftedCloudHasConstantResidual) {
  const SpatialIndex index = BuildIndex(FlatMesh());
  const PointCloud cloud = Apply(SimilarityTransform(Vec3(0, 0, 0.3), 0, 0, 0),
                                 InteriorSamples(index, 9.0, 300, 2));
  for (const Correspondence& c : FindCorrespondences(
           cloud, SimilarityTransform(), index, kDefaultMaxDistance)) {
    EXPECT_EQ(c.status, CorrespondenceStatus::kUsed);
    EXPECT_NEAR(c.residual, 0.3, 1e-12);
  }
}

TEST(FindCorrespondencesTest, IndependentOfThreadCount) {
  const Scene scene = MakeScene(BuildingScene(1.0));
  const SpatialIndex index = BuildIndex(scene.mesh);
  PerturbationSpec p;
  p.transform = ExampleTransform();
  p.noise_sigma = 0.05;
  const PointCloud cloud = Perturb(scene.samples, p).cloud;
  const auto one = FindCorrespondences(cloud, SimilarityTransform(), index,
                                       10.0, 1);
  const auto four = FindCorrespondences(cloud, SimilarityTransform(), index,
                                        10.0, 4);
  ASSERT_EQ(one.size(), four.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    EXPECT_EQ(one[i].status, four[i].status);
    EXPECT_EQ(one[i].residual, four[i].residual);
  }
}

TEST(JacobianRowTest, HorizontalFacetTranslationPartials) {
  const SpatialIndex index = BuildIndex(FlatMesh());
  const auto corr = FindCorrespondences(PointCloud({Point3(1.3, 2.2, 0.4)}),
                                        SimilarityTransform(), index, 10.0);
  const Eigen::VectorXd row =
      JacobianRow(corr[0], SimilarityTransform(), false);
  ASSERT_EQ(row.size(), 6);
  EXPECT_NEAR(row[0], 0.0, 1e-15);
  EXPECT_NEAR(row[1], 0.0, 1e-15);
  EXPECT_NEAR(row[2], 1.0, 1e-15);
}

TEST(JacobianRowTest, ScalePartialAtIdentityIsNormalDotPoint) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    testing::JacobianCase jc = testing::RandomJacobianCase(rng, false);
    const SimilarityTransform id;
    jc.c.transformed_point = jc.c.source_point;
    const Eigen::VectorXd row = JacobianRow(jc.c, id, true);
    ASSERT_EQ(row.size(), 7);
    EXPECT_NEAR(row[6], jc.c.foot->normal.dot(jc.c.source_point),
                1e-12 * (1 + jc.c.source_point.norm()));
  }
}

TEST(JacobianRowTest, MatchesCentralDifferencesOnInteriorFeet) {
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto jc = testing::RandomJacobianCase(rng, false);
    const Eigen::VectorXd row = JacobianRow(jc.c, jc.t, true);
    worst = std::max(worst, testing::RelativeError(
                                row, testing::FiniteDifferenceRow(jc, true)));
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(JacobianRowTest, MatchesCentralDifferencesOnEdgeFeet) {
  std::mt19937_64 rng(202);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto jc = testing::RandomJacobianCase(rng, true);
    const Eigen::VectorXd row = JacobianRow(jc.c, jc.t, true);
    worst = std::max(worst, testing::RelativeError(
                                row, testing::FiniteDifferenceRow(jc, true)));
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(SolveStepTest, ConstantOffsetGivesOppositeTranslation) {
  const Scene scene = MakeScene(BuildingScene(1.0));
  const SpatialIndex index = BuildIndex(scene.mesh);
  const PointCloud cloud = Apply(SimilarityTransform(Vec3(0, 0, 0.3), 0, 0, 0),
                                 scene.samples);
  RegistrationConfig config;
  auto corr = FindCorrespondences(cloud, SimilarityTransform(), index, 10.0);
  const Eigen::VectorXd update =
      SolveStep(corr, SimilarityTransform(), config);
  ASSERT_EQ(update.size(), 6);
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(6);
  expected[2] = -0.3;
  EXPECT_LT((update - expected).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(SolveStepTest, ConvergedConfigurationGivesZeroUpdate) {
  const Scene scene = MakeScene(BuildingScene(1.0));
  const SpatialIndex index = BuildIndex(scene.mesh);
  const auto corr =
      FindCorrespondences(scene.samples, SimilarityTransform(), index, 10.0);
  const Eigen::VectorXd update =
      SolveStep(corr, SimilarityTransform(), RegistrationConfig());
  EXPECT_LT(update.head<3>().norm(), 1e-9);
}

TEST(SolveStepTest, PlanarSceneWithScaleIsRankDeficient) {
  const SpatialIndex index = BuildIndex(FlatMesh());
  const PointCloud cloud = Apply(SimilarityTransform(Vec3(0, 0, 0.1), 0, 0, 0),
                                 InteriorSamples(index, 9.0, 400, 4));
  RegistrationConfig config;
  config.estimate_scale = true;
  const auto corr =
      FindCorrespondences(cloud, SimilarityTransform(), index, 10.0);
  try {
    SolveStep(corr, SimilarityTransform(), config);
    FAIL() << "expected RANK_DEFICIENT";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRankDeficient);
  }
}

TEST(SolveStepTest, TooFewObservationsThrow) {
  const SpatialIndex index = BuildIndex(FlatMesh());
  const auto corr = FindCorrespondences(
      PointCloud({Point3(0, 0, 1), Point3(1, 1, 1)}), SimilarityTransform(),
      index, 10.0);
  try {
    SolveStep(corr, SimilarityTransform(), RegistrationConfig());
    FAIL() << "expected NO_CORRESPONDENCES";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoCorrespondences);
  }
}

TEST(ApplyUpdateTest, SixParameterUpdateKeepsScaleBitExact) {
  const SimilarityTransform t(Vec3(1, 2, 3), 0.1, 0.2, 0.3, 1.0);
  Eigen::VectorXd update(6);
  update << 0.1, 0.2, 0.3, 0.01, 0.02, 0.03;
  const SimilarityTransform next = ApplyUpdate(t, update);
  EXPECT_EQ(next.scale(), 1.0);
  EXPECT_DOUBLE_EQ(next.tx(), 1.1);
  EXPECT_DOUBLE_EQ(next.kappa(), 0.33);
}

TEST(RejectBlundersTest, SymmetricResidualsKeepEverything) {
  auto corr = WithResiduals({0.1, -0.1, 0.1, -0.1});
  const double delta = RejectBlunders(corr, 5.0);
  EXPECT_NEAR(delta, 0.11547005383792516, 1e-12);
  EXPECT_EQ(CountStatuses(corr).used, 4u);
}

TEST(RejectBlundersTest, FlagsSingleLargeResidual) {
  std::vector<double> r(99, 0.01);
  r.push_back(5.0);
  auto corr = WithResiduals(r);
  const double delta = RejectBlunders(corr, 5.0);
  EXPECT_EQ(corr.back().status, CorrespondenceStatus::kBlunder);
  EXPECT_EQ(CountStatuses(corr).blunder, 1u);
  // Sample STD of the full set, the one that decided the rejection.
  EXPECT_NEAR(delta, 0.499, 1e-3);
}

TEST(RejectBlundersTest, VeryHighKRejectsNothing) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-7.0, 7.0);
  std::vector<double> r(1000);
  for (double& x : r) x = u(rng);
  auto corr = WithResiduals(r);
  RejectBlunders(corr, 100.0);
  EXPECT_EQ(CountStatuses(corr).blunder, 0u);
}

TEST(RejectBlundersTest, FlagsAreRecomputedEachCall) {
  auto corr = WithResiduals({0.1, -0.1, 0.2, -0.2, 0.15});
  corr[0].status = CorrespondenceStatus::kBlunder;
  RejectBlunders(corr, 5.0);
  EXPECT_EQ(corr[0].status, CorrespondenceStatus::kUsed);
}

TEST(RejectBlundersTest, InvalidEntriesAreUntouched) {
  auto corr = WithResiduals({0.1, -0.1, 0.2, 50.0});
  corr[3].status = CorrespondenceStatus::kInvalid;
  RejectBlunders(corr, 5.0);
  EXPECT_EQ(corr[3].status, CorrespondenceStatus::kInvalid);
  EXPECT_EQ(CountStatuses(corr).used, 3u);
}

TEST(RejectBlundersTest, FewerThanTwoUsedThrows) {
  auto corr = WithResiduals({0.1});
  try {
    RejectBlunders(corr, 5.0);
    FAIL() << "expected NO_CORRESPONDENCES";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoCorrespondences);
  }
}

TEST(RejectBlundersTest, FinalSetIsStableUnderItsOwnTest) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 0.02);
  std::uniform_real_distribution<double> big(0.5, 5.0);
  std::vector<double> r(20000);
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] = i % 10 == 0 ? big(rng) : g(rng);
  }
  auto corr = WithResiduals(r);
  const double delta = RejectBlunders(corr, 5.0);
  for (const Correspondence& c : corr) {
    if (c.status == CorrespondenceStatus::kUsed) {
      EXPECT_LE(std::abs(c.residual), 5.0 * delta);
    }
  }
  EXPECT_EQ(CountStatuses(corr).blunder, 2000u);
}

TEST(RegistrationConfigTest, Validates) {
  RegistrationConfig config;
  EXPECT_NO_THROW(config.Validate());
  config.k_blunder = 0.0;
  EXPECT_THROW(config.Validate(), Error);
  config = RegistrationConfig();
  config.max_iterations = 0;
  EXPECT_THROW(config.Validate(), Error);
  config = RegistrationConfig();
  config.max_dist = -1.0;
  EXPECT_THROW(config.Validate(), Error);
}

TEST(RegisterTest, OnSurfaceCloudIsAFixedPoint) {
  const Scene scene = MakeScene(BuildingScene(1.0));
  const SpatialIndex index = BuildIndex(scene.mesh);
  const RegistrationResult r =
      Register(scene.samples, index, RegistrationConfig());
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.iterations, 2);
  EXPECT_LT(r.transform.translation().norm(), 1e-6);
  EXPECT_LT(r.sigma0, 1e-9);
}

TEST_F(BuildingSceneTest, RecoversKnownTransformWithoutNoise) {
  const RegistrationResult r =
      Register(Search(0.0, 0.0).cloud, *index_, RegistrationConfig());
  const SimilarityTransform truth = ExampleTransform();
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.iterations, 10);
  EXPECT_LT((r.transform.translation() - truth.translation())
                .cwiseAbs()
                .maxCoeff(),
            1e-6);
  EXPECT_NEAR(r.transform.omega(), truth.omega(), 1e-8);
  EXPECT_NEAR(r.transform.phi(), truth.phi(), 1e-8);
  EXPECT_NEAR(r.transform.kappa(), truth.kappa(), 1e-8);
  EXPECT_EQ(r.transform.scale(), 1.0);
  EXPECT_EQ(r.used_count + r.blunder_count + r.invalid_count,
            scene_->samples.size());
  EXPECT_EQ(r.parameter_covariance.rows(), 6);
}

TEST_F(BuildingSceneTest, NoisyRecovery) {
  const RegistrationResult r =
      Register(Search(0.02, 0.0).cloud, *index_, RegistrationConfig());
  const SimilarityTransform truth = ExampleTransform();
  EXPECT_TRUE(r.converged);
  EXPECT_LT((r.transform.translation() - truth.translation())
                .cwiseAbs()
                .maxCoeff(),
            0.005);
  EXPECT_NEAR(r.transform.omega(), truth.omega(), 2e-4);
  EXPECT_NEAR(r.transform.phi(), truth.phi(), 2e-4);
  EXPECT_NEAR(r.transform.kappa(), truth.kappa(), 2e-4);
  EXPECT_GE(r.sigma0, 0.018);
  EXPECT_LE(r.sigma0, 0.022);
}

TEST_F(BuildingSceneTest, ContaminatedRecoveryAndMonotoneLog) {
  const RegistrationResult r =
      Register(Search(0.02, 0.1).cloud, *index_, RegistrationConfig());
  const SimilarityTransform truth = ExampleTransform();
  EXPECT_LT((r.transform.translation() - truth.translation())
                .cwiseAbs()
                .maxCoeff(),
            0.005);
  EXPECT_NEAR(r.transform.kappa(), truth.kappa(), 2e-4);
  const double fraction = static_cast<double>(r.blunder_count) /
                          static_cast<double>(scene_->samples.size());
  EXPECT_GE(fraction, 0.08);
  EXPECT_LE(fraction, 0.12);
  ASSERT_GE(r.log.size(), 2u);
  for (std::size_t i = 1; i < r.log.size(); ++i) {
    EXPECT_LE(r.log[i].delta, r.log[i - 1].delta * (1 + 1e-9)) << i;
  }
}

TEST_F(BuildingSceneTest, SixParameterScaleIsBitExact) {
  RegistrationConfig config;
  config.initial_transform = SimilarityTransform(Vec3(0.1, 0, 0), 0, 0, 0);
  const RegistrationResult r =
      Register(Search(0.02, 0.0).cloud, *index_, config);
  EXPECT_EQ(r.transform.scale(), 1.0);
}

TEST_F(BuildingSceneTest, Deterministic) {
  const PointCloud cloud = Search(0.02, 0.1).cloud;
  RegistrationConfig config;
  const RegistrationResult a = Register(cloud, *index_, config);
  config.num_threads = 4;
  const RegistrationResult b = Register(cloud, *index_, config);
  EXPECT_TRUE(a.transform == b.transform);
  EXPECT_EQ(a.sigma0, b.sigma0);
  EXPECT_EQ(a.iterations, b.iterations);
  EXPECT_EQ(a.blunder_count, b.blunder_count);
}

TEST_F(BuildingSceneTest, Equivariance) {
  const PointCloud cloud = Search(0.0, 0.0).cloud;
  const RegistrationResult base = Register(cloud, *index_, {});
  const SimilarityTransform g(Vec3(0.3, -0.2, 0.1), testing::Deg(0.5),
                              testing::Deg(-0.3), testing::Deg(0.8));
  const RegistrationResult moved = Register(Apply(g, cloud), *index_, {});
  const SimilarityTransform expected = Compose(base.transform, Invert(g));
  EXPECT_LT((moved.transform.translation() - expected.translation())
                .cwiseAbs()
                .maxCoeff(),
            1e-3);
}

TEST_F(BuildingSceneTest, EvaluateFixedSemantics) {
  const PointCloud cloud = Search(0.02, 0.1).cloud;
  const RegistrationResult r = Register(cloud, *index_, {});
  const FixedEvaluation high =
      EvaluateFixed(cloud, r.transform, *index_, 100.0, kDefaultMaxDistance);
  EXPECT_EQ(CountStatuses(high.correspondences).blunder, 0u);
  const FixedEvaluation low =
      EvaluateFixed(cloud, r.transform, *index_, 5.0, kDefaultMaxDistance);
  ASSERT_EQ(low.correspondences.size(), r.correspondences.size());
  for (std::size_t i = 0; i < low.correspondences.size(); ++i) {
    EXPECT_EQ(low.correspondences[i].status, r.correspondences[i].status);
  }
}

TEST(EvaluateFixedTest, IdentityOnSurfaceCloudIsZero) {
  const SpatialIndex index = BuildIndex(FlatMesh());
  const PointCloud cloud = InteriorSamples(index, 9.0, 200, 9);
  const FixedEvaluation e = EvaluateFixed(cloud, SimilarityTransform(), index,
                                          100.0, kDefaultMaxDistance);
  for (const Correspondence& c : e.correspondences) {
    EXPECT_EQ(c.status, CorrespondenceStatus::kUsed);
    EXPECT_NEAR(c.residual, 0.0, 1e-12);
  }
}

}  // namespace
}  // namespace surfmatch
