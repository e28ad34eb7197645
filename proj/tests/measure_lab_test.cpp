#include <gtest/gtest.h>

#include <cmath>

#include "gikf/measure_lab.hpp"
#include "gikf/reference_configs.hpp"
#include "gikf/stats.hpp"

namespace gikf {
namespace {

Matrix scalar(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return m;
}

TEST(KsStatistic, BasicCases) {
  EXPECT_DOUBLE_EQ(ks_statistic({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}), 0.0);
  EXPECT_DOUBLE_EQ(ks_statistic({1.0, 2.0}, {5.0, 6.0}), 1.0);  // disjoint supports
  EXPECT_THROW(ks_statistic({}, {1.0}), std::invalid_argument);
  // Matches the classical large-sample critical scale.
  EXPECT_NEAR(ks_critical_value(10000, 10000, 0.99), 0.023, 5e-4);
}

TEST(NormalQuantile, StandardValues) {
  EXPECT_NEAR(normal_quantile(0.975), 1.959964, 1e-5);
  EXPECT_NEAR(normal_quantile(0.995), 2.575829, 1e-5);
  EXPECT_NEAR(normal_quantile(0.5), 0.0, 1e-12);
}

TEST(AuxiliaryChain, DegenerateSingleNodeIsDeterministic) {
  const auto config = reference_classic_kalman();
  AuxiliaryChainSpec spec(Matrix::Identity(1, 1), {config.model.P0});
  const auto measure = run_auxiliary_chain(config.model, spec, 30, 16, 5);
  ASSERT_EQ(measure.size(), 16u);
  PsdMatrix expected = config.model.P0;
  for (int t = 0; t < 30; ++t) expected = riccati_step(config.model, 0, expected);
  for (const auto& x : measure.samples()) {
    EXPECT_DOUBLE_EQ(x.mat()(0, 0), expected.mat()(0, 0));
  }
}

TEST(AuxiliaryChain, ZeroHorizonReturnsInitialMeasure) {
  const auto config = reference_path3_unstable();
  AuxiliaryChainSpec spec(config.distribution.mean_matrix(), {PsdMatrix(scalar(4.0))});
  const auto measure = run_auxiliary_chain(config.model, spec, 0, 8, 5);
  for (const auto& x : measure.samples()) EXPECT_DOUBLE_EQ(x.mat()(0, 0), 4.0);
}

TEST(AuxiliaryChain, StableDynamicsBoundedByLyapunovFixedPoint) {
  Matrix f(1, 1);
  f << 0.8;
  SystemModel model(f, PsdMatrix(scalar(0.5)), PsdMatrix(scalar(3.0)),
                    {SensorModel(scalar(0.0), PsdMatrix(scalar(1.0))),
                     SensorModel(scalar(1.0), PsdMatrix(scalar(1.0)))});
  const auto dist = GossipDistribution::explicit_support(
      {Matching::identity(2), Matching::from_pairs(2, {{0, 1}})}, {0.5, 0.5});
  AuxiliaryChainSpec spec(dist.mean_matrix(), {model.P0});
  const auto measure = run_auxiliary_chain(model, spec, 200, 500, 6);

  // Iterate the Lyapunov map to (numerical) fixed point; it dominates.
  PsdMatrix lyap = model.P0;
  for (int k = 0; k < 400; ++k) lyap = lyapunov_step(model, lyap);
  const double bound = spectral_norm(lyap) + 1e-9;
  for (const auto& x : measure.samples()) EXPECT_LE(spectral_norm(x), bound);
}

TEST(DistributionDistance, IdenticalAndDisjoint) {
  EmpiricalMeasure a, b;
  for (int i = 1; i <= 50; ++i) {
    a.add(PsdMatrix(scalar(i)));
    b.add(PsdMatrix(scalar(i + 100)));
  }
  const Projection norm_proj{Projection::Kind::SpectralNorm, Vector(), "spectral_norm"};
  EXPECT_DOUBLE_EQ(distribution_distance(a, a, norm_proj), 0.0);
  EXPECT_DOUBLE_EQ(distribution_distance(a, b, norm_proj), 1.0);
}

TEST(DistributionDistance, TwoDrawsFromSameChainBelowCritical) {
  const auto config = reference_path3_unstable();
  AuxiliaryChainSpec spec(config.distribution.mean_matrix(), {config.model.P0});
  const auto a = run_auxiliary_chain(config.model, spec, 50, 10000, 1001);
  const auto b = run_auxiliary_chain(config.model, spec, 50, 10000, 1002);
  const Projection norm_proj{Projection::Kind::SpectralNorm, Vector(), "spectral_norm"};
  const double d = distribution_distance(a, b, norm_proj);
  EXPECT_LT(d, ks_critical_value(10000, 10000, 0.99));
}

TEST(WeakConsensus, IdenticalInitsSitAtNoiseFloor) {
  const auto config = reference_path3_unstable();
  const std::vector<PsdMatrix> inits{PsdMatrix(scalar(1.0)), PsdMatrix(scalar(1.0))};
  const auto report =
      weak_consensus_test(config.model, config.distribution, inits, 60, 4000, 0.05, 21);
  EXPECT_TRUE(report.pass);
}

TEST(WeakConsensus, ZeroHorizonDistinctPointMassesAreFar) {
  const auto config = reference_path3_unstable();
  const std::vector<PsdMatrix> inits{PsdMatrix(scalar(0.0)), PsdMatrix(scalar(100.0))};
  const auto report =
      weak_consensus_test(config.model, config.distribution, inits, 0, 500, 0.05, 22);
  EXPECT_FALSE(report.pass);
  for (const auto& e : report.entries) EXPECT_DOUBLE_EQ(e.distance, 1.0);
}

TEST(WeakConsensus, ForgettingIsMonotoneUpToNoise) {
  const auto config = reference_path3_unstable();
  const std::vector<PsdMatrix> inits{PsdMatrix(scalar(0.0)), PsdMatrix(scalar(100.0))};
  double prev = 2.0;
  for (int t : {1, 5, 20, 80}) {
    const auto report =
        weak_consensus_test(config.model, config.distribution, inits, t, 6000, 2.0, 23);
    double worst = 0.0;
    for (const auto& e : report.entries) worst = std::max(worst, e.distance);
    EXPECT_LT(worst, prev + 0.05);  // sampling slack
    prev = worst;
  }
  EXPECT_LT(prev, 0.05);
}

TEST(ProbedSensor, SingleNodeReducesToSameDeterministicIterate) {
  const auto config = reference_classic_kalman();
  const auto report = randomly_probed_sensor_test(config.model, config.distribution, {5, 20},
                                                  500, 0.99, 31);
  EXPECT_TRUE(report.pass);
  for (const auto& e : report.entries) EXPECT_DOUBLE_EQ(e.distance, 0.0);
}

TEST(ProbedSensor, BiasedProbeIsFlaggedOnAsymmetricModel) {
  // Probing the observer always is distinguishable from the uniform law.
  const auto config = reference_path3_unstable();
  const auto report = randomly_probed_sensor_test(config.model, config.distribution, {25},
                                                  4000, 0.99, 32, 0, /*probe_node=*/1);
  EXPECT_FALSE(report.pass);
}

TEST(Dominance, TrivialThresholds) {
  const auto config = reference_path3_unstable();
  const auto report = stochastic_dominance_test(config.model, config.distribution, 0,
                                                {0.0, 1e9}, 40, 2000, 0.99, 41);
  ASSERT_EQ(report.entries.size(), 2u);
  // alpha = 0: both tails are exactly 1.
  EXPECT_DOUBLE_EQ(report.entries[0].token_tail, 1.0);
  EXPECT_DOUBLE_EQ(report.entries[0].measure_tail, 1.0);
  // alpha far beyond every observed norm: both 0.
  EXPECT_DOUBLE_EQ(report.entries[1].token_tail, 0.0);
  EXPECT_DOUBLE_EQ(report.entries[1].measure_tail, 0.0);
  EXPECT_TRUE(report.pass);
}

TEST(Dominance, MidQuantileHoldsOnUnstableModel) {
  const auto config = reference_path3_unstable();
  const auto report = stochastic_dominance_test(config.model, config.distribution, 1,
                                                {3.0, 6.0, 12.0}, 150, 8000, 0.99, 42);
  EXPECT_TRUE(report.pass);
}

TEST(Boundedness, StableDynamicsCollapseAtSmallJ) {
  Matrix f(1, 1);
  f << 0.7;
  SystemModel model(f, PsdMatrix(scalar(0.3)), PsdMatrix(scalar(1.0)),
                    {SensorModel(scalar(0.0), PsdMatrix(scalar(1.0))),
                     SensorModel(scalar(1.0), PsdMatrix(scalar(1.0)))});
  const auto dist = GossipDistribution::explicit_support(
      {Matching::identity(2), Matching::from_pairs(2, {{0, 1}})}, {0.5, 0.5});
  const auto report =
      stochastic_boundedness_test(model, dist, {1.0, 2.0, 5.0}, {50, 100}, 2000, 0.05, 0.99, 51);
  EXPECT_TRUE(report.pass);
  EXPECT_DOUBLE_EQ(report.tail_map.back().worst_tail, 0.0);
}

TEST(CoupledBound, ZeroRestartIsIdentical) {
  const auto config = reference_path3_unstable();
  const auto report =
      coupled_initial_condition_bound(config.model, config.distribution, 0, 30, 20, 1e-9, 61);
  EXPECT_TRUE(report.pass);
  // With s = 0 the two sequences coincide, so the worst margin is ~0.
  EXPECT_NEAR(report.worst_margin, 0.0, 1e-12);
}

TEST(CoupledBound, OrderingHoldsOnRandomTraces) {
  const auto config = reference_path3_unstable();
  const auto report =
      coupled_initial_condition_bound(config.model, config.distribution, 5, 50, 30, 1e-9, 62);
  EXPECT_TRUE(report.pass);
  EXPECT_EQ(report.violations, 0);
}

TEST(ProbedSensor, MatrixCaseIdentityHolds) {
  // M = 2 exercises the genuinely multivariate projections.
  const auto config = reference_rotation2();
  const auto report = randomly_probed_sensor_test(config.model, config.distribution, {5, 25},
                                                  4000, 0.99, 33);
  EXPECT_TRUE(report.pass);
  for (const auto& e : report.entries) EXPECT_LT(e.distance, e.critical);
}

TEST(AuxiliaryChain, KernelChainMarginalsStayUniform) {
  const auto config = reference_path3_unstable();
  const Matrix abar = config.distribution.mean_matrix();
  auto rng = make_rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> start(0, 2);
  const int trials = 100000;
  std::vector<std::vector<int>> marginal(2, std::vector<int>(3, 0));
  for (int i = 0; i < trials; ++i) {
    int p = start(rng);
    for (int t = 1; t <= 100; ++t) {
      const double draw = u(rng);
      double acc = 0.0;
      for (int next = 0; next < 3; ++next) {
        acc += abar(p, next);
        if (draw <= acc) {
          p = next;
          break;
        }
      }
      if (t == 10) ++marginal[0][p];
      if (t == 100) ++marginal[1][p];
    }
  }
  const double pu = 1.0 / 3.0;
  const double sigma = std::sqrt(pu * (1.0 - pu) / trials);
  for (const auto& m : marginal) {
    for (int node = 0; node < 3; ++node) {
      EXPECT_NEAR(m[node] / static_cast<double>(trials), pu, 3.0 * sigma);
    }
  }
}

TEST(Projections, PanelIsDeterministicAndApplies) {
  const auto panel_a = default_projection_panel(2, 2);
  const auto panel_b = default_projection_panel(2, 2);
  ASSERT_EQ(panel_a.size(), 5u);
  for (std::size_t k = 0; k < panel_a.size(); ++k) {
    EXPECT_EQ(panel_a[k].name, panel_b[k].name);
    if (panel_a[k].kind == Projection::Kind::QuadraticForm) {
      EXPECT_TRUE(panel_a[k].v.isApprox(panel_b[k].v));
    }
  }
  Matrix m(2, 2);
  m << 2.0, 0.0, 0.0, 1.0;
  const PsdMatrix x(m);
  EXPECT_DOUBLE_EQ(panel_a[0].apply(x), 2.0);  // spectral norm
  EXPECT_DOUBLE_EQ(panel_a[1].apply(x), 3.0);  // trace
  EXPECT_DOUBLE_EQ(panel_a[2].apply(x), 2.0);  // max eigenvalue
}

}  // namespace
}  // namespace gikf
