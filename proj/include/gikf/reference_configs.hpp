#pragma once

#include <cmath>

#include "gikf/config.hpp"
#include "gikf/matrix_ops.hpp"
#include "gikf/network.hpp"

namespace gikf {

// Reference experiment (a): scalar single-sensor classic Kalman filter.
inline ExperimentConfig reference_classic_kalman() {
  Matrix f(1, 1), q(1, 1), p0(1, 1), c(1, 1), r(1, 1);
  f << 1.0;
  q << 0.5;
  p0 << 2.0;
  c << 1.0;
  r << 1.0;
  SystemModel model(f, PsdMatrix(q), PsdMatrix(p0), {SensorModel(c, PsdMatrix(r))});
  Graph graph = Graph::complete(1);
  GossipDistribution dist =
      GossipDistribution::explicit_support({Matching::identity(1)}, {1.0});
  ExperimentConfig config{std::move(model), std::move(graph), std::move(dist)};
  config.horizon = 200;
  config.trials = 1;
  config.seed = 1;
  return config;
}

// Reference experiment (b): 3-node path, unstable scalar dynamics (F = 1.2),
// a single observing sensor in the middle, gossip weighted toward swaps so
// no token idles away from the observer for long.
inline ExperimentConfig reference_path3_unstable() {
  Matrix f(1, 1), q(1, 1), p0(1, 1), c_obs(1, 1), c_blind(1, 1), r(1, 1);
  f << 1.2;
  q << 1.0;
  p0 << 1.0;
  c_obs << 1.0;
  c_blind << 0.0;
  r << 1.0;
  SystemModel model(f, PsdMatrix(q), PsdMatrix(p0),
                    {SensorModel(c_blind, PsdMatrix(r)), SensorModel(c_obs, PsdMatrix(r)),
                     SensorModel(c_blind, PsdMatrix(r))});
  Graph graph = Graph::path(3);
  GossipDistribution dist = GossipDistribution::explicit_support(
      {Matching::identity(3), Matching::from_pairs(3, {{0, 1}}),
       Matching::from_pairs(3, {{1, 2}})},
      {0.10, 0.45, 0.45});
  ExperimentConfig config{std::move(model), std::move(graph), std::move(dist)};
  config.horizon = 500;
  config.trials = 100;
  config.seed = 7;
  config.snapshots = {5, 25, 100};
  return config;
}

// Variant of (b) with the observing sensor blinded; violates weak
// detectability and drives the negative-control criteria.
inline ExperimentConfig reference_path3_blinded() {
  ExperimentConfig config = reference_path3_unstable();
  config.model.sensors[1].C.setZero();
  return config;
}

// Reference experiment (c): M = 2 rotation dynamics, slightly expanding, two
// sensors that each observe one coordinate.
inline ExperimentConfig reference_rotation2() {
  const double rho = 1.05;
  const double theta = M_PI / 3.0;
  Matrix f(2, 2);
  f << rho * std::cos(theta), -rho * std::sin(theta), rho * std::sin(theta),
      rho * std::cos(theta);
  Matrix c0(1, 2), c1(1, 2), r(1, 1);
  c0 << 1.0, 0.0;
  c1 << 0.0, 1.0;
  r << 0.5;
  SystemModel model(f, PsdMatrix::scaled_identity(2, 0.2), PsdMatrix::identity(2),
                    {SensorModel(c0, PsdMatrix(r)), SensorModel(c1, PsdMatrix(r))});
  Graph graph = Graph::complete(2);
  GossipDistribution dist = GossipDistribution::explicit_support(
      {Matching::identity(2), Matching::from_pairs(2, {{0, 1}})}, {0.5, 0.5});
  ExperimentConfig config{std::move(model), std::move(graph), std::move(dist)};
  config.horizon = 200;
  config.trials = 100;
  config.seed = 11;
  config.snapshots = {5, 25, 100};
  return config;
}

}  // namespace gikf
