#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "gikf/detectability.hpp"
#include "gikf/filter_engine.hpp"
#include "gikf/matrix_ops.hpp"
#include "gikf/measure_lab.hpp"
#include "gikf/network.hpp"
#include "gikf/parallel.hpp"
#include "gikf/reference_configs.hpp"
#include "gikf/rng.hpp"

namespace gikf {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
};

namespace acceptance_detail {

inline Matrix random_psd(int dim, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix z(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) z(i, j) = gauss(rng);
  return scale * (z * z.transpose());
}

inline SystemModel random_model(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  Matrix f(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) f(i, j) = gauss(rng);
  const int m_n = 1 + static_cast<int>(coin(rng) * dim) % dim;
  Matrix c = Matrix::Zero(m_n, dim);
  if (coin(rng) > 0.25) {
    for (int i = 0; i < m_n; ++i)
      for (int j = 0; j < dim; ++j) c(i, j) = gauss(rng);
  }
  Matrix r = random_psd(m_n, rng) + 0.5 * Matrix::Identity(m_n, m_n);
  Matrix q = random_psd(dim, rng) + 0.1 * Matrix::Identity(dim, dim);
  return SystemModel(f, PsdMatrix(q), PsdMatrix(random_psd(dim, rng)),
                     {SensorModel(c, PsdMatrix(r))});
}

// Textbook two-stage Kalman filter in Joseph form; an algebraically distinct
// route to the same predicted covariance.
struct TextbookKalman {
  Vector xhat;
  Matrix p;

  void step(const SystemModel& model, int n, const Vector& y) {
    const SensorModel& sensor = model.sensors[n];
    const Matrix& c = sensor.C;
    const Matrix s = c * p * c.transpose() + sensor.R.mat();
    const Matrix k = p * c.transpose() * s.inverse();
    const Vector x_filt = xhat + k * (y - c * xhat);
    const Matrix i_kc = Matrix::Identity(p.rows(), p.cols()) - k * c;
    const Matrix p_filt = i_kc * p * i_kc.transpose() + k * sensor.R.mat() * k.transpose();
    xhat = model.F * x_filt;
    p = model.F * p_filt * model.F.transpose() + model.Q.mat();
  }
};

inline std::string format_double(double v) {
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

}  // namespace acceptance_detail

// 1. Token iterates equal the permuted sensor covariances at every step.
inline CriterionResult criterion_swap_identity(unsigned workers) {
  const auto config = reference_path3_unstable();
  const int runs = 100;
  const int horizon = 500;
  std::vector<double> worst(runs, 0.0);

  parallel_for_trials(runs, workers, [&](std::size_t r) {
    const std::uint64_t trial_seed = derive_seed(config.seed, r);
    auto truth_rng = make_rng(derive_seed(trial_seed, 0));
    Truth truth = generate_truth(config.model, horizon, truth_rng);
    NetworkTrace trace =
        NetworkTrace::generate(config.distribution, horizon, derive_seed(trial_seed, 1));
    GikfSimulator sim(config.model, std::move(truth), trace);

    const int n_sensors = config.model.sensor_count();
    std::vector<int> positions(n_sensors);
    std::iota(positions.begin(), positions.end(), 0);
    std::vector<PsdMatrix> token(n_sensors, config.model.P0);

    double worst_run = 0.0;
    for (int t = 0; t < horizon; ++t) {
      const Matching& a = trace.matchings[t];
      positions = advance_particles(positions, a);
      for (int n = 0; n < n_sensors; ++n) {
        token[n] = riccati_step(config.model, positions[n], token[n]);
      }
      sim.step();
      for (int n = 0; n < n_sensors; ++n) {
        const Matrix& lhs = token[n].mat();
        const Matrix& rhs = sim.state().states[positions[n]].P.mat();
        const double scale = std::max(1.0, lhs.cwiseAbs().maxCoeff());
        worst_run = std::max(worst_run, (lhs - rhs).cwiseAbs().maxCoeff() / scale);
      }
    }
    worst[r] = worst_run;
  });

  const double max_rel = *std::max_element(worst.begin(), worst.end());
  return {1, "swap-identity", max_rel <= 1e-12,
          "max relative discrepancy " + acceptance_detail::format_double(max_rel) +
              " over 100 runs, T=500 (tolerance 1e-12)"};
}

// 2. Single-sensor GIKF equals a textbook Kalman filter.
inline CriterionResult criterion_kalman_oracle(unsigned) {
  const auto config = reference_classic_kalman();
  const int horizon = 200;
  auto truth_rng = make_rng(derive_seed(config.seed, 0));
  Truth truth = generate_truth(config.model, horizon, truth_rng);
  NetworkTrace trace = NetworkTrace::generate(config.distribution, horizon, 0);

  acceptance_detail::TextbookKalman oracle{Vector::Zero(1), config.model.P0.mat()};
  GikfSimulator sim(config.model, truth, std::move(trace));

  double worst_p = 0.0, worst_x = 0.0;
  for (int t = 0; t < horizon; ++t) {
    oracle.step(config.model, 0, truth.y[t][0]);
    sim.step();
    const auto& fs = sim.state().states[0];
    worst_p = std::max(worst_p, std::abs(fs.P.mat()(0, 0) - oracle.p(0, 0)) /
                                    std::max(1.0, std::abs(oracle.p(0, 0))));
    worst_x = std::max(worst_x, (fs.xhat - oracle.xhat).cwiseAbs().maxCoeff() /
                                    std::max(1.0, oracle.xhat.cwiseAbs().maxCoeff()));
  }
  const bool pass = worst_p <= 1e-9 && worst_x <= 1e-9;
  return {2, "kalman-oracle", pass,
          "max relative error: covariance " + acceptance_detail::format_double(worst_p) +
              ", estimate " + acceptance_detail::format_double(worst_x) + " (tolerance 1e-9)"};
}

// 3. Operator properties on randomized instances.
inline CriterionResult criterion_operator_properties(unsigned) {
  const int reps = 10000;
  auto rng = make_rng(0xa11ce);
  std::uniform_real_distribution<double> lam(0.05, 0.95);
  std::uniform_real_distribution<double> log_scale(-1.0, 3.0);
  int fail_order = 0, fail_floor = 0, fail_dom = 0, fail_sub = 0;

  for (int rep = 0; rep < reps; ++rep) {
    const int dim = 1 + rep % 3;
    const SystemModel model = acceptance_detail::random_model(dim, rng);
    const double scale = std::pow(10.0, log_scale(rng));
    const PsdMatrix x(acceptance_detail::random_psd(dim, rng, scale));
    const PsdMatrix y(x.mat() + acceptance_detail::random_psd(dim, rng, scale));

    const PsdMatrix fx = riccati_step(model, 0, x);
    const PsdMatrix fy = riccati_step(model, 0, y);
    if (!psd_leq(fx, fy, order_tol(1e-9, fx, fy))) ++fail_order;
    if (!psd_leq(model.Q, fx, order_tol(1e-9, model.Q, fx))) ++fail_floor;
    const PsdMatrix f0x = lyapunov_step(model, x);
    if (!psd_leq(fx, f0x, order_tol(1e-9, fx, f0x))) ++fail_dom;

    const double l = lam(rng);
    const PsdMatrix x_pd(x.mat() + 0.1 * Matrix::Identity(dim, dim));
    const PsdMatrix lhs = PsdMatrix::trusted(l * riccati_step(model, 0, x_pd).mat());
    const PsdMatrix rhs = riccati_step(model, 0, PsdMatrix::trusted(l * x_pd.mat()));
    if (!psd_leq(lhs, rhs, order_tol(1e-9, lhs, rhs))) ++fail_sub;
  }
  const bool pass = fail_order + fail_floor + fail_dom + fail_sub == 0;
  std::ostringstream detail;
  detail << reps << " instances each; failures: order " << fail_order << ", floor "
         << fail_floor << ", domination " << fail_dom << ", sublinearity " << fail_sub;
  return {3, "operator-properties", pass, detail.str()};
}

// 4. Certified walk's Riccati composition stays below alpha0 * I.
inline CriterionResult criterion_grammian_uniform_bound(unsigned) {
  const auto config = reference_path3_unstable();
  const auto cert = find_detectability_walk(config.model, config.distribution.mean_matrix(),
                                            default_walk_search_cap(config.model));
  if (!cert) return {4, "grammian-uniform-bound", false, "no certificate found"};

  auto rng = make_rng(0xb0b);
  std::uniform_real_distribution<double> log_scale(-2.0, 6.0);
  const double tol = 1e-8 * std::max(1.0, cert->alpha0);
  const PsdMatrix bound = PsdMatrix::scaled_identity(config.model.state_dim(), cert->alpha0);
  const int dim = config.model.state_dim();
  int failures = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    double scale;
    if (rep == 0) scale = 0.0;
    else if (rep == 1) scale = 1e6;
    else scale = std::pow(10.0, log_scale(rng));
    Matrix raw = acceptance_detail::random_psd(dim, rng, 1.0);
    const double nrm = symmetric_norm(raw);
    if (scale == 0.0 || nrm < 1e-12) raw.setZero();
    else raw *= scale / nrm;
    const PsdMatrix gx =
        compose_riccati_along_walk(config.model, cert->walk, PsdMatrix::trusted(raw));
    if (min_eigenvalue(bound.mat() - gx.mat()) < -tol) ++failures;
  }
  std::ostringstream detail;
  detail << "walk length " << cert->walk.size() << ", alpha0 "
         << acceptance_detail::format_double(cert->alpha0) << ", failures " << failures
         << "/1000 (rel tol 1e-8)";
  return {4, "grammian-uniform-bound", failures == 0, detail.str()};
}

// 5. Probed-sensor law equals the auxiliary chain law at finite t.
inline CriterionResult criterion_finite_t_identity(unsigned workers) {
  const auto config = reference_path3_unstable();
  const auto report = randomly_probed_sensor_test(config.model, config.distribution,
                                                  {5, 25, 100}, 10000, 0.99, 0xf1de, workers);
  double worst = 0.0, crit = 0.0;
  for (const auto& e : report.entries) {
    worst = std::max(worst, e.distance);
    crit = e.critical;
  }
  return {5, "finite-t-identity", report.pass,
          "max KS distance " + acceptance_detail::format_double(worst) + " vs critical " +
              acceptance_detail::format_double(crit) + " at t in {5,25,100}"};
}

// 6. Initial-condition forgetting of the auxiliary chain.
inline CriterionResult criterion_weak_consensus(unsigned workers) {
  const auto config = reference_path3_unstable();
  const std::vector<PsdMatrix> inits{PsdMatrix::zero(1), PsdMatrix::scaled_identity(1, 100.0)};
  const auto report = weak_consensus_test(config.model, config.distribution, inits, 200, 10000,
                                          0.05, 0xc0a5, workers);
  double worst = 0.0;
  for (const auto& e : report.entries) worst = std::max(worst, e.distance);
  return {6, "weak-consensus", report.pass,
          "max projected KS distance " + acceptance_detail::format_double(worst) +
              " (threshold 0.05, inits 0 and 100I, t=200)"};
}

// 7. Stochastic boundedness under weak detectability.
inline CriterionResult criterion_stochastic_boundedness(unsigned workers) {
  const auto config = reference_path3_unstable();
  const auto cert = find_detectability_walk(config.model, config.distribution.mean_matrix(),
                                            default_walk_search_cap(config.model));
  if (!cert) return {7, "stochastic-boundedness", false, "no certificate found"};
  const double a0 = cert->alpha0;
  const auto report = stochastic_boundedness_test(
      config.model, config.distribution, {a0, 2.0 * a0, 5.0 * a0, 10.0 * a0},
      {100, 500, 1000}, 10000, 0.05, 0.99, 0xb0de, workers);
  std::ostringstream detail;
  detail << "tail at J=10*alpha0: "
         << acceptance_detail::format_double(report.tail_map.back().worst_tail)
         << " (< 0.05 required), decreasing=" << report.tails_decreasing
         << ", N-scaled bound ok=" << report.scaled_bound_ok;
  return {7, "stochastic-boundedness", report.pass, detail.str()};
}

// 8. Negative control: blinding the observer breaks boundedness.
inline CriterionResult criterion_negative_control(unsigned workers) {
  const auto config = reference_path3_blinded();

  // With every sensor blind the covariance growth is deterministic.
  NetworkTrace trace = NetworkTrace::generate(config.distribution, 200, 99);
  CovarianceFlow flow(config.model);
  double norm_150 = 0.0, norm_200 = 0.0;
  for (int t = 0; t < 200; ++t) {
    flow.step(trace.matchings[t]);
    if (flow.t() == 150) norm_150 = spectral_norm(flow.sensor_covariance(0));
    if (flow.t() == 200) norm_200 = spectral_norm(flow.sensor_covariance(0));
  }

  const auto report = stochastic_boundedness_test(config.model, config.distribution,
                                                  {1e3, 1e6}, {100, 200}, 200, 0.05, 0.99,
                                                  0xdead, workers);
  const bool diverges = norm_200 > 1e6 && norm_200 > norm_150;
  const bool pass = diverges && !report.pass;
  std::ostringstream detail;
  detail << "median norm at t=200: " << acceptance_detail::format_double(norm_200)
         << " (> 1e6 required), boundedness test " << (report.pass ? "passed" : "failed")
         << " (failure required)";
  return {8, "detectability-negative-control", pass, detail.str()};
}

// 9. Pathwise majorization by the Lyapunov-restarted coupling.
inline CriterionResult criterion_pathwise_majorization(unsigned) {
  const auto config = reference_path3_unstable();
  const auto report = coupled_initial_condition_bound(config.model, config.distribution, 5, 50,
                                                      100, 1e-9, 0x9a30);
  std::ostringstream detail;
  detail << report.violations << " violations in " << report.comparisons
         << " comparisons over " << report.traces << " traces (s=5, T=50, rel tol 1e-9)";
  return {9, "pathwise-majorization", report.pass, detail.str()};
}

// 10. Particle chain statistics match the mean matrix and stay uniform.
inline CriterionResult criterion_particle_chain_statistics(unsigned) {
  const auto config = reference_path3_unstable();
  const Matrix abar = config.distribution.mean_matrix();
  const int n = config.graph.size();

  auto rng = make_rng(0x10ca1);
  const int steps = 100000;
  Matrix counts = Matrix::Zero(n, n);
  int pos = 0;
  for (int t = 0; t < steps; ++t) {
    const int next = sample_matching(config.distribution, rng).partner(pos);
    counts(pos, next) += 1.0;
    pos = next;
  }
  bool transitions_ok = true;
  double worst_sigmas = 0.0;
  for (int i = 0; i < n; ++i) {
    const double row_total = counts.row(i).sum();
    for (int j = 0; j < n; ++j) {
      const double p = abar(i, j);
      if (p <= 0.0 && counts(i, j) > 0.0) transitions_ok = false;
      if (p <= 0.0) continue;
      const double sigma = std::sqrt(p * (1.0 - p) / row_total);
      const double dev = std::abs(counts(i, j) / row_total - p) / sigma;
      worst_sigmas = std::max(worst_sigmas, dev);
      if (dev > 3.0) transitions_ok = false;
    }
  }

  const int trials = 100000;
  std::uniform_int_distribution<int> init(0, n - 1);
  std::vector<std::vector<int>> marginal(2, std::vector<int>(n, 0));
  for (int i = 0; i < trials; ++i) {
    int p = init(rng);
    for (int t = 1; t <= 100; ++t) {
      p = sample_matching(config.distribution, rng).partner(p);
      if (t == 10) ++marginal[0][p];
      if (t == 100) ++marginal[1][p];
    }
  }
  bool marginals_ok = true;
  const double pu = 1.0 / n;
  const double sigma_u = std::sqrt(pu * (1.0 - pu) / trials);
  for (const auto& m : marginal) {
    for (int node = 0; node < n; ++node) {
      const double dev = std::abs(m[node] / static_cast<double>(trials) - pu) / sigma_u;
      worst_sigmas = std::max(worst_sigmas, dev);
      if (dev > 3.0) marginals_ok = false;
    }
  }

  std::ostringstream detail;
  detail << "worst deviation " << acceptance_detail::format_double(worst_sigmas)
         << " sigma (3 sigma allowed); transitions " << (transitions_ok ? "ok" : "FAIL")
         << ", uniform marginals " << (marginals_ok ? "ok" : "FAIL");
  return {10, "particle-chain-statistics", transitions_ok && marginals_ok, detail.str()};
}

inline std::vector<CriterionResult> run_acceptance_suite(unsigned workers = 0) {
  std::vector<CriterionResult> results;
  results.push_back(criterion_swap_identity(workers));
  results.push_back(criterion_kalman_oracle(workers));
  results.push_back(criterion_operator_properties(workers));
  results.push_back(criterion_grammian_uniform_bound(workers));
  results.push_back(criterion_finite_t_identity(workers));
  results.push_back(criterion_weak_consensus(workers));
  results.push_back(criterion_stochastic_boundedness(workers));
  results.push_back(criterion_negative_control(workers));
  results.push_back(criterion_pathwise_majorization(workers));
  results.push_back(criterion_particle_chain_statistics(workers));
  return results;
}

}  // namespace gikf
