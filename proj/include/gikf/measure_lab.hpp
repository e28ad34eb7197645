#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gikf/filter_engine.hpp"
#include "gikf/matrix_ops.hpp"
#include "gikf/network.hpp"
#include "gikf/parallel.hpp"
#include "gikf/rng.hpp"
#include "gikf/stats.hpp"

namespace gikf {

// ---------------------------------------------------------------------------
// Scalar projections of PSD matrices. Weak convergence cannot be checked in
// matrix space from samples, so distribution comparisons run on a panel of
// continuous functionals: spectral norm, trace, max eigenvalue, and fixed
// random quadratic forms v'Xv.
// ---------------------------------------------------------------------------

struct Projection {
  enum class Kind { SpectralNorm, Trace, MaxEigenvalue, QuadraticForm };

  Kind kind = Kind::SpectralNorm;
  Vector v;  // QuadraticForm only
  std::string name = "spectral_norm";

  double apply(const PsdMatrix& x) const {
    switch (kind) {
      case Kind::SpectralNorm:
        return spectral_norm(x);
      case Kind::Trace:
        return x.mat().trace();
      case Kind::MaxEigenvalue: {
        Eigen::SelfAdjointEigenSolver<Matrix> es(x.mat(), Eigen::EigenvaluesOnly);
        return es.eigenvalues().maxCoeff();
      }
      case Kind::QuadraticForm:
        return v.dot(x.mat() * v);
    }
    return 0.0;
  }
};

// The seed fixes the quadratic-form directions, so the panel is a constant
// of the experiment rather than a fresh random object per call.
inline std::vector<Projection> default_projection_panel(int dim, int quadratic_forms = 2,
                                                        std::uint64_t seed = 0x9d1f) {
  std::vector<Projection> panel;
  panel.push_back({Projection::Kind::SpectralNorm, Vector(), "spectral_norm"});
  panel.push_back({Projection::Kind::Trace, Vector(), "trace"});
  panel.push_back({Projection::Kind::MaxEigenvalue, Vector(), "max_eigenvalue"});
  auto rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int k = 0; k < quadratic_forms; ++k) {
    Vector v(dim);
    for (int i = 0; i < dim; ++i) v[i] = gauss(rng);
    v.normalize();
    panel.push_back({Projection::Kind::QuadraticForm, v, "quadratic_form_" + std::to_string(k)});
  }
  return panel;
}

/// Sample set over PSD matrices with scalar-functional projections.
class EmpiricalMeasure {
 public:
  EmpiricalMeasure() = default;
  explicit EmpiricalMeasure(std::vector<PsdMatrix> samples) : samples_(std::move(samples)) {}

  void add(PsdMatrix x) { samples_.push_back(std::move(x)); }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const std::vector<PsdMatrix>& samples() const { return samples_; }
  int dim() const { return samples_.empty() ? 0 : samples_.front().dim(); }

  std::vector<double> project(const Projection& proj) const {
    std::vector<double> out;
    out.reserve(samples_.size());
    for (const auto& x : samples_) out.push_back(proj.apply(x));
    return out;
  }

  // Empirical P(||X|| >= j).
  double tail_probability(double j) const {
    if (samples_.empty()) return 0.0;
    std::size_t count = 0;
    for (const auto& x : samples_)
      if (spectral_norm(x) >= j) ++count;
    return static_cast<double>(count) / static_cast<double>(samples_.size());
  }

 private:
  std::vector<PsdMatrix> samples_;
};

/// Two-sample KS distance between the projected samples.
inline double distribution_distance(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                                    const Projection& proj) {
  if (a.empty() || b.empty()) {
    throw std::invalid_argument("distribution_distance: empty sample set");
  }
  return ks_statistic(a.project(proj), b.project(proj));
}

// ---------------------------------------------------------------------------
// Auxiliary stationary chain: p(0) uniform on the nodes, kernel Abar, and
// P(t+1) = f_{p(t)}(P(t)) with P(0) drawn from the initial sample set,
// independent of the chain. Its time-t law equals that of a uniformly probed
// sensor's covariance at the same t.
// ---------------------------------------------------------------------------

struct AuxiliaryChainSpec {
  Matrix abar;
  std::vector<PsdMatrix> init;  // point mass (size 1) or sample set

  AuxiliaryChainSpec(Matrix abar_in, std::vector<PsdMatrix> init_in)
      : abar(std::move(abar_in)), init(std::move(init_in)) {
    if (init.empty()) throw std::invalid_argument("AuxiliaryChainSpec: empty initial measure");
    if (!check_connectivity(abar).ok()) {
      throw std::invalid_argument("AuxiliaryChainSpec: Abar must be irreducible and aperiodic");
    }
  }
};

namespace detail {

class MarkovKernel {
 public:
  explicit MarkovKernel(const Matrix& abar) : n_(static_cast<int>(abar.rows())), cum_(n_) {
    for (int i = 0; i < n_; ++i) {
      cum_[i].resize(n_);
      double acc = 0.0;
      for (int j = 0; j < n_; ++j) {
        acc += abar(i, j);
        cum_[i][j] = acc;
      }
      cum_[i][n_ - 1] = 1.0;  // guard against rounding in the last bin
    }
  }

  int step(int from, std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double x = u(rng);
    const auto& row = cum_[from];
    return static_cast<int>(std::lower_bound(row.begin(), row.end(), x) - row.begin());
  }

  int uniform_state(std::mt19937_64& rng) const {
    std::uniform_int_distribution<int> u(0, n_ - 1);
    return u(rng);
  }

 private:
  int n_;
  std::vector<std::vector<double>> cum_;
};

}  // namespace detail

/// One P(T) sample per trial; deterministic per (seed, trial index).
inline EmpiricalMeasure run_auxiliary_chain(const SystemModel& model,
                                            const AuxiliaryChainSpec& spec, int horizon,
                                            std::size_t trials, std::uint64_t seed,
                                            unsigned workers = 0) {
  const detail::MarkovKernel kernel(spec.abar);
  std::vector<PsdMatrix> out(trials, PsdMatrix::zero(model.state_dim()));
  parallel_for_trials(trials, workers, [&](std::size_t i) {
    auto rng = make_rng(derive_seed(seed, i));
    int p = kernel.uniform_state(rng);
    std::uniform_int_distribution<std::size_t> pick(0, spec.init.size() - 1);
    PsdMatrix x = spec.init[spec.init.size() == 1 ? 0 : pick(rng)];
    for (int t = 0; t < horizon; ++t) {
      x = riccati_step(model, p, x);
      p = kernel.step(p, rng);
    }
    out[i] = std::move(x);
  });
  return EmpiricalMeasure(std::move(out));
}

// Snapshot variant: samples of P(t) at each requested time from the same
// trials (times must be sorted ascending).
inline std::map<int, EmpiricalMeasure> run_auxiliary_chain_snapshots(
    const SystemModel& model, const AuxiliaryChainSpec& spec, const std::vector<int>& times,
    std::size_t trials, std::uint64_t seed, unsigned workers = 0) {
  const detail::MarkovKernel kernel(spec.abar);
  const int horizon = times.empty() ? 0 : times.back();
  std::map<int, std::vector<PsdMatrix>> slots;
  for (int t : times) slots.emplace(t, std::vector<PsdMatrix>(trials, PsdMatrix::zero(model.state_dim())));

  parallel_for_trials(trials, workers, [&](std::size_t i) {
    auto rng = make_rng(derive_seed(seed, i));
    int p = kernel.uniform_state(rng);
    std::uniform_int_distribution<std::size_t> pick(0, spec.init.size() - 1);
    PsdMatrix x = spec.init[spec.init.size() == 1 ? 0 : pick(rng)];
    auto store = [&](int t) {
      auto it = slots.find(t);
      if (it != slots.end()) it->second[i] = x;
    };
    store(0);
    for (int t = 0; t < horizon; ++t) {
      x = riccati_step(model, p, x);
      p = kernel.step(p, rng);
      store(t + 1);
    }
  });

  std::map<int, EmpiricalMeasure> out;
  for (auto& [t, samples] : slots) out.emplace(t, EmpiricalMeasure(std::move(samples)));
  return out;
}

// Mean matrix for statistical tests: exact when the distribution is
// explicit, Monte Carlo (10^5 draws) otherwise.
inline Matrix test_mean_matrix(const GossipDistribution& dist, std::uint64_t seed) {
  if (dist.is_explicit()) return dist.mean_matrix();
  auto rng = make_rng(seed);
  return dist.estimate_mean_matrix(100000, rng);
}

// ---------------------------------------------------------------------------
// Weak consensus: chains started from different initial covariances project
// to the same distribution at large t.
// ---------------------------------------------------------------------------

struct WeakConsensusReport {
  struct Entry {
    std::size_t init_a = 0, init_b = 0;
    std::string projection;
    double distance = 0.0;
  };
  std::vector<Entry> entries;
  double threshold = 0.0;
  bool pass = false;
};

inline WeakConsensusReport weak_consensus_test(const SystemModel& model,
                                               const GossipDistribution& dist,
                                               const std::vector<PsdMatrix>& inits, int horizon,
                                               std::size_t trials, double threshold,
                                               std::uint64_t seed, unsigned workers = 0) {
  if (inits.size() < 2) {
    throw std::invalid_argument("weak_consensus_test: need at least two initial conditions");
  }
  const Matrix abar = test_mean_matrix(dist, derive_seed(seed, 900));
  std::vector<EmpiricalMeasure> measures;
  measures.reserve(inits.size());
  for (std::size_t k = 0; k < inits.size(); ++k) {
    AuxiliaryChainSpec spec(abar, {inits[k]});
    measures.push_back(
        run_auxiliary_chain(model, spec, horizon, trials, derive_seed(seed, k), workers));
  }

  WeakConsensusReport report;
  report.threshold = threshold;
  report.pass = true;
  const auto panel = default_projection_panel(model.state_dim());
  for (std::size_t a = 0; a < measures.size(); ++a) {
    for (std::size_t b = a + 1; b < measures.size(); ++b) {
      for (const auto& proj : panel) {
        const double d = distribution_distance(measures[a], measures[b], proj);
        report.entries.push_back({a, b, proj.name, d});
        if (d >= threshold) report.pass = false;
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Finite-t identity: the covariance of a uniformly probed sensor and the
// auxiliary chain are equal in distribution at every t, not only in the
// limit. Tested as two-sample KS on each projection.
// ---------------------------------------------------------------------------

struct ProbedSensorReport {
  struct Entry {
    int t = 0;
    std::string projection;
    double distance = 0.0;
    double critical = 0.0;
    bool pass = false;
  };
  std::vector<Entry> entries;
  bool pass = true;
};

// probe_node < 0 draws q uniformly per trial (the theorem's setting); a
// fixed probe node is a negative control on asymmetric models.
inline ProbedSensorReport randomly_probed_sensor_test(const SystemModel& model,
                                                      const GossipDistribution& dist,
                                                      const std::vector<int>& times,
                                                      std::size_t trials, double confidence,
                                                      std::uint64_t seed, unsigned workers = 0,
                                                      int probe_node = -1) {
  std::vector<int> sorted_times = times;
  std::sort(sorted_times.begin(), sorted_times.end());
  const int horizon = sorted_times.empty() ? 0 : sorted_times.back();

  // GIKF side: per trial one probed sensor, matchings from their own stream.
  std::map<int, std::vector<PsdMatrix>> gikf_slots;
  for (int t : sorted_times)
    gikf_slots.emplace(t, std::vector<PsdMatrix>(trials, PsdMatrix::zero(model.state_dim())));
  parallel_for_trials(trials, workers, [&](std::size_t i) {
    auto probe_rng = make_rng(derive_seed(derive_seed(seed, i), 2));
    std::uniform_int_distribution<int> pick(0, model.sensor_count() - 1);
    const int q = probe_node >= 0 ? probe_node : pick(probe_rng);
    NetworkTrace trace =
        NetworkTrace::generate(dist, horizon, derive_seed(derive_seed(seed, i), 1));
    CovarianceFlow flow(model);
    auto store = [&](int t) {
      auto it = gikf_slots.find(t);
      if (it != gikf_slots.end()) it->second[i] = flow.sensor_covariance(q);
    };
    store(0);
    for (int t = 0; t < horizon; ++t) {
      flow.step(trace.matchings[t]);
      store(t + 1);
    }
  });

  // Auxiliary side, same initial covariance, independent seed stream.
  AuxiliaryChainSpec spec(test_mean_matrix(dist, derive_seed(seed, 901)), {model.P0});
  auto aux = run_auxiliary_chain_snapshots(model, spec, sorted_times, trials,
                                           derive_seed(seed, 902), workers);

  ProbedSensorReport report;
  const auto panel = default_projection_panel(model.state_dim());
  for (int t : sorted_times) {
    EmpiricalMeasure gikf_measure(std::move(gikf_slots.at(t)));
    const EmpiricalMeasure& aux_measure = aux.at(t);
    for (const auto& proj : panel) {
      const double d = distribution_distance(gikf_measure, aux_measure, proj);
      const double crit = ks_critical_value(gikf_measure.size(), aux_measure.size(), confidence);
      const bool ok = d < crit;
      report.entries.push_back({t, proj.name, d, crit, ok});
      if (!ok) report.pass = false;
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Stochastic dominance: token tails are dominated by the invariant measure's
// tails; on average over tokens the bound is tight from below.
// ---------------------------------------------------------------------------

struct DominanceReport {
  struct Entry {
    double alpha = 0.0;
    double token_tail = 0.0;   // P(||P_n(T)|| >= alpha)
    double measure_tail = 0.0; // mu-hat(||X|| >= alpha)
    double margin = 0.0;
    bool upper_ok = false;
  };
  struct LowerEntry {
    double alpha = 0.0;
    double mean_token_tail = 0.0;  // averaged over tokens, epsilon-enlarged set
    double measure_tail = 0.0;
    double margin = 0.0;
    bool lower_ok = false;
  };
  std::vector<Entry> entries;
  std::vector<LowerEntry> lower_entries;
  bool pass = true;
};

inline DominanceReport stochastic_dominance_test(const SystemModel& model,
                                                 const GossipDistribution& dist, int token,
                                                 const std::vector<double>& alphas, int horizon,
                                                 std::size_t trials, double confidence,
                                                 std::uint64_t seed, unsigned workers = 0,
                                                 double neighborhood_eps = 1e-9) {
  const int n_sensors = model.sensor_count();
  if (token < 0 || token >= n_sensors) {
    throw std::invalid_argument("stochastic_dominance_test: token out of range");
  }

  // Token-view norms for every starting node, one row per trial.
  std::vector<std::vector<double>> token_norms(trials, std::vector<double>(n_sensors, 0.0));
  parallel_for_trials(trials, workers, [&](std::size_t i) {
    NetworkTrace trace =
        NetworkTrace::generate(dist, horizon, derive_seed(derive_seed(seed, i), 1));
    CovarianceFlow flow(model);
    for (int t = 0; t < horizon; ++t) flow.step(trace.matchings[t]);
    for (int n = 0; n < n_sensors; ++n) {
      token_norms[i][n] = spectral_norm(flow.token_covariance(n));
    }
  });

  AuxiliaryChainSpec spec(test_mean_matrix(dist, derive_seed(seed, 901)), {model.P0});
  const EmpiricalMeasure mu =
      run_auxiliary_chain(model, spec, horizon, trials, derive_seed(seed, 902), workers);

  auto token_tail = [&](int n, double level) {
    std::size_t c = 0;
    for (const auto& row : token_norms)
      if (row[n] >= level) ++c;
    return static_cast<double>(c) / static_cast<double>(trials);
  };

  DominanceReport report;
  for (double alpha : alphas) {
    const double p_tok = token_tail(token, alpha);
    const double p_mu = mu.tail_probability(alpha);
    const double margin = binomial_margin(p_tok, trials, confidence) +
                          binomial_margin(p_mu, mu.size(), confidence);
    const bool ok = p_tok <= p_mu + margin;
    report.entries.push_back({alpha, p_tok, p_mu, margin, ok});
    if (!ok) report.pass = false;

    // Averaged lower bound on the epsilon-enlarged set {||X|| > alpha - eps}.
    double mean_tail = 0.0;
    for (int n = 0; n < n_sensors; ++n) mean_tail += token_tail(n, alpha - neighborhood_eps);
    mean_tail /= static_cast<double>(n_sensors);
    const double lower_margin = binomial_margin(mean_tail, trials, confidence) +
                                binomial_margin(p_mu, mu.size(), confidence);
    const bool lower_ok = mean_tail >= p_mu - lower_margin;
    report.lower_entries.push_back({alpha, mean_tail, p_mu, lower_margin, lower_ok});
    if (!lower_ok) report.pass = false;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Stochastic boundedness: the sensor-view tail map J -> sup_T P(||P_n(T)||
// >= J) must fall below eps_tail at the largest J, and each sensor tail is
// bounded by N x the auxiliary tail at the same (t, J).
// ---------------------------------------------------------------------------

struct BoundednessReport {
  struct TailEntry {
    double j = 0.0;
    double worst_tail = 0.0;  // max over sensors and times
  };
  struct ScaledEntry {
    int t = 0;
    int sensor = 0;
    double j = 0.0;
    double sensor_tail = 0.0;
    double scaled_aux_tail = 0.0;
    double margin = 0.0;
    bool ok = false;
  };
  std::vector<TailEntry> tail_map;
  std::vector<ScaledEntry> scaled_entries;
  bool tails_decreasing = false;
  bool tail_below_eps = false;
  bool scaled_bound_ok = false;
  bool pass = false;
};

inline BoundednessReport stochastic_boundedness_test(
    const SystemModel& model, const GossipDistribution& dist, const std::vector<double>& j_grid,
    const std::vector<int>& t_grid, std::size_t trials, double eps_tail, double confidence,
    std::uint64_t seed, unsigned workers = 0) {
  if (j_grid.empty() || t_grid.empty()) {
    throw std::invalid_argument("stochastic_boundedness_test: empty grid");
  }
  std::vector<int> times = t_grid;
  std::sort(times.begin(), times.end());
  const int horizon = times.back();
  const int n_sensors = model.sensor_count();

  // norms[time][trial][sensor]
  std::map<int, std::vector<std::vector<double>>> norms;
  for (int t : times) norms.emplace(t, std::vector<std::vector<double>>(trials));
  parallel_for_trials(trials, workers, [&](std::size_t i) {
    NetworkTrace trace =
        NetworkTrace::generate(dist, horizon, derive_seed(derive_seed(seed, i), 1));
    CovarianceFlow flow(model);
    auto store = [&](int t) {
      auto it = norms.find(t);
      if (it == norms.end()) return;
      auto& row = it->second[i];
      row.resize(n_sensors);
      for (int n = 0; n < n_sensors; ++n) row[n] = spectral_norm(flow.sensor_covariance(n));
    };
    store(0);
    for (int t = 0; t < horizon; ++t) {
      flow.step(trace.matchings[t]);
      store(t + 1);
    }
  });

  auto aux = run_auxiliary_chain_snapshots(
      model, AuxiliaryChainSpec(test_mean_matrix(dist, derive_seed(seed, 901)), {model.P0}),
      times, trials, derive_seed(seed, 902), workers);

  auto sensor_tail = [&](int t, int n, double j) {
    const auto& rows = norms.at(t);
    std::size_t c = 0;
    for (const auto& row : rows)
      if (row[n] >= j) ++c;
    return static_cast<double>(c) / static_cast<double>(trials);
  };

  BoundednessReport report;
  for (double j : j_grid) {
    double worst = 0.0;
    for (int t : times)
      for (int n = 0; n < n_sensors; ++n) worst = std::max(worst, sensor_tail(t, n, j));
    report.tail_map.push_back({j, worst});
  }
  report.tails_decreasing = true;
  for (std::size_t k = 1; k < report.tail_map.size(); ++k) {
    if (report.tail_map[k].worst_tail > report.tail_map[k - 1].worst_tail) {
      report.tails_decreasing = false;
    }
  }
  report.tail_below_eps = report.tail_map.back().worst_tail < eps_tail;

  report.scaled_bound_ok = true;
  for (int t : times) {
    for (double j : j_grid) {
      const double aux_tail = aux.at(t).tail_probability(j);
      for (int n = 0; n < n_sensors; ++n) {
        const double p = sensor_tail(t, n, j);
        const double margin =
            binomial_margin(p, trials, confidence) +
            static_cast<double>(n_sensors) * binomial_margin(aux_tail, trials, confidence);
        const bool ok = p <= static_cast<double>(n_sensors) * aux_tail + margin;
        report.scaled_entries.push_back({t, n, j, p, n_sensors * aux_tail, margin, ok});
        if (!ok) report.scaled_bound_ok = false;
      }
    }
  }
  report.pass = report.tails_decreasing && report.tail_below_eps && report.scaled_bound_ok;
  return report;
}

// ---------------------------------------------------------------------------
// Pathwise majorization: the token sequence started from P(0) is dominated,
// step by step on the same switching trace, by the sequence re-initialized
// at time s with the s-fold Lyapunov iterate of P(0).
// ---------------------------------------------------------------------------

struct CoupledBoundReport {
  int traces = 0;
  int comparisons = 0;
  int violations = 0;
  double worst_margin = 0.0;  // most negative min eigenvalue of majorizer - token
  bool pass = false;
};

inline CoupledBoundReport coupled_initial_condition_bound(const SystemModel& model,
                                                          const GossipDistribution& dist, int s,
                                                          int horizon, int traces,
                                                          double rel_tol, std::uint64_t seed) {
  if (s < 0 || s > horizon) {
    throw std::invalid_argument("coupled_initial_condition_bound: need 0 <= s <= horizon");
  }
  CoupledBoundReport report;
  report.traces = traces;

  PsdMatrix lyap_iterate = model.P0;
  for (int k = 0; k < s; ++k) lyap_iterate = lyapunov_step(model, lyap_iterate);

  const int n_sensors = model.sensor_count();
  for (int trace_idx = 0; trace_idx < traces; ++trace_idx) {
    NetworkTrace trace = NetworkTrace::generate(dist, horizon, derive_seed(seed, trace_idx));
    std::vector<int> positions(n_sensors);
    std::iota(positions.begin(), positions.end(), 0);

    std::vector<PsdMatrix> token(n_sensors, model.P0);
    std::vector<PsdMatrix> major(n_sensors, lyap_iterate);
    bool major_live = (s == 0);

    auto compare_all = [&]() {
      for (int n = 0; n < n_sensors; ++n) {
        const double tol = rel_tol * std::max({1.0, spectral_norm(token[n]), spectral_norm(major[n])});
        const double gap = min_eigenvalue(major[n].mat() - token[n].mat());
        report.worst_margin = std::min(report.worst_margin, gap);
        ++report.comparisons;
        if (gap < -tol) ++report.violations;
      }
    };

    if (major_live) compare_all();
    for (int t = 0; t < horizon; ++t) {
      positions = advance_particles(positions, trace.matchings[t]);
      for (int n = 0; n < n_sensors; ++n) {
        token[n] = riccati_step(model, positions[n], token[n]);
        if (major_live) major[n] = riccati_step(model, positions[n], major[n]);
      }
      if (t + 1 == s) {
        for (int n = 0; n < n_sensors; ++n) major[n] = lyap_iterate;
        major_live = true;
      }
      if (major_live && t + 1 >= s) compare_all();
    }
  }
  report.pass = (report.violations == 0);
  return report;
}

}  // namespace gikf
