#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gikf/matrix_ops.hpp"
#include "gikf/network.hpp"
#include "gikf/rng.hpp"

namespace gikf {

/// Filter state of one sensor: predicted estimate and its conditional
/// covariance.
struct FilterState {
  Vector xhat;
  PsdMatrix P;
};

/// Whole-network snapshot at time t. positions[n] is the current location of
/// the token that started at sensor n, i.e. states[positions[n]].P is that
/// token's covariance (the swap identity).
struct NetworkState {
  int t = 0;
  std::vector<FilterState> states;
  std::vector<int> positions;
  Vector truth;
};

/// Realized signal and observations: x[t] for t in [0, T],
/// y[t][n] for t in [0, T-1].
struct Truth {
  std::vector<Vector> x;
  std::vector<std::vector<Vector>> y;

  int horizon() const { return static_cast<int>(y.size()); }
};

/// Draws x_0 ~ N(0, P0), x_{t+1} = F x_t + w_t with w_t ~ N(0, Q), and
/// y_t^n = C_n x_t + v_t^n with v_t^n ~ N(0, R_n); all noises mutually
/// independent.
inline Truth generate_truth(const SystemModel& model, int horizon, std::mt19937_64& rng) {
  Truth truth;
  truth.x.reserve(static_cast<std::size_t>(horizon) + 1);
  truth.y.resize(horizon);

  const GaussianSampler init(model.P0.mat());
  const GaussianSampler process(model.Q.mat());
  std::vector<GaussianSampler> obs;
  obs.reserve(model.sensors.size());
  for (const auto& sensor : model.sensors) obs.emplace_back(sensor.R.mat());

  truth.x.push_back(init.sample(rng));
  for (int t = 0; t < horizon; ++t) {
    truth.y[t].reserve(model.sensors.size());
    for (int n = 0; n < model.sensor_count(); ++n) {
      truth.y[t].push_back(model.sensors[n].C * truth.x[t] + obs[n].sample(rng));
    }
    truth.x.push_back(model.F * truth.x[t] + process.sample(rng));
  }
  return truth;
}

inline NetworkState initial_network_state(const SystemModel& model, const Vector& x0) {
  NetworkState state;
  state.t = 0;
  state.states.assign(model.sensor_count(),
                      FilterState{Vector::Zero(model.state_dim()), model.P0});
  std::vector<int> pos(model.sensor_count());
  std::iota(pos.begin(), pos.end(), 0);
  state.positions = std::move(pos);
  state.truth = x0;
  return state;
}

/// One GIKF slot: communicating sensors swap their previous states per the
/// matching, then every sensor runs a Kalman predict-update on the adopted
/// state with its own observation. The covariance recursion is exactly
/// riccati_step on the adopted covariance.
inline NetworkState gikf_step(const SystemModel& model, const NetworkState& state,
                              const Matching& a, const std::vector<Vector>& y,
                              const Vector& next_truth) {
  const int n_sensors = model.sensor_count();
  if (a.size() != n_sensors) throw std::invalid_argument("gikf_step: matching size mismatch");
  if (static_cast<int>(y.size()) != n_sensors) {
    throw std::invalid_argument("gikf_step: one observation per sensor required");
  }

  NetworkState next;
  next.t = state.t + 1;
  next.truth = next_truth;
  next.positions = advance_particles(state.positions, a);
  next.states.reserve(n_sensors);

  for (int n = 0; n < n_sensors; ++n) {
    const FilterState& adopted = state.states[a.partner(n)];
    const SensorModel& sensor = model.sensors[n];

    PsdMatrix p_next = riccati_step(model, n, adopted.P);
    Vector xhat_next;
    if (sensor.is_blind()) {
      xhat_next = model.F * adopted.xhat;
    } else {
      const Matrix cp = sensor.C * adopted.P.mat();
      const Matrix s = symmetrize(cp * sensor.C.transpose() + sensor.R.mat());
      // K = F P C' S^-1; solve S K' = C P F' instead of forming S^-1.
      const Matrix gain_t =
          detail::spd_solve(s, cp * model.F.transpose(), "gikf_step");
      xhat_next = model.F * adopted.xhat +
                  gain_t.transpose() * (y[n] - sensor.C * adopted.xhat);
    }
    next.states.push_back(FilterState{std::move(xhat_next), std::move(p_next)});
  }
  return next;
}

/// Per-run scalar series plus full-matrix dumps at configured snapshot
/// times. Row t describes the state at time t together with the slot that
/// produced it: matching_id[t] identifies A(t-1) within an explicit support
/// (-1 for row 0 or off-support matchings), positions[t][n] is the token
/// alignment so that norm_P[t][positions[t][n]] is token n's covariance norm.
struct TrajectoryRecord {
  int horizon = 0;
  int num_sensors = 0;
  std::uint64_t seed = 0;
  bool connectivity_ok = true;
  std::vector<std::vector<double>> norm_P;   // [t][sensor]
  std::vector<std::vector<double>> sq_err;   // [t][sensor]
  std::vector<std::vector<int>> positions;   // [t][token]
  std::vector<int> matching_id;              // [t]
  std::map<int, std::vector<PsdMatrix>> snapshots;          // t -> per-sensor P
  std::map<int, std::vector<Vector>> snapshot_errors;       // t -> per-sensor x_t - xhat

  double particle_norm(int t, int token) const { return norm_P[t][positions[t][token]]; }
};

struct RunOptions {
  int horizon = 0;
  std::uint64_t seed = 0;
  std::vector<int> snapshot_times;
  // When set, the matching stream uses this seed instead of a stream derived
  // from `seed`; lets repetitions share a swap history while noises vary.
  std::optional<std::uint64_t> matching_seed;
};

/// Streams one GIKF run; callers step() through slots and read state().
class GikfSimulator {
 public:
  GikfSimulator(const SystemModel& model, Truth truth, NetworkTrace trace)
      : model_(model), truth_(std::move(truth)), trace_(std::move(trace)) {
    if (trace_.slots() < truth_.horizon()) {
      throw std::invalid_argument("GikfSimulator: trace shorter than truth horizon");
    }
    state_ = initial_network_state(model_, truth_.x[0]);
  }

  const NetworkState& state() const { return state_; }
  const Matching& matching_at(int t) const { return trace_.matchings[t]; }

  bool done() const { return state_.t >= truth_.horizon(); }

  void step() {
    if (done()) throw std::logic_error("GikfSimulator: horizon exhausted");
    const int t = state_.t;
    state_ = gikf_step(model_, state_, trace_.matchings[t], truth_.y[t], truth_.x[t + 1]);
  }

 private:
  const SystemModel& model_;
  Truth truth_;
  NetworkTrace trace_;
  NetworkState state_;
};

/// Covariance-only view of the GIKF: the predicted-covariance recursion is
/// autonomous given the matching sequence, so distributional studies of
/// P-hat need no signal, observations, or estimates. Covariances follow the
/// exact same riccati_step calls as the full engine.
class CovarianceFlow {
 public:
  explicit CovarianceFlow(const SystemModel& model)
      : model_(model), t_(0), states_(model.sensor_count(), model.P0) {
    positions_.resize(model.sensor_count());
    std::iota(positions_.begin(), positions_.end(), 0);
  }

  void step(const Matching& a) {
    positions_ = advance_particles(positions_, a);
    std::vector<PsdMatrix> next;
    next.reserve(states_.size());
    for (int n = 0; n < static_cast<int>(states_.size()); ++n) {
      next.push_back(riccati_step(model_, n, states_[a.partner(n)]));
    }
    states_ = std::move(next);
    ++t_;
  }

  int t() const { return t_; }
  // Sensor view: conditional covariance at sensor n.
  const PsdMatrix& sensor_covariance(int n) const { return states_[n]; }
  // Particle view: covariance of the token that started at sensor n.
  const PsdMatrix& token_covariance(int n) const { return states_[positions_[n]]; }
  const std::vector<int>& positions() const { return positions_; }

 private:
  const SystemModel& model_;
  int t_;
  std::vector<PsdMatrix> states_;
  std::vector<int> positions_;
};

namespace detail {

inline void record_row(TrajectoryRecord& rec, const NetworkState& state, int matching_id) {
  std::vector<double> norms, errs;
  norms.reserve(state.states.size());
  errs.reserve(state.states.size());
  for (const auto& fs : state.states) {
    norms.push_back(spectral_norm(fs.P));
    errs.push_back((state.truth - fs.xhat).squaredNorm());
  }
  rec.norm_P.push_back(std::move(norms));
  rec.sq_err.push_back(std::move(errs));
  rec.positions.push_back(state.positions);
  rec.matching_id.push_back(matching_id);
}

}  // namespace detail

/// Full deterministic run: seed -> truth stream + matching stream ->
/// trajectory record. Stream split: truth uses derive_seed(seed, 0),
/// matchings derive_seed(seed, 1).
inline TrajectoryRecord run_gikf(const SystemModel& model, const GossipDistribution& dist,
                                 const RunOptions& opts) {
  TrajectoryRecord rec;
  rec.horizon = opts.horizon;
  rec.num_sensors = model.sensor_count();
  rec.seed = opts.seed;

  if (dist.is_explicit()) {
    rec.connectivity_ok = check_connectivity(dist.mean_matrix()).ok();
  }

  auto truth_rng = make_rng(derive_seed(opts.seed, 0));
  Truth truth = generate_truth(model, opts.horizon, truth_rng);
  const std::uint64_t mseed =
      opts.matching_seed ? *opts.matching_seed : derive_seed(opts.seed, 1);
  NetworkTrace trace = NetworkTrace::generate(dist, opts.horizon, mseed);

  auto snapshot_wanted = [&](int t) {
    return std::find(opts.snapshot_times.begin(), opts.snapshot_times.end(), t) !=
           opts.snapshot_times.end();
  };
  auto take_snapshot = [&](const NetworkState& s) {
    std::vector<PsdMatrix> ps;
    std::vector<Vector> es;
    for (const auto& fs : s.states) {
      ps.push_back(fs.P);
      es.push_back(s.truth - fs.xhat);
    }
    rec.snapshots.emplace(s.t, std::move(ps));
    rec.snapshot_errors.emplace(s.t, std::move(es));
  };

  GikfSimulator sim(model, std::move(truth), std::move(trace));
  detail::record_row(rec, sim.state(), -1);
  if (snapshot_wanted(0)) take_snapshot(sim.state());

  for (int t = 0; t < opts.horizon; ++t) {
    const Matching& a = sim.matching_at(t);
    const int id = dist.support_index(a).value_or(-1);
    sim.step();
    detail::record_row(rec, sim.state(), id);
    if (snapshot_wanted(sim.state().t)) take_snapshot(sim.state());
  }
  return rec;
}

/// Consistency report for the recorded covariances: across repetitions that
/// share a swap history, e' P^-1 e should average the state dimension
/// (chi-square moments). `scale` rescales the recorded covariance and exists
/// so tests can demonstrate the mismatch alarm.
struct ConsistencyReport {
  struct Entry {
    int t = 0;
    int sensor = 0;
    double statistic = 0.0;
    std::size_t count = 0;
    bool consistent = false;
  };
  std::vector<Entry> entries;
  double lower = 0.0, upper = 0.0;
  bool all_consistent() const {
    for (const auto& e : entries)
      if (!e.consistent) return false;
    return !entries.empty();
  }
};

inline ConsistencyReport covariance_consistency_check(
    const std::vector<TrajectoryRecord>& records, const std::vector<int>& window,
    double band_sigmas = 4.0, double scale = 1.0) {
  if (records.empty()) throw std::invalid_argument("covariance_consistency_check: no records");
  if (records.front().snapshots.empty()) {
    throw std::invalid_argument("covariance_consistency_check: records carry no snapshots");
  }
  ConsistencyReport report;
  const double m =
      static_cast<double>(records.front().snapshots.begin()->second.front().dim());
  const double k = static_cast<double>(records.size());
  report.lower = m - band_sigmas * std::sqrt(2.0 * m / k);
  report.upper = m + band_sigmas * std::sqrt(2.0 * m / k);

  const int n_sensors = records.front().num_sensors;
  for (int t : window) {
    for (int n = 0; n < n_sensors; ++n) {
      double acc = 0.0;
      std::size_t count = 0;
      for (const auto& rec : records) {
        const auto ps = rec.snapshots.find(t);
        const auto es = rec.snapshot_errors.find(t);
        if (ps == rec.snapshots.end() || es == rec.snapshot_errors.end()) continue;
        if (rec.matching_id != records.front().matching_id) {
          throw std::invalid_argument(
              "covariance_consistency_check: records must share a swap history");
        }
        const Matrix p = scale * ps->second[n].mat();
        const Vector& e = es->second[n];
        const Vector solved = detail::spd_solve(p, e, "covariance_consistency_check");
        acc += e.dot(solved);
        ++count;
      }
      if (count == 0) {
        throw std::invalid_argument("covariance_consistency_check: window time not snapshotted");
      }
      const double stat = acc / static_cast<double>(count);
      report.entries.push_back({t, n, stat, count,
                                stat >= report.lower && stat <= report.upper});
    }
  }
  return report;
}

}  // namespace gikf
