#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "gikf/matrix_ops.hpp"
#include "gikf/network.hpp"

namespace gikf {

/// Network Grammian G = sum_n C_n' C_n; full rank suffices for weak
/// detectability when F is invertible.
inline PsdMatrix network_grammian(const SystemModel& model) {
  Matrix g = Matrix::Zero(model.state_dim(), model.state_dim());
  for (const auto& sensor : model.sensors) g += sensor.C.transpose() * sensor.C;
  return PsdMatrix::trusted(std::move(g));
}

/// Observability Grammian accumulated along a walk (0-based node ids):
///   G_w = sum_i (F^(i-1))' C_{n_i}' C_{n_i} F^(i-1).
inline PsdMatrix walk_grammian(const SystemModel& model, const std::vector<int>& walk) {
  if (walk.empty()) throw std::invalid_argument("walk_grammian: empty walk");
  const int m = model.state_dim();
  Matrix g = Matrix::Zero(m, m);
  Matrix fpow = Matrix::Identity(m, m);
  for (std::size_t i = 0; i < walk.size(); ++i) {
    const int n = walk[i];
    if (n < 0 || n >= model.sensor_count()) {
      throw std::invalid_argument("walk_grammian: node out of range");
    }
    const Matrix& c = model.sensors[n].C;
    g += fpow.transpose() * c.transpose() * c * fpow;
    fpow = model.F * fpow;
  }
  return PsdMatrix::trusted(std::move(g));
}

// Invertibility threshold for Grammians.
inline double grammian_tolerance(const Matrix& g) { return 1e-8 * (1.0 + g.trace()); }

/// Noise-weighted Grammian sum_i (F^(i-1))' C' R^-1 C F^(i-1); invertible
/// whenever the plain walk Grammian is, since every R is positive definite.
inline PsdMatrix modified_walk_grammian(const SystemModel& model, const std::vector<int>& walk) {
  if (walk.empty()) throw std::invalid_argument("modified_walk_grammian: empty walk");
  const int m = model.state_dim();
  Matrix g = Matrix::Zero(m, m);
  Matrix fpow = Matrix::Identity(m, m);
  for (int n : walk) {
    const SensorModel& sensor = model.sensors[n];
    if (!sensor.is_blind()) {
      const Matrix rc = detail::spd_solve(sensor.R.mat(), sensor.C, "modified_walk_grammian");
      g += fpow.transpose() * sensor.C.transpose() * rc * fpow;
    }
    fpow = model.F * fpow;
  }
  return PsdMatrix::trusted(std::move(g));
}

/// Uniform bound on the walk's Riccati composition: the exact error
/// covariance of the linear estimator x_bar = F^l Gt^-1 sum_t (F^(t-1))' C'
/// R^-1 y_t of x_{l+1}. Its error is a fixed linear map of the process and
/// measurement noises, independent of the initial covariance, so
///   g_w(X) <= alpha0 * I  for every PSD X
/// by optimality of the Kalman filter.
inline double alpha0_bound(const SystemModel& model, const std::vector<int>& walk) {
  const int m = model.state_dim();
  const int len = static_cast<int>(walk.size());
  const PsdMatrix gt = modified_walk_grammian(model, walk);
  if (min_eigenvalue(gt.mat()) <= grammian_tolerance(gt.mat())) {
    throw NumericalError("alpha0_bound: modified walk Grammian is singular");
  }

  std::vector<Matrix> fpow(len + 1);  // fpow[k] = F^k
  fpow[0] = Matrix::Identity(m, m);
  for (int k = 1; k <= len; ++k) fpow[k] = model.F * fpow[k - 1];

  Eigen::LLT<Matrix> gt_llt(gt.mat());
  const Matrix fl_gtinv = fpow[len] * gt_llt.solve(Matrix::Identity(m, m));

  // H_t = (F^(t-1))' C' R^-1 C, the t-th normal-equation block (1-based t).
  std::vector<Matrix> h(len + 1, Matrix::Zero(m, m));
  for (int t = 1; t <= len; ++t) {
    const SensorModel& sensor = model.sensors[walk[t - 1]];
    if (!sensor.is_blind()) {
      h[t] = fpow[t - 1].transpose() * sensor.C.transpose() *
             detail::spd_solve(sensor.R.mat(), sensor.C, "alpha0_bound");
    }
  }

  Matrix cov = Matrix::Zero(m, m);
  // Process noise w_s enters the true state as F^(l-s) w_s and the estimate
  // through every later observation.
  for (int s = 1; s <= len; ++s) {
    Matrix coeff = fpow[len - s];
    for (int t = s + 1; t <= len; ++t) coeff -= fl_gtinv * h[t] * fpow[t - 1 - s];
    cov += coeff * model.Q.mat() * coeff.transpose();
  }
  // The measurement-noise block telescopes: sum_t B_t R B_t' with
  // B_t = F^l Gt^-1 (F^(t-1))' C' R^-1 collapses to F^l Gt^-1 (F^l)'.
  cov += fpow[len] * gt_llt.solve(fpow[len].transpose());
  return symmetric_norm(symmetrize(cov));
}

/// Certificate of weak detectability: a covering walk with invertible
/// Grammian and the uniform bound alpha0 on its Riccati composition.
struct WalkCertificate {
  std::vector<int> walk;
  PsdMatrix grammian;
  double grammian_min_eig = 0.0;
  double alpha0 = 0.0;
};

/// Riccati composition along a walk, g_w(X) = f_{n_l} o ... o f_{n_1}(X).
inline PsdMatrix compose_riccati_along_walk(const SystemModel& model,
                                            const std::vector<int>& walk, PsdMatrix x) {
  for (int n : walk) x = riccati_step(model, n, x);
  return x;
}

namespace detail {

struct WalkSearchState {
  std::vector<int> walk;
  std::uint64_t visited = 0;  // bitmask over nodes
  Matrix grammian;
};

// G1 dominates G2 when G1 - G2 is PSD; extending both by the same suffix
// preserves the order, so dominated states can never beat their dominators.
inline bool psd_dominates(const Matrix& g1, const Matrix& g2) {
  return min_eigenvalue(g1 - g2) >= -1e-12 * (1.0 + symmetric_norm(g1));
}

}  // namespace detail

/// Breadth-first search for a detectability walk: expands along positive
/// entries of Abar, keeps per (node, visited-set) only PSD-maximal Grammians,
/// accepts on full node coverage plus invertible Grammian. Exhausting
/// max_len without success is inconclusive, not a disproof.
inline std::optional<WalkCertificate> find_detectability_walk(const SystemModel& model,
                                                              const Matrix& abar,
                                                              int max_len) {
  const int n_nodes = static_cast<int>(abar.rows());
  if (n_nodes != model.sensor_count()) {
    throw std::invalid_argument("find_detectability_walk: Abar size != sensor count");
  }
  if (n_nodes > 63) {
    throw std::invalid_argument("find_detectability_walk: more than 63 nodes unsupported");
  }
  if (!check_connectivity(abar).irreducible) {
    throw std::invalid_argument("find_detectability_walk: Abar must be irreducible");
  }
  const int m = model.state_dim();
  const std::uint64_t full_mask = (n_nodes == 64) ? ~0ULL : ((1ULL << n_nodes) - 1);

  std::vector<Matrix> fpow(static_cast<std::size_t>(std::max(max_len, 1)));
  fpow[0] = Matrix::Identity(m, m);
  for (std::size_t k = 1; k < fpow.size(); ++k) fpow[k] = model.F * fpow[k - 1];

  auto term = [&](int node, int depth) {
    const Matrix& c = model.sensors[node].C;
    return Matrix(fpow[depth].transpose() * c.transpose() * c * fpow[depth]);
  };

  auto accept = [&](const detail::WalkSearchState& s) -> std::optional<WalkCertificate> {
    if (s.visited != full_mask) return std::nullopt;
    const double lo = min_eigenvalue(s.grammian);
    if (lo <= grammian_tolerance(s.grammian)) return std::nullopt;
    WalkCertificate cert{s.walk, PsdMatrix::trusted(s.grammian), lo, 0.0};
    try {
      cert.alpha0 = alpha0_bound(model, s.walk);
    } catch (const NumericalError&) {
      return std::nullopt;  // keep searching for a numerically solid walk
    }
    return cert;
  };

  // Antichain cap per (node, visited-set); exceeding it only costs
  // completeness, never soundness.
  constexpr std::size_t kMaxPerBucket = 16;

  std::vector<detail::WalkSearchState> frontier;
  for (int v = 0; v < n_nodes; ++v) {
    detail::WalkSearchState s{{v}, 1ULL << v, term(v, 0)};
    if (auto cert = accept(s)) return cert;
    frontier.push_back(std::move(s));
  }

  for (int depth = 1; depth < max_len; ++depth) {
    std::vector<detail::WalkSearchState> next;
    for (const auto& s : frontier) {
      const int u = s.walk.back();
      for (int v = 0; v < n_nodes; ++v) {
        if (abar(u, v) <= 0.0) continue;
        detail::WalkSearchState ext;
        ext.walk = s.walk;
        ext.walk.push_back(v);
        ext.visited = s.visited | (1ULL << v);
        ext.grammian = s.grammian + term(v, depth);
        if (auto cert = accept(ext)) return cert;
        next.push_back(std::move(ext));
      }
    }
    // Dominance pruning within (node, visited) buckets.
    std::vector<detail::WalkSearchState> pruned;
    for (auto& cand : next) {
      bool dominated = false;
      for (const auto& kept : pruned) {
        if (kept.walk.back() == cand.walk.back() && kept.visited == cand.visited &&
            detail::psd_dominates(kept.grammian, cand.grammian)) {
          dominated = true;
          break;
        }
      }
      if (dominated) continue;
      std::erase_if(pruned, [&](const detail::WalkSearchState& kept) {
        return kept.walk.back() == cand.walk.back() && kept.visited == cand.visited &&
               detail::psd_dominates(cand.grammian, kept.grammian);
      });
      std::size_t bucket = 0;
      for (const auto& kept : pruned) {
        if (kept.walk.back() == cand.walk.back() && kept.visited == cand.visited) ++bucket;
      }
      if (bucket < kMaxPerBucket) pruned.push_back(std::move(cand));
    }
    frontier = std::move(pruned);
    if (frontier.empty()) break;
  }
  return std::nullopt;
}

inline int default_walk_search_cap(const SystemModel& model) {
  return 4 * model.sensor_count() * model.state_dim();
}

/// Largest k with alpha^(2k) * alpha0 + (alpha^(2k) - 1)/(alpha^2 - 1) *
/// normQ <= J; 0 when not even k = 0 qualifies. Requires alpha > 1 (the
/// stable case needs no horizon).
inline int boundedness_horizon(double alpha, double alpha0, double norm_q, double j) {
  if (alpha <= 1.0) {
    throw std::invalid_argument("boundedness_horizon: alpha must exceed 1");
  }
  int k = 0;
  for (;;) {
    const double a2k = std::pow(alpha, 2.0 * (k + 1));
    if (!std::isfinite(a2k)) return k;
    const double bound = a2k * alpha0 + (a2k - 1.0) / (alpha * alpha - 1.0) * norm_q;
    if (bound > j) return k;
    ++k;
  }
}

}  // namespace gikf
