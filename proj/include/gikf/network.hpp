#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "gikf/matrix_ops.hpp"
#include "gikf/rng.hpp"

namespace gikf {

/// Undirected communication graph with mandatory self-loops.
class Graph {
 public:
  Graph(int n, const std::vector<std::pair<int, int>>& edges) : adj_(n, std::vector<bool>(n, false)) {
    if (n <= 0) throw std::invalid_argument("Graph: node count must be positive");
    for (int i = 0; i < n; ++i) adj_[i][i] = true;
    for (const auto& [u, v] : edges) {
      if (u < 0 || u >= n || v < 0 || v >= n) {
        throw std::invalid_argument("Graph: edge endpoint out of range");
      }
      adj_[u][v] = adj_[v][u] = true;
    }
  }

  static Graph path(int n) {
    std::vector<std::pair<int, int>> e;
    for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
    return Graph(n, e);
  }
  static Graph cycle(int n) {
    std::vector<std::pair<int, int>> e;
    for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
    if (n > 2) e.emplace_back(n - 1, 0);
    return Graph(n, e);
  }
  static Graph complete(int n) {
    std::vector<std::pair<int, int>> e;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) e.emplace_back(i, j);
    return Graph(n, e);
  }

  int size() const { return static_cast<int>(adj_.size()); }
  bool allows(int u, int v) const { return adj_[u][v]; }

  // Off-diagonal edges, each once.
  std::vector<std::pair<int, int>> edges() const {
    std::vector<std::pair<int, int>> e;
    for (int i = 0; i < size(); ++i)
      for (int j = i + 1; j < size(); ++j)
        if (adj_[i][j]) e.emplace_back(i, j);
    return e;
  }

  bool connected() const {
    std::vector<bool> seen(size(), false);
    std::vector<int> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < size(); ++v) {
        if (adj_[u][v] && !seen[v]) {
          seen[v] = true;
          stack.push_back(v);
        }
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
  }

 private:
  std::vector<std::vector<bool>> adj_;
};

/// A matching matrix stored as an involutive permutation: partner(partner(n))
/// == n, with exactly one partner per node (possibly itself).
class Matching {
 public:
  explicit Matching(std::vector<int> perm) : perm_(std::move(perm)) {
    const int n = static_cast<int>(perm_.size());
    for (int i = 0; i < n; ++i) {
      if (perm_[i] < 0 || perm_[i] >= n || perm_[perm_[i]] != i) {
        throw std::invalid_argument("Matching: permutation is not an involution");
      }
    }
  }

  static Matching identity(int n) {
    std::vector<int> p(n);
    std::iota(p.begin(), p.end(), 0);
    return Matching(std::move(p));
  }

  // Pairs (u, v) swapped; all other nodes map to themselves.
  static Matching from_pairs(int n, const std::vector<std::pair<int, int>>& pairs) {
    std::vector<int> p(n);
    std::iota(p.begin(), p.end(), 0);
    for (const auto& [u, v] : pairs) {
      if (u < 0 || u >= n || v < 0 || v >= n || p[u] != u || p[v] != v || u == v) {
        throw std::invalid_argument("Matching: invalid pair list");
      }
      p[u] = v;
      p[v] = u;
    }
    return Matching(std::move(p));
  }

  int size() const { return static_cast<int>(perm_.size()); }
  int partner(int n) const { return perm_[n]; }
  bool is_identity() const {
    for (int i = 0; i < size(); ++i)
      if (perm_[i] != i) return false;
    return true;
  }
  const std::vector<int>& perm() const { return perm_; }

  bool respects(const Graph& g) const {
    for (int i = 0; i < size(); ++i)
      if (!g.allows(i, perm_[i])) return false;
    return true;
  }

  Matrix to_matrix() const {
    Matrix m = Matrix::Zero(size(), size());
    for (int i = 0; i < size(); ++i) m(i, perm_[i]) = 1.0;
    return m;
  }

  bool operator==(const Matching& other) const { return perm_ == other.perm_; }

 private:
  std::vector<int> perm_;
};

/// The neighbor map ->(n, t) of a matching.
inline int neighbor(const Matching& a, int n) {
  if (n < 0 || n >= a.size()) throw std::invalid_argument("neighbor: node out of range");
  return a.partner(n);
}

/// One step of every particle: p_n <- ->(p_n, t). Positions stay a
/// permutation because matchings are bijections.
inline std::vector<int> advance_particles(const std::vector<int>& positions, const Matching& a) {
  std::vector<int> next(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) next[i] = a.partner(positions[i]);
  return next;
}

struct ConnectivityReport {
  bool irreducible = false;
  bool aperiodic = false;
  bool ok() const { return irreducible && aperiodic; }
};

/// Irreducibility (strong connectivity of the positive-entry digraph) and
/// aperiodicity (gcd of cycle lengths 1) of a row-stochastic matrix.
inline ConnectivityReport check_connectivity(const Matrix& abar) {
  const int n = static_cast<int>(abar.rows());
  if (n == 0 || abar.cols() != n) {
    throw std::invalid_argument("check_connectivity: matrix must be square and nonempty");
  }

  auto reachable = [&](bool transpose) {
    std::vector<bool> seen(n, false);
    std::vector<int> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < n; ++v) {
        const double w = transpose ? abar(v, u) : abar(u, v);
        if (w > 0.0 && !seen[v]) {
          seen[v] = true;
          stack.push_back(v);
        }
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
  };

  ConnectivityReport report;
  report.irreducible = reachable(false) && reachable(true);

  // Period via BFS levels: gcd over edges (u,v) of |level(u) + 1 - level(v)|.
  // A positive diagonal entry short-circuits to period 1.
  for (int i = 0; i < n; ++i) {
    if (abar(i, i) > 0.0) {
      report.aperiodic = true;
      return report;
    }
  }
  std::vector<int> level(n, -1);
  std::vector<int> queue{0};
  level[0] = 0;
  for (std::size_t h = 0; h < queue.size(); ++h) {
    const int u = queue[h];
    for (int v = 0; v < n; ++v) {
      if (abar(u, v) > 0.0 && level[v] < 0) {
        level[v] = level[u] + 1;
        queue.push_back(v);
      }
    }
  }
  long long g = 0;
  for (int u = 0; u < n; ++u) {
    if (level[u] < 0) continue;
    for (int v = 0; v < n; ++v) {
      if (abar(u, v) > 0.0 && level[v] >= 0) {
        g = std::gcd(g, static_cast<long long>(std::abs(level[u] + 1 - level[v])));
      }
    }
  }
  report.aperiodic = (g == 1);
  return report;
}

/// Distribution D over matching matrices. Either an explicit finite support
/// with weights (exact mean matrix) or the procedural gossip sampler (mean
/// matrix by Monte Carlo; its support can be exponentially large).
class GossipDistribution {
 public:
  static GossipDistribution explicit_support(std::vector<Matching> support,
                                             std::vector<double> weights) {
    if (support.empty() || support.size() != weights.size()) {
      throw std::invalid_argument("GossipDistribution: support/weights size mismatch");
    }
    double total = 0.0;
    for (double w : weights) {
      if (w < 0.0) throw std::invalid_argument("GossipDistribution: negative weight");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw std::invalid_argument("GossipDistribution: weights must sum to 1");
    }
    const int n = support.front().size();
    for (const auto& m : support) {
      if (m.size() != n) throw std::invalid_argument("GossipDistribution: mixed matching sizes");
    }
    GossipDistribution d;
    d.nodes_ = n;
    d.kind_ = Explicit{std::move(support), std::move(weights)};
    return d;
  }

  // With probability 1 - p_gossip the identity matching; otherwise a greedy
  // maximal matching built from a uniformly shuffled edge order, unmatched
  // nodes closed with self-loops.
  static GossipDistribution procedural(Graph graph, double p_gossip) {
    if (p_gossip < 0.0 || p_gossip > 1.0) {
      throw std::invalid_argument("GossipDistribution: p_gossip must be in [0,1]");
    }
    if (!graph.connected()) {
      throw std::invalid_argument("GossipDistribution: graph must be connected");
    }
    GossipDistribution d;
    d.nodes_ = graph.size();
    d.kind_ = Procedural{std::move(graph), p_gossip};
    return d;
  }

  int nodes() const { return nodes_; }
  bool is_explicit() const { return std::holds_alternative<Explicit>(kind_); }

  Matching sample(std::mt19937_64& rng) const {
    if (const auto* e = std::get_if<Explicit>(&kind_)) {
      std::discrete_distribution<int> pick(e->weights.begin(), e->weights.end());
      return e->support[pick(rng)];
    }
    const auto& p = std::get<Procedural>(kind_);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) >= p.p_gossip) return Matching::identity(nodes_);
    auto edges = p.graph.edges();
    if (edges.empty()) return Matching::identity(nodes_);
    std::shuffle(edges.begin(), edges.end(), rng);
    std::vector<int> perm(nodes_);
    std::iota(perm.begin(), perm.end(), 0);
    for (const auto& [u, v] : edges) {
      if (perm[u] == u && perm[v] == v) {
        perm[u] = v;
        perm[v] = u;
      }
    }
    return Matching(std::move(perm));
  }

  // Exact mean matrix; explicit distributions only.
  Matrix mean_matrix() const {
    const auto* e = std::get_if<Explicit>(&kind_);
    if (e == nullptr) {
      throw std::logic_error(
          "mean_matrix: procedural distribution has no closed form; use estimate_mean_matrix");
    }
    Matrix abar = Matrix::Zero(nodes_, nodes_);
    for (std::size_t k = 0; k < e->support.size(); ++k) {
      abar += e->weights[k] * e->support[k].to_matrix();
    }
    return abar;
  }

  Matrix estimate_mean_matrix(std::size_t samples, std::mt19937_64& rng) const {
    if (is_explicit()) return mean_matrix();
    Matrix abar = Matrix::Zero(nodes_, nodes_);
    for (std::size_t s = 0; s < samples; ++s) {
      const Matching a = sample(rng);
      for (int i = 0; i < nodes_; ++i) abar(i, a.partner(i)) += 1.0;
    }
    return abar / static_cast<double>(samples);
  }

  const std::vector<Matching>& support() const {
    const auto* e = std::get_if<Explicit>(&kind_);
    if (e == nullptr) throw std::logic_error("support: distribution is procedural");
    return e->support;
  }
  const std::vector<double>& weights() const {
    const auto* e = std::get_if<Explicit>(&kind_);
    if (e == nullptr) throw std::logic_error("weights: distribution is procedural");
    return e->weights;
  }
  double p_gossip() const {
    const auto* p = std::get_if<Procedural>(&kind_);
    if (p == nullptr) throw std::logic_error("p_gossip: distribution is explicit");
    return p->p_gossip;
  }

  // Index of a matching within the explicit support, if present.
  std::optional<int> support_index(const Matching& m) const {
    if (const auto* e = std::get_if<Explicit>(&kind_)) {
      for (std::size_t k = 0; k < e->support.size(); ++k) {
        if (e->support[k] == m) return static_cast<int>(k);
      }
    }
    return std::nullopt;
  }

 private:
  struct Explicit {
    std::vector<Matching> support;
    std::vector<double> weights;
  };
  struct Procedural {
    Graph graph;
    double p_gossip;
  };

  GossipDistribution() = default;

  int nodes_ = 0;
  std::variant<Explicit, Procedural> kind_ = Explicit{};
};

inline Matching sample_matching(const GossipDistribution& dist, std::mt19937_64& rng) {
  return dist.sample(rng);
}

inline GossipDistribution default_matching_distribution(const Graph& g, double p_gossip) {
  return GossipDistribution::procedural(g, p_gossip);
}

/// A realized matching sequence for slots 0..T-1. A(0) is pinned to the
/// identity (communication starts at slot 1); A(1), A(2), ... are i.i.d.
/// draws from the distribution.
struct NetworkTrace {
  std::vector<Matching> matchings;  // matchings[t] = A(t), one per slot
  std::uint64_t seed = 0;

  static NetworkTrace generate(const GossipDistribution& dist, int slots, std::uint64_t seed) {
    NetworkTrace trace;
    trace.seed = seed;
    auto rng = make_rng(seed);
    trace.matchings.reserve(static_cast<std::size_t>(slots));
    if (slots > 0) trace.matchings.push_back(Matching::identity(dist.nodes()));
    for (int t = 1; t < slots; ++t) trace.matchings.push_back(dist.sample(rng));
    return trace;
  }

  int slots() const { return static_cast<int>(matchings.size()); }
};

}  // namespace gikf
