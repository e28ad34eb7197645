#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gikf/matrix_ops.hpp"
#include "gikf/network.hpp"

namespace gikf {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "1.0.0";

/// Configuration rejection with the offending field spelled out.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error("config field '" + field + "': " + message),
        field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct TestThresholds {
  double consensus_threshold = 0.05;
  double confidence = 0.99;
  double eps_tail = 0.05;
  std::vector<double> j_grid;  // empty: derived from the certificate
  std::vector<int> t_grid;     // empty: {horizon}
};

struct ExperimentConfig {
  ExperimentConfig(SystemModel m, Graph g, GossipDistribution d)
      : model(std::move(m)), graph(std::move(g)), distribution(std::move(d)) {}

  SystemModel model;
  Graph graph;
  GossipDistribution distribution;
  int horizon = 100;
  int trials = 1;
  std::uint64_t seed = 0;
  std::vector<int> snapshots;
  TestThresholds tests;
};

namespace detail {

inline Matrix parse_matrix(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) {
    throw ConfigError(field, "expected a nested array of numbers");
  }
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].size();
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols) {
      throw ConfigError(field, "ragged rows");
    }
    for (std::size_t k = 0; k < cols; ++k) {
      if (!j[i][k].is_number()) throw ConfigError(field, "non-numeric entry");
      m(i, k) = j[i][k].get<double>();
    }
  }
  return m;
}

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <typename T>
T field_or(const nlohmann::json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(key, "wrong type");
  }
}

}  // namespace detail

inline SystemModel parse_model(const nlohmann::json& j) {
  if (!j.contains("F")) throw ConfigError("model.F", "missing");
  if (!j.contains("Q")) throw ConfigError("model.Q", "missing");
  if (!j.contains("P0")) throw ConfigError("model.P0", "missing");
  if (!j.contains("sensors") || !j["sensors"].is_array() || j["sensors"].empty()) {
    throw ConfigError("model.sensors", "missing or empty");
  }

  const Matrix f = detail::parse_matrix(j["F"], "model.F");

  auto parse_psd = [&](const char* key) {
    const Matrix m = detail::parse_matrix(j[key], std::string("model.") + key);
    try {
      return PsdMatrix(m);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("model.") + key, e.what());
    }
  };
  PsdMatrix q = parse_psd("Q");
  PsdMatrix p0 = parse_psd("P0");

  std::vector<SensorModel> sensors;
  for (std::size_t n = 0; n < j["sensors"].size(); ++n) {
    const auto& js = j["sensors"][n];
    const std::string prefix = "model.sensors[" + std::to_string(n) + "]";
    if (!js.contains("C")) throw ConfigError(prefix + ".C", "missing");
    if (!js.contains("R")) throw ConfigError(prefix + ".R", "missing");
    const Matrix c = detail::parse_matrix(js["C"], prefix + ".C");
    const Matrix r = detail::parse_matrix(js["R"], prefix + ".R");
    try {
      sensors.emplace_back(c, PsdMatrix(r));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(prefix + ".R", e.what());
    }
  }

  try {
    return SystemModel(f, std::move(q), std::move(p0), std::move(sensors));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("model", e.what());
  }
}

inline Graph parse_graph(const nlohmann::json& j) {
  const std::string family = detail::field_or<std::string>(j, "family", "custom");
  const int nodes = detail::field_or<int>(j, "nodes", 0);
  if (nodes <= 0) throw ConfigError("graph.nodes", "must be a positive integer");
  if (family == "path") return Graph::path(nodes);
  if (family == "cycle") return Graph::cycle(nodes);
  if (family == "complete") return Graph::complete(nodes);
  if (family != "custom") throw ConfigError("graph.family", "unknown family '" + family + "'");
  std::vector<std::pair<int, int>> edges;
  for (const auto& e : detail::field_or<nlohmann::json>(j, "edges", nlohmann::json::array())) {
    if (!e.is_array() || e.size() != 2) throw ConfigError("graph.edges", "expected [u, v] pairs");
    edges.emplace_back(e[0].get<int>(), e[1].get<int>());
  }
  try {
    return Graph(nodes, edges);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("graph.edges", e.what());
  }
}

inline GossipDistribution parse_distribution(const nlohmann::json& j, const Graph& graph) {
  const std::string type = detail::field_or<std::string>(j, "type", "explicit");
  if (type == "procedural") {
    const double p = detail::field_or<double>(j, "p_gossip", 0.5);
    try {
      return GossipDistribution::procedural(graph, p);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("distribution.p_gossip", e.what());
    }
  }
  if (type != "explicit") throw ConfigError("distribution.type", "unknown type '" + type + "'");
  if (!j.contains("matchings") || !j.contains("weights")) {
    throw ConfigError("distribution", "explicit type needs 'matchings' and 'weights'");
  }
  std::vector<Matching> support;
  for (std::size_t k = 0; k < j["matchings"].size(); ++k) {
    const std::string field = "distribution.matchings[" + std::to_string(k) + "]";
    std::vector<int> perm;
    try {
      perm = j["matchings"][k].get<std::vector<int>>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(field, "expected a permutation array");
    }
    try {
      Matching m(std::move(perm));
      if (!m.respects(graph)) throw ConfigError(field, "matching uses a non-edge");
      support.push_back(std::move(m));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(field, e.what());
    }
  }
  std::vector<double> weights;
  try {
    weights = j["weights"].get<std::vector<double>>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("distribution.weights", "expected an array of numbers");
  }
  try {
    return GossipDistribution::explicit_support(std::move(support), std::move(weights));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("distribution.weights", e.what());
  }
}

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  const int version = detail::field_or<int>(j, "schema_version", kSchemaVersion);
  if (version != kSchemaVersion) {
    throw ConfigError("schema_version",
                      "unsupported version " + std::to_string(version) + ", expected " +
                          std::to_string(kSchemaVersion));
  }
  if (!j.contains("model")) throw ConfigError("model", "missing");
  if (!j.contains("graph")) throw ConfigError("graph", "missing");
  if (!j.contains("distribution")) throw ConfigError("distribution", "missing");

  SystemModel model = parse_model(j["model"]);
  Graph graph = parse_graph(j["graph"]);
  if (graph.size() != model.sensor_count()) {
    throw ConfigError("graph.nodes", "node count must equal the number of sensors");
  }
  GossipDistribution dist = parse_distribution(j["distribution"], graph);

  ExperimentConfig config{std::move(model), std::move(graph), std::move(dist)};
  config.horizon = detail::field_or<int>(j, "horizon", 100);
  if (config.horizon < 0) throw ConfigError("horizon", "must be nonnegative");
  config.trials = detail::field_or<int>(j, "trials", 1);
  if (config.trials <= 0) throw ConfigError("trials", "must be positive");
  config.seed = detail::field_or<std::uint64_t>(j, "seed", 0);
  config.snapshots = detail::field_or<std::vector<int>>(j, "snapshots", {});
  for (int t : config.snapshots) {
    if (t < 0 || t > config.horizon) throw ConfigError("snapshots", "time outside [0, horizon]");
  }

  if (j.contains("tests")) {
    const auto& jt = j["tests"];
    config.tests.consensus_threshold =
        detail::field_or<double>(jt, "consensus_threshold", 0.05);
    config.tests.confidence = detail::field_or<double>(jt, "confidence", 0.99);
    config.tests.eps_tail = detail::field_or<double>(jt, "eps_tail", 0.05);
    config.tests.j_grid = detail::field_or<std::vector<double>>(jt, "j_grid", {});
    config.tests.t_grid = detail::field_or<std::vector<int>>(jt, "t_grid", {});
    if (config.tests.confidence <= 0.0 || config.tests.confidence >= 1.0) {
      throw ConfigError("tests.confidence", "must be in (0,1)");
    }
  }
  return config;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;

  nlohmann::json jm;
  jm["F"] = detail::matrix_to_json(c.model.F);
  jm["Q"] = detail::matrix_to_json(c.model.Q.mat());
  jm["P0"] = detail::matrix_to_json(c.model.P0.mat());
  jm["sensors"] = nlohmann::json::array();
  for (const auto& s : c.model.sensors) {
    jm["sensors"].push_back(
        {{"C", detail::matrix_to_json(s.C)}, {"R", detail::matrix_to_json(s.R.mat())}});
  }
  j["model"] = std::move(jm);

  nlohmann::json jg;
  jg["family"] = "custom";
  jg["nodes"] = c.graph.size();
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [u, v] : c.graph.edges()) edges.push_back({u, v});
  jg["edges"] = std::move(edges);
  j["graph"] = std::move(jg);

  nlohmann::json jd;
  if (c.distribution.is_explicit()) {
    jd["type"] = "explicit";
    jd["matchings"] = nlohmann::json::array();
    for (const auto& m : c.distribution.support()) jd["matchings"].push_back(m.perm());
    jd["weights"] = c.distribution.weights();
  } else {
    jd["type"] = "procedural";
    jd["p_gossip"] = c.distribution.p_gossip();
  }
  j["distribution"] = std::move(jd);

  j["horizon"] = c.horizon;
  j["trials"] = c.trials;
  j["seed"] = c.seed;
  j["snapshots"] = c.snapshots;
  j["tests"] = {{"consensus_threshold", c.tests.consensus_threshold},
                {"confidence", c.tests.confidence},
                {"eps_tail", c.tests.eps_tail},
                {"j_grid", c.tests.j_grid},
                {"t_grid", c.tests.t_grid}};
  return j;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("(file)", "cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("(file)", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(j);
}

}  // namespace gikf
