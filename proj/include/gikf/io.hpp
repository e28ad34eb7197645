#pragma once

#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gikf/config.hpp"
#include "gikf/detectability.hpp"
#include "gikf/filter_engine.hpp"
#include "gikf/measure_lab.hpp"

namespace gikf {

// FNV-1a, used to fingerprint configs in manifests.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string config_hash(const ExperimentConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(config_to_json(config).dump())));
  return buf;
}

namespace detail {

// 17 significant digits round-trip doubles exactly.
inline std::string format_g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

/// Columnar export: one row per (t, sensor). Row t reports the state at time
/// t; particle_pos is the alignment column of the record.
inline std::string record_to_csv(const TrajectoryRecord& rec) {
  std::ostringstream out;
  out << "t,sensor,norm_P,sq_err,particle_pos,matching_id\n";
  for (std::size_t t = 0; t < rec.norm_P.size(); ++t) {
    for (int n = 0; n < rec.num_sensors; ++n) {
      out << t << ',' << n << ',' << detail::format_g17(rec.norm_P[t][n]) << ','
          << detail::format_g17(rec.sq_err[t][n]) << ',' << rec.positions[t][n] << ','
          << rec.matching_id[t] << '\n';
    }
  }
  return out.str();
}

inline nlohmann::json record_to_json(const TrajectoryRecord& rec) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "trajectory_record";
  j["horizon"] = rec.horizon;
  j["num_sensors"] = rec.num_sensors;
  j["seed"] = rec.seed;
  j["connectivity_ok"] = rec.connectivity_ok;
  j["norm_P"] = rec.norm_P;
  j["sq_err"] = rec.sq_err;
  j["positions"] = rec.positions;
  j["matching_id"] = rec.matching_id;
  nlohmann::json snaps = nlohmann::json::object();
  for (const auto& [t, mats] : rec.snapshots) {
    nlohmann::json per_sensor = nlohmann::json::array();
    for (const auto& p : mats) per_sensor.push_back(detail::matrix_to_json(p.mat()));
    snaps[std::to_string(t)] = std::move(per_sensor);
  }
  j["snapshots"] = std::move(snaps);
  return j;
}

inline nlohmann::json measure_to_json(const EmpiricalMeasure& measure) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "empirical_measure";
  j["dim"] = measure.dim();
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& x : measure.samples()) samples.push_back(detail::matrix_to_json(x.mat()));
  j["samples"] = std::move(samples);
  return j;
}

inline EmpiricalMeasure measure_from_json(const nlohmann::json& j) {
  if (detail::field_or<int>(j, "schema_version", -1) != kSchemaVersion) {
    throw std::runtime_error("measure_from_json: unsupported schema version");
  }
  std::vector<PsdMatrix> samples;
  for (const auto& s : j.at("samples")) {
    samples.push_back(PsdMatrix(detail::parse_matrix(s, "samples")));
  }
  return EmpiricalMeasure(std::move(samples));
}

inline nlohmann::json certificate_to_json(const std::optional<WalkCertificate>& cert) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "detectability_certificate";
  j["found"] = cert.has_value();
  if (cert) {
    j["walk"] = cert->walk;
    j["alpha0"] = cert->alpha0;
    j["grammian_min_eig"] = cert->grammian_min_eig;
    j["grammian"] = detail::matrix_to_json(cert->grammian.mat());
  }
  return j;
}

inline nlohmann::json report_to_json(const WeakConsensusReport& r) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : r.entries) {
    entries.push_back({{"init_a", e.init_a},
                       {"init_b", e.init_b},
                       {"projection", e.projection},
                       {"distance", e.distance}});
  }
  return {{"kind", "weak_consensus"},
          {"schema_version", kSchemaVersion},
          {"threshold", r.threshold},
          {"pass", r.pass},
          {"entries", entries}};
}

inline nlohmann::json report_to_json(const ProbedSensorReport& r) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : r.entries) {
    entries.push_back({{"t", e.t},
                       {"projection", e.projection},
                       {"distance", e.distance},
                       {"critical", e.critical},
                       {"pass", e.pass}});
  }
  return {{"kind", "probed_sensor"},
          {"schema_version", kSchemaVersion},
          {"pass", r.pass},
          {"entries", entries}};
}

inline nlohmann::json report_to_json(const DominanceReport& r) {
  nlohmann::json uppers = nlohmann::json::array();
  for (const auto& e : r.entries) {
    uppers.push_back({{"alpha", e.alpha},
                      {"token_tail", e.token_tail},
                      {"measure_tail", e.measure_tail},
                      {"margin", e.margin},
                      {"upper_ok", e.upper_ok}});
  }
  nlohmann::json lowers = nlohmann::json::array();
  for (const auto& e : r.lower_entries) {
    lowers.push_back({{"alpha", e.alpha},
                      {"mean_token_tail", e.mean_token_tail},
                      {"measure_tail", e.measure_tail},
                      {"margin", e.margin},
                      {"lower_ok", e.lower_ok}});
  }
  return {{"kind", "stochastic_dominance"},
          {"schema_version", kSchemaVersion},
          {"pass", r.pass},
          {"upper", uppers},
          {"lower", lowers}};
}

inline nlohmann::json report_to_json(const BoundednessReport& r) {
  nlohmann::json tails = nlohmann::json::array();
  for (const auto& e : r.tail_map) tails.push_back({{"J", e.j}, {"worst_tail", e.worst_tail}});
  nlohmann::json scaled = nlohmann::json::array();
  for (const auto& e : r.scaled_entries) {
    scaled.push_back({{"t", e.t},
                      {"sensor", e.sensor},
                      {"J", e.j},
                      {"sensor_tail", e.sensor_tail},
                      {"scaled_aux_tail", e.scaled_aux_tail},
                      {"margin", e.margin},
                      {"ok", e.ok}});
  }
  return {{"kind", "stochastic_boundedness"},
          {"schema_version", kSchemaVersion},
          {"pass", r.pass},
          {"tails_decreasing", r.tails_decreasing},
          {"tail_below_eps", r.tail_below_eps},
          {"scaled_bound_ok", r.scaled_bound_ok},
          {"tail_map", tails},
          {"scaled", scaled}};
}

inline nlohmann::json report_to_json(const CoupledBoundReport& r) {
  return {{"kind", "coupled_initial_condition_bound"},
          {"schema_version", kSchemaVersion},
          {"pass", r.pass},
          {"traces", r.traces},
          {"comparisons", r.comparisons},
          {"violations", r.violations},
          {"worst_margin", r.worst_margin}};
}

inline nlohmann::json report_to_json(const ConsistencyReport& r) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : r.entries) {
    entries.push_back({{"t", e.t},
                       {"sensor", e.sensor},
                       {"statistic", e.statistic},
                       {"count", e.count},
                       {"consistent", e.consistent}});
  }
  return {{"kind", "covariance_consistency"},
          {"schema_version", kSchemaVersion},
          {"lower", r.lower},
          {"upper", r.upper},
          {"pass", r.all_consistent()},
          {"entries", entries}};
}

/// Everything needed to reproduce a run bit-for-bit (timestamps aside):
/// config hash, master seed, derivation rule, and the per-trial seeds.
struct RunManifest {
  std::string config_hash;
  std::uint64_t master_seed = 0;
  std::vector<std::uint64_t> trial_seeds;
  std::vector<std::string> outputs;

  nlohmann::json to_json() const {
    return {{"schema_version", kSchemaVersion},
            {"kind", "run_manifest"},
            {"tool_version", kToolVersion},
            {"config_hash", config_hash},
            {"master_seed", master_seed},
            {"seed_derivation", "trial_seed[i] = splitmix64(master ^ splitmix64(i + 1))"},
            {"trial_seeds", trial_seeds},
            {"created_unix", static_cast<std::int64_t>(std::time(nullptr))},
            {"outputs", outputs}};
  }
};

}  // namespace gikf
