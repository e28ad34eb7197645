// Command-line front end: simulate GIKF runs, sample the invariant measure,
// search detectability certificates, run the verification suite, and
// summarize stored results.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gikf/acceptance.hpp"
#include "gikf/config.hpp"
#include "gikf/detectability.hpp"
#include "gikf/filter_engine.hpp"
#include "gikf/io.hpp"
#include "gikf/measure_lab.hpp"
#include "gikf/parallel.hpp"

namespace {

namespace fs = std::filesystem;

struct CommonOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::string format = "csv";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int horizon = -1;
  int trials = -1;
  unsigned workers = 0;
};

void apply_overrides(gikf::ExperimentConfig& config, const CommonOptions& opts) {
  if (opts.seed_set) config.seed = opts.seed;
  if (opts.horizon >= 0) config.horizon = opts.horizon;
  if (opts.trials > 0) config.trials = opts.trials;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  gikf::write_text_file(path.string(), j.dump(2) + "\n");
}

int cmd_simulate(const CommonOptions& opts) {
  gikf::ExperimentConfig config = gikf::load_config(opts.config_path);
  apply_overrides(config, opts);
  fs::create_directories(opts.out_dir);

  gikf::RunManifest manifest;
  manifest.config_hash = gikf::config_hash(config);
  manifest.master_seed = config.seed;

  if (config.distribution.is_explicit() &&
      !gikf::check_connectivity(config.distribution.mean_matrix()).ok()) {
    std::cerr << "warning: mean matrix fails irreducibility/aperiodicity; "
                 "consensus results do not apply\n";
  }

  std::vector<fs::path> paths;
  for (int trial = 0; trial < config.trials; ++trial) {
    manifest.trial_seeds.push_back(gikf::derive_seed(config.seed, trial));
    char name[64];
    std::snprintf(name, sizeof(name), "record_%04d.%s", trial,
                  opts.format == "json" ? "json" : "csv");
    paths.push_back(fs::path(opts.out_dir) / name);
    manifest.outputs.push_back(paths.back().string());
  }

  // Trials are independent; each writes its own file.
  gikf::parallel_for_trials(static_cast<std::size_t>(config.trials), opts.workers,
                            [&](std::size_t trial) {
                              gikf::RunOptions run;
                              run.horizon = config.horizon;
                              run.seed = manifest.trial_seeds[trial];
                              run.snapshot_times = config.snapshots;
                              const gikf::TrajectoryRecord record =
                                  gikf::run_gikf(config.model, config.distribution, run);
                              if (opts.format == "json") {
                                write_json(paths[trial], gikf::record_to_json(record));
                              } else {
                                gikf::write_text_file(paths[trial].string(),
                                                      gikf::record_to_csv(record));
                              }
                            });

  write_json(fs::path(opts.out_dir) / "manifest.json", manifest.to_json());
  std::cout << "wrote " << manifest.outputs.size() << " record(s) to " << opts.out_dir << "\n";
  return 0;
}

int cmd_invariant_measure(const CommonOptions& opts) {
  gikf::ExperimentConfig config = gikf::load_config(opts.config_path);
  apply_overrides(config, opts);
  fs::create_directories(opts.out_dir);

  const gikf::Matrix abar =
      gikf::test_mean_matrix(config.distribution, gikf::derive_seed(config.seed, 900));
  gikf::AuxiliaryChainSpec spec(abar, {config.model.P0});
  const gikf::EmpiricalMeasure measure = gikf::run_auxiliary_chain(
      config.model, spec, config.horizon, static_cast<std::size_t>(config.trials), config.seed,
      opts.workers);

  gikf::RunManifest manifest;
  manifest.config_hash = gikf::config_hash(config);
  manifest.master_seed = config.seed;
  for (int i = 0; i < config.trials; ++i) {
    manifest.trial_seeds.push_back(gikf::derive_seed(config.seed, i));
  }
  const fs::path path = fs::path(opts.out_dir) / "measure.json";
  write_json(path, gikf::measure_to_json(measure));
  manifest.outputs.push_back(path.string());
  write_json(fs::path(opts.out_dir) / "manifest.json", manifest.to_json());

  std::cout << "invariant-measure: " << measure.size() << " samples of P(t) at t="
            << config.horizon << " written to " << path.string() << "\n";
  return 0;
}

int cmd_detect(const CommonOptions& opts, int max_len) {
  gikf::ExperimentConfig config = gikf::load_config(opts.config_path);
  apply_overrides(config, opts);
  fs::create_directories(opts.out_dir);

  const gikf::Matrix abar =
      gikf::test_mean_matrix(config.distribution, gikf::derive_seed(config.seed, 900));
  const int cap = max_len > 0 ? max_len : gikf::default_walk_search_cap(config.model);
  const auto cert = gikf::find_detectability_walk(config.model, abar, cap);

  const fs::path path = fs::path(opts.out_dir) / "certificate.json";
  write_json(path, gikf::certificate_to_json(cert));
  if (cert) {
    std::cout << "certificate found: walk length " << cert->walk.size() << ", alpha0 "
              << cert->alpha0 << "\n";
  } else {
    std::cout << "certificate not-found up to walk length " << cap
              << " (inconclusive, not a disproof)\n";
  }
  return 0;
}

int cmd_verify(const CommonOptions& opts, const std::string& report_path) {
  const auto results = gikf::run_acceptance_suite(opts.workers);
  bool all_pass = true;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& r : results) {
    std::printf("[%s] criterion %2d %-32s %s\n", r.pass ? "PASS" : "FAIL", r.id,
                r.name.c_str(), r.detail.c_str());
    std::fflush(stdout);
    entries.push_back({{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"detail", r.detail}});
    all_pass = all_pass && r.pass;
  }
  if (!report_path.empty()) {
    write_json(report_path,
               {{"schema_version", gikf::kSchemaVersion},
                {"kind", "verification_report"},
                {"pass", all_pass},
                {"criteria", entries}});
  }
  std::cout << (all_pass ? "all criteria passed" : "criteria FAILED") << "\n";
  return all_pass ? 0 : 1;
}

int cmd_report(const CommonOptions& opts) {
  const fs::path manifest_path = fs::path(opts.out_dir) / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) {
    std::cerr << "config error: no manifest.json under '" << opts.out_dir << "'\n";
    return 2;
  }
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: malformed manifest: " << e.what() << "\n";
    return 2;
  }
  if (manifest.value("schema_version", -1) != gikf::kSchemaVersion) {
    std::cerr << "config error: unsupported manifest schema version\n";
    return 2;
  }

  std::cout << "manifest: config_hash=" << manifest.value("config_hash", std::string("?"))
            << " master_seed=" << manifest.value("master_seed", 0ull) << " trials="
            << manifest.value("trial_seeds", std::vector<std::uint64_t>{}).size() << "\n";
  for (const auto& out : manifest.value("outputs", std::vector<std::string>{})) {
    std::cout << "  output: " << out;
    std::ifstream f(out);
    if (!f) {
      std::cout << " (missing)\n";
      continue;
    }
    if (out.size() > 5 && out.substr(out.size() - 5) == ".json") {
      nlohmann::json j;
      try {
        f >> j;
        std::cout << " kind=" << j.value("kind", std::string("?"));
        if (j.contains("samples")) std::cout << " samples=" << j["samples"].size();
        if (j.contains("horizon")) std::cout << " horizon=" << j["horizon"].get<int>();
      } catch (const nlohmann::json::exception&) {
        std::cout << " (unreadable)";
      }
      std::cout << "\n";
    } else {
      std::string line;
      std::size_t rows = 0;
      while (std::getline(f, line)) ++rows;
      std::cout << " rows=" << (rows > 0 ? rows - 1 : 0) << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gossip interactive Kalman filter laboratory"};
  app.require_subcommand(1);

  CommonOptions opts;
  int max_len = -1;
  std::string report_path;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    if (needs_config) {
      cmd->add_option("--config", opts.config_path, "experiment config (JSON)")->required();
    }
    cmd->add_option("--seed", opts.seed, "master seed override")
        ->each([&](const std::string&) { opts.seed_set = true; });
    cmd->add_option("--horizon", opts.horizon, "horizon override");
    cmd->add_option("--trials", opts.trials, "trial count override");
    cmd->add_option("--workers", opts.workers, "worker threads (0 = hardware)");
    cmd->add_option("--out", opts.out_dir, "output directory");
  };

  CLI::App* simulate = app.add_subcommand("simulate", "run GIKF trials and export records");
  add_common(simulate, true);
  simulate->add_option("--format", opts.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));

  CLI::App* invariant =
      app.add_subcommand("invariant-measure", "sample the auxiliary chain at the horizon");
  add_common(invariant, true);

  CLI::App* detect = app.add_subcommand("detect", "search for a detectability certificate");
  add_common(detect, true);
  detect->add_option("--max-len", max_len, "walk search cap (default 4*N*M)");

  CLI::App* verify = app.add_subcommand("verify", "run the full verification suite");
  verify->add_option("--workers", opts.workers, "worker threads (0 = hardware)");
  verify->add_option("--report", report_path, "write a JSON report here");

  CLI::App* report = app.add_subcommand("report", "summarize stored results");
  report->add_option("--out", opts.out_dir, "directory holding manifest.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(opts);
    if (invariant->parsed()) return cmd_invariant_measure(opts);
    if (detect->parsed()) return cmd_detect(opts, max_len);
    if (verify->parsed()) return cmd_verify(opts, report_path);
    if (report->parsed()) return cmd_report(opts);
  } catch (const gikf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
