#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sdqos/engine.hpp"
#include "sdqos/metrics.hpp"
#include "sdqos/policy.hpp"
#include "sdqos/util.hpp"

namespace {

int cmd_run(const std::string& config_path, double duration, std::optional<std::uint64_t> seed,
            const std::string& out_dir, bool disable_borrowing) {
  sdqos::cfg::SimConfig config;
  try {
    config = sdqos::cfg::load_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  try {
    sdqos::sim::RunOptions opts;
    opts.seed_override = seed;
    opts.disable_borrowing = disable_borrowing;
    sdqos::sim::RunResult result = sdqos::sim::run(config, duration, opts);
    result.write_outputs(out_dir);
    for (const auto& [app, ar] : result.report.apps) {
      std::cout << app << ": desired=" << sdqos::format_double(ar.desired_mbps)
                << " MB/s achieved=" << sdqos::format_double(ar.achieved_mbps)
                << " MB/s satisfaction=" << sdqos::format_double(ar.satisfaction) << "\n";
    }
    std::cout << "jain=" << sdqos::format_double(result.report.fairness_jain)
              << " borrowed=" << sdqos::format_double(result.report.borrowed_tokens)
              << " wasted=" << sdqos::format_double(result.report.wasted_tokens)
              << " rejected=" << result.report.rejected << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_parse_policy(const std::string& statement) {
  try {
    auto stmt = sdqos::policy::parse_policy(statement);
    auto violations = sdqos::policy::validate_policy(stmt);
    if (!violations.empty()) {
      std::cerr << "invalid policy: " << sdqos::policy::violation_name(violations.front())
                << "\n";
      return 2;
    }
    std::cout << sdqos::policy::render_policy(stmt) << "\n";
    return 0;
  } catch (const sdqos::policy::PolicyError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  }
}

struct CsvRow {
  double time_s;
  std::string app_id;
  std::string server_id;
  double mb_served;
};

int cmd_report(const std::string& in_dir) {
  namespace fs = std::filesystem;
  fs::path dir(in_dir);
  std::ifstream js(dir / "summary.json");
  std::ifstream csv(dir / "timeseries.csv");
  if (!js || !csv) {
    std::cerr << "cannot read run outputs in " << in_dir << "\n";
    return 2;
  }
  nlohmann::json summary;
  try {
    js >> summary;
  } catch (const std::exception& e) {
    std::cerr << "bad summary.json: " << e.what() << "\n";
    return 2;
  }
  double warmup = summary["run"]["warmup_s"].get<double>();
  double duration = summary["run"]["duration_s"].get<double>();
  double span = duration - warmup;
  if (span <= 0.0) span = duration;

  std::string line;
  std::getline(csv, line);  // header
  std::map<std::string, double> mb_by_app;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string time_s, app, server, mb;
    std::getline(ss, time_s, ',');
    std::getline(ss, app, ',');
    std::getline(ss, server, ',');
    std::getline(ss, mb, ',');
    if (std::stod(time_s) < warmup - 1e-9) continue;
    mb_by_app[app] += std::stod(mb);
  }

  std::vector<double> sats;
  std::cout << "app desired_mbps achieved_mbps satisfaction\n";
  for (const auto& [app, info] : summary["apps"].items()) {
    double desired = info["desired_mbps"].get<double>();
    double achieved = mb_by_app.count(app) ? mb_by_app[app] / span : 0.0;
    double sat = desired > 0.0 ? std::min(1.0, achieved / desired) : 1.0;
    sats.push_back(sat);
    std::cout << app << " " << sdqos::format_double(desired) << " "
              << sdqos::format_double(achieved) << " " << sdqos::format_double(sat) << "\n";
  }
  bool any = false;
  for (double s : sats) any = any || s > 0.0;
  double jain = any ? sdqos::metrics::jain_index(sats) : 0.0;
  std::cout << "jain=" << sdqos::format_double(jain) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Storage-cluster QoS simulator: token-bucket data planes, a central "
               "token-rate control plane with cross-server borrowing, and an extended "
               "M-LWDF scheduler."};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a simulation from a config file");
  std::string config_path;
  double duration = 30.0;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "./out";
  bool disable_borrowing = false;
  run->add_option("--config", config_path, "Path to the JSON run config")->required();
  run->add_option("--duration", duration, "Simulated seconds")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "RNG seed (overrides config)");
  run->add_option("--out", out_dir, "Output directory");
  run->add_flag("--disable-borrowing", disable_borrowing,
                "Skip the borrowing round regardless of config");

  auto* parse = app.add_subcommand("parse-policy", "Parse one policy statement");
  std::string statement;
  parse->add_option("statement", statement, "Policy statement, e.g. \"<app-1, rate=100 MB/s>\"")
      ->required();

  auto* report = app.add_subcommand("report", "Re-read run outputs and print the summary table");
  std::string in_dir;
  report->add_option("--in", in_dir, "Directory of a prior run")->required();

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return cmd_run(config_path, duration, seed, out_dir, disable_borrowing);
  if (parse->parsed()) return cmd_parse_policy(statement);
  return cmd_report(in_dir);
}
