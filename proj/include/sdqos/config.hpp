#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdqos/control_plane.hpp"
#include "sdqos/policy.hpp"

namespace sdqos::cfg {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ServerConfig {
  std::string id;
  double phys_limit_mbps = 0.0;
};

struct ArrivalProcess {
  enum class Kind { Deterministic, Poisson };
  Kind kind = Kind::Deterministic;
  double rate_mbps = 0.0;
};

struct ServerMapping {
  enum class Kind { RoundRobin, UniformRandom, StaticWeights };
  Kind kind = Kind::RoundRobin;
  std::vector<double> weights;  // StaticWeights only; sums to 1 +- 1e-9
};

struct WorkloadStream {
  std::string app_id;
  std::string source_node;
  ArrivalProcess arrival_process;
  std::uint64_t request_size_bytes = 0;
  ServerMapping server_mapping;
};

struct Timing {
  double tick_s = 0.1;
  double epoch_s = 0.1;
  double window_s = 1.0;
  double warmup_s = 1.0;
};

struct SimConfig {
  std::vector<ServerConfig> servers;
  std::vector<ctrl::ApplicationSpec> apps;
  std::vector<WorkloadStream> streams;
  std::vector<std::string> policies;
  Timing timing;
  std::uint64_t seed = 42;
  bool borrowing_enabled = true;
  std::uint64_t bytes_per_token = 1000000;
  std::uint64_t queue_depth_limit = 10000;

  // Registry built from the policy statement strings, in order.
  policy::PolicyRegistry build_registry() const;
};

SimConfig load_config(const std::filesystem::path& path);
SimConfig parse_config(const std::string& json_text);
std::string serialize_config(const SimConfig& config);

}  // namespace sdqos::cfg
