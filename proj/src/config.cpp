#include "sdqos/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace sdqos::cfg {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
  throw ConfigError("schema error at " + path + ": " + what);
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) schema_error(path + "." + key, "missing field");
  return obj.at(key);
}

double positive_number(const json& v, const std::string& path) {
  if (!v.is_number()) schema_error(path, "expected a number");
  double d = v.get<double>();
  if (!(d > 0.0)) schema_error(path, "must be > 0");
  return d;
}

std::string nonempty_string(const json& v, const std::string& path) {
  if (!v.is_string() || v.get<std::string>().empty())
    schema_error(path, "expected a non-empty string");
  return v.get<std::string>();
}

ArrivalProcess parse_arrival(const json& v, const std::string& path) {
  ArrivalProcess out;
  std::string type = nonempty_string(require(v, "type", path), path + ".type");
  if (type == "deterministic")
    out.kind = ArrivalProcess::Kind::Deterministic;
  else if (type == "poisson")
    out.kind = ArrivalProcess::Kind::Poisson;
  else
    schema_error(path + ".type", "expected 'deterministic' or 'poisson'");
  out.rate_mbps = positive_number(require(v, "rate_mbps", path), path + ".rate_mbps");
  return out;
}

ServerMapping parse_mapping(const json& v, std::size_t n_servers, const std::string& path) {
  ServerMapping out;
  std::string type = nonempty_string(require(v, "type", path), path + ".type");
  if (type == "round_robin") {
    out.kind = ServerMapping::Kind::RoundRobin;
  } else if (type == "uniform_random") {
    out.kind = ServerMapping::Kind::UniformRandom;
  } else if (type == "static_weights") {
    out.kind = ServerMapping::Kind::StaticWeights;
    const json& w = require(v, "weights", path);
    if (!w.is_array() || w.size() != n_servers)
      schema_error(path + ".weights", "expected one weight per server");
    double sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (!w[i].is_number() || w[i].get<double>() < 0.0)
        schema_error(path + ".weights[" + std::to_string(i) + "]", "must be >= 0");
      out.weights.push_back(w[i].get<double>());
      sum += out.weights.back();
    }
    if (std::abs(sum - 1.0) > 1e-9) schema_error(path + ".weights", "must sum to 1");
  } else {
    schema_error(path + ".type", "expected 'round_robin', 'uniform_random' or 'static_weights'");
  }
  return out;
}

}  // namespace

SimConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config root must be an object");

  SimConfig config;

  const json& servers = require(doc, "servers", "config");
  if (!servers.is_array() || servers.empty()) schema_error("config.servers", "need >= 1 server");
  std::set<std::string> server_ids;
  for (std::size_t i = 0; i < servers.size(); ++i) {
    std::string path = "config.servers[" + std::to_string(i) + "]";
    ServerConfig sc;
    sc.id = nonempty_string(require(servers[i], "id", path), path + ".id");
    sc.phys_limit_mbps =
        positive_number(require(servers[i], "phys_limit_mbps", path), path + ".phys_limit_mbps");
    if (!server_ids.insert(sc.id).second) schema_error(path + ".id", "duplicate server id");
    config.servers.push_back(sc);
  }

  const json& apps = require(doc, "apps", "config");
  if (!apps.is_array()) schema_error("config.apps", "expected an array");
  std::set<std::string> app_ids;
  for (std::size_t i = 0; i < apps.size(); ++i) {
    std::string path = "config.apps[" + std::to_string(i) + "]";
    ctrl::ApplicationSpec spec;
    spec.app_id = nonempty_string(require(apps[i], "app_id", path), path + ".app_id");
    spec.desired_mbps =
        positive_number(require(apps[i], "desired_mbps", path), path + ".desired_mbps");
    if (apps[i].contains("borrow_allowed")) {
      if (!apps[i]["borrow_allowed"].is_boolean())
        schema_error(path + ".borrow_allowed", "expected a boolean");
      spec.borrow_allowed = apps[i]["borrow_allowed"].get<bool>();
    }
    if (apps[i].contains("borrow_threshold")) {
      double t = positive_number(apps[i]["borrow_threshold"], path + ".borrow_threshold");
      if (t > 1.0) schema_error(path + ".borrow_threshold", "must be in (0, 1]");
      if (!spec.borrow_allowed)
        schema_error(path + ".borrow_threshold", "requires borrow_allowed=true");
      spec.borrow_threshold = t;
    }
    if (apps[i].contains("delay_target_s"))
      spec.delay_target_s = positive_number(apps[i]["delay_target_s"], path + ".delay_target_s");
    if (apps[i].contains("delay_violation_prob")) {
      double d = positive_number(apps[i]["delay_violation_prob"], path + ".delay_violation_prob");
      if (d >= 1.0) schema_error(path + ".delay_violation_prob", "must be in (0, 1)");
      spec.delay_violation_prob = d;
    }
    if (!app_ids.insert(spec.app_id).second) schema_error(path + ".app_id", "duplicate app id");
    config.apps.push_back(spec);
  }

  const json& streams = require(doc, "streams", "config");
  if (!streams.is_array()) schema_error("config.streams", "expected an array");
  for (std::size_t i = 0; i < streams.size(); ++i) {
    std::string path = "config.streams[" + std::to_string(i) + "]";
    WorkloadStream ws;
    ws.app_id = nonempty_string(require(streams[i], "app_id", path), path + ".app_id");
    if (!app_ids.count(ws.app_id)) schema_error(path + ".app_id", "not a configured app");
    ws.source_node =
        nonempty_string(require(streams[i], "source_node", path), path + ".source_node");
    ws.arrival_process =
        parse_arrival(require(streams[i], "arrival_process", path), path + ".arrival_process");
    double size = positive_number(require(streams[i], "request_size_bytes", path),
                                  path + ".request_size_bytes");
    ws.request_size_bytes = static_cast<std::uint64_t>(size);
    ws.server_mapping = parse_mapping(require(streams[i], "server_mapping", path),
                                      config.servers.size(), path + ".server_mapping");
    config.streams.push_back(ws);
  }

  if (doc.contains("policies")) {
    if (!doc["policies"].is_array()) schema_error("config.policies", "expected an array");
    for (std::size_t i = 0; i < doc["policies"].size(); ++i) {
      if (!doc["policies"][i].is_string())
        schema_error("config.policies[" + std::to_string(i) + "]", "expected a string");
      std::string text = doc["policies"][i].get<std::string>();
      try {
        policy::parse_policy(text);
      } catch (const policy::PolicyError& e) {
        throw ConfigError("policy statement " + std::to_string(i) + ": " + e.what());
      }
      config.policies.push_back(text);
    }
  }

  if (doc.contains("timing")) {
    const json& t = doc["timing"];
    if (t.contains("tick_s")) config.timing.tick_s = positive_number(t["tick_s"], "config.timing.tick_s");
    if (t.contains("epoch_s"))
      config.timing.epoch_s = positive_number(t["epoch_s"], "config.timing.epoch_s");
    if (t.contains("window_s"))
      config.timing.window_s = positive_number(t["window_s"], "config.timing.window_s");
    if (t.contains("warmup_s")) {
      if (!t["warmup_s"].is_number() || t["warmup_s"].get<double>() < 0.0)
        schema_error("config.timing.warmup_s", "must be >= 0");
      config.timing.warmup_s = t["warmup_s"].get<double>();
    }
  }
  double ratio = config.timing.epoch_s / config.timing.tick_s;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 || ratio < 1.0 - 1e-9)
    schema_error("config.timing", "epoch_s must be an integer multiple of tick_s");

  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned() && !doc["seed"].is_number_integer())
      schema_error("config.seed", "expected an integer");
    config.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("borrowing_enabled")) {
    if (!doc["borrowing_enabled"].is_boolean())
      schema_error("config.borrowing_enabled", "expected a boolean");
    config.borrowing_enabled = doc["borrowing_enabled"].get<bool>();
  }
  if (doc.contains("bytes_per_token"))
    config.bytes_per_token = static_cast<std::uint64_t>(
        positive_number(doc["bytes_per_token"], "config.bytes_per_token"));
  if (doc.contains("queue_depth_limit"))
    config.queue_depth_limit = static_cast<std::uint64_t>(
        positive_number(doc["queue_depth_limit"], "config.queue_depth_limit"));

  return config;
}

SimConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const SimConfig& config) {
  ordered_json doc;
  doc["servers"] = ordered_json::array();
  for (const ServerConfig& s : config.servers)
    doc["servers"].push_back({{"id", s.id}, {"phys_limit_mbps", s.phys_limit_mbps}});

  doc["apps"] = ordered_json::array();
  for (const ctrl::ApplicationSpec& a : config.apps) {
    ordered_json o = {{"app_id", a.app_id},
                      {"desired_mbps", a.desired_mbps},
                      {"borrow_allowed", a.borrow_allowed},
                      {"delay_target_s", a.delay_target_s},
                      {"delay_violation_prob", a.delay_violation_prob}};
    if (a.borrow_threshold) o["borrow_threshold"] = *a.borrow_threshold;
    doc["apps"].push_back(o);
  }

  doc["streams"] = ordered_json::array();
  for (const WorkloadStream& w : config.streams) {
    ordered_json o;
    o["app_id"] = w.app_id;
    o["source_node"] = w.source_node;
    o["arrival_process"] = {
        {"type",
         w.arrival_process.kind == ArrivalProcess::Kind::Poisson ? "poisson" : "deterministic"},
        {"rate_mbps", w.arrival_process.rate_mbps}};
    o["request_size_bytes"] = w.request_size_bytes;
    switch (w.server_mapping.kind) {
      case ServerMapping::Kind::RoundRobin:
        o["server_mapping"] = {{"type", "round_robin"}};
        break;
      case ServerMapping::Kind::UniformRandom:
        o["server_mapping"] = {{"type", "uniform_random"}};
        break;
      case ServerMapping::Kind::StaticWeights:
        o["server_mapping"] = {{"type", "static_weights"}, {"weights", w.server_mapping.weights}};
        break;
    }
    doc["streams"].push_back(o);
  }

  doc["policies"] = config.policies;
  doc["timing"] = {{"tick_s", config.timing.tick_s},
                   {"epoch_s", config.timing.epoch_s},
                   {"window_s", config.timing.window_s},
                   {"warmup_s", config.timing.warmup_s}};
  doc["seed"] = config.seed;
  doc["borrowing_enabled"] = config.borrowing_enabled;
  doc["bytes_per_token"] = config.bytes_per_token;
  doc["queue_depth_limit"] = config.queue_depth_limit;
  return doc.dump(2) + "\n";
}

policy::PolicyRegistry SimConfig::build_registry() const {
  policy::PolicyRegistry registry;
  for (const std::string& text : policies) registry.apply(policy::parse_policy(text));
  return registry;
}

}  // namespace sdqos::cfg
