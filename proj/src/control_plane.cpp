#include "sdqos/control_plane.hpp"

#include <cmath>

#include "sdqos/util.hpp"

namespace sdqos::ctrl {

EffectiveTable sync_desired_qos(const std::vector<ApplicationSpec>& specs,
                                const policy::PolicyRegistry& registry) {
  EffectiveTable table;
  for (const ApplicationSpec& spec : specs) {
    if (table.count(spec.app_id)) throw DuplicateApp(spec.app_id);
    ApplicationSpec eff = spec;
    if (const policy::EffectivePolicy* pol = registry.find(spec.app_id)) {
      if (pol->rate_mbps) eff.desired_mbps = *pol->rate_mbps;
      eff.borrow_allowed = pol->borrow_allowed;
      eff.borrow_threshold = pol->borrow_threshold;
    }
    table[spec.app_id] = eff;
  }
  return table;
}

TokenRateTable generate_token_rates(const EffectiveTable& specs,
                                    const std::vector<std::string>& servers,
                                    double epoch_len_s, std::uint64_t bytes_per_token) {
  if (servers.empty()) throw NoServers();
  TokenRateTable table;
  table.epoch_len_s = epoch_len_s;
  std::vector<double> equal(servers.size(), 1.0);
  for (const auto& [app, spec] : specs) {
    double tokens_per_s = spec.desired_mbps * 1e6 / static_cast<double>(bytes_per_token);
    table.per_app_rate[app] = tokens_per_s;
    long long per_epoch = std::llround(tokens_per_s * epoch_len_s);
    std::vector<long long> shares = apportion(per_epoch, equal);
    for (std::size_t i = 0; i < servers.size(); ++i)
      table.per_server_share[{app, servers[i]}] = shares[i];
  }
  return table;
}

void distribute_tokens(std::map<std::string, data::ServerState>& cluster,
                       const TokenRateTable& table, metrics::Collector& collector,
                       double now) {
  for (auto& [server_id, server] : cluster) {
    for (const auto& [app, rate] : table.per_app_rate) {
      server.ensure_app(app);
      long long share = table.share(app, server_id);
      data::TokenBucket& bucket = server.buckets().at(app);
      bucket.set_capacity(2.0 * static_cast<double>(share));
      double wasted = bucket.refill(static_cast<double>(share));
      collector.record_granted(app, static_cast<double>(share));
      if (wasted > 0.0) collector.record_waste(now, app, server_id, wasted);
    }
  }
}

bool borrow_eligible(const ApplicationSpec& spec, double satisfaction, double local_deficit) {
  if (!spec.borrow_allowed) return false;
  if (local_deficit <= 0.0) return false;
  if (spec.borrow_threshold && satisfaction >= *spec.borrow_threshold) return false;
  return true;
}

std::vector<BorrowTransfer> plan_borrow(const std::map<std::string, data::ServerState>& cluster,
                                        const std::string& app, const std::string& to_server,
                                        double deficit) {
  std::vector<std::string> donors;
  std::vector<double> surplus;
  long long surplus_sum = 0;
  for (const auto& [server_id, server] : cluster) {
    if (server_id == to_server) continue;
    auto it = server.buckets().find(app);
    if (it == server.buckets().end()) continue;
    double s = it->second.level() - server.queued_token_cost(app);
    long long s_int = s > 0.0 ? static_cast<long long>(s) : 0;
    if (s_int <= 0) continue;
    donors.push_back(server_id);
    surplus.push_back(static_cast<double>(s_int));
    surplus_sum += s_int;
  }
  if (donors.empty()) return {};

  long long want = static_cast<long long>(std::ceil(deficit));
  long long total = std::min(want, surplus_sum);
  if (total <= 0) return {};

  std::vector<long long> amounts = apportion(total, surplus);
  std::vector<BorrowTransfer> transfers;
  for (std::size_t i = 0; i < donors.size(); ++i) {
    if (amounts[i] <= 0) continue;
    transfers.push_back({app, donors[i], to_server, static_cast<double>(amounts[i])});
  }
  return transfers;
}

void execute_transfers(std::map<std::string, data::ServerState>& cluster,
                       const std::vector<BorrowTransfer>& transfers,
                       metrics::Collector& collector, double now) {
  for (const BorrowTransfer& t : transfers) {
    data::ServerState& donor = cluster.at(t.from_server);
    data::ServerState& borrower = cluster.at(t.to_server);
    data::TokenBucket& from = donor.buckets().at(t.app_id);
    if (!from.try_consume(t.tokens)) throw InsufficientDonor(t.from_server);
    borrower.ensure_app(t.app_id);
    borrower.buckets().at(t.app_id).add_borrowed(t.tokens);
    collector.record_borrow(now, t.app_id, t.from_server, t.to_server, t.tokens);
  }
}

}  // namespace sdqos::ctrl
