#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sdqos/data_plane.hpp"
#include "sdqos/metrics.hpp"
#include "sdqos/policy.hpp"

namespace sdqos::ctrl {

// Desired QoS plus borrowing and scheduling parameters for one app.
struct ApplicationSpec {
  std::string app_id;
  double desired_mbps = 0.0;
  bool borrow_allowed = false;
  std::optional<double> borrow_threshold;
  double delay_target_s = 1.0;        // T_i
  double delay_violation_prob = 0.05; // delta_i
};

using EffectiveTable = std::map<std::string, ApplicationSpec>;

class DuplicateApp : public std::runtime_error {
 public:
  explicit DuplicateApp(const std::string& app)
      : std::runtime_error("duplicate app id " + app) {}
};

class NoServers : public std::runtime_error {
 public:
  NoServers() : std::runtime_error("token rate generation needs at least one server") {}
};

// Merges Desired QoS with the policy registry. Policy rate overrides the
// spec rate; borrow fields from the registry override spec fields.
EffectiveTable sync_desired_qos(const std::vector<ApplicationSpec>& specs,
                                const policy::PolicyRegistry& registry);

struct TokenRateTable {
  double epoch_len_s = 0.0;
  std::map<std::string, double> per_app_rate;  // tokens per second
  std::map<std::pair<std::string, std::string>, long long> per_server_share;  // tokens/epoch

  long long share(const std::string& app, const std::string& server) const {
    auto it = per_server_share.find({app, server});
    return it == per_server_share.end() ? 0 : it->second;
  }
};

// Equal distribution across servers with largest-remainder rounding, so
// per-app shares differ by at most one token.
TokenRateTable generate_token_rates(const EffectiveTable& specs,
                                    const std::vector<std::string>& servers,
                                    double epoch_len_s, std::uint64_t bytes_per_token);

// Refills every (app, server) bucket by its share; sets bucket capacity to
// twice the per-epoch allotment and records waste and granted tokens.
void distribute_tokens(std::map<std::string, data::ServerState>& cluster,
                       const TokenRateTable& table, metrics::Collector& collector,
                       double now);

bool borrow_eligible(const ApplicationSpec& spec, double satisfaction, double local_deficit);

struct BorrowTransfer {
  std::string app_id;
  std::string from_server;
  std::string to_server;
  double tokens = 0.0;
};

// Plans donor transfers for one (app, server) deficit. Donor surplus is
// the bucket level beyond the local queued token demand; the total moved
// is min(deficit, sum of surpluses), split proportionally with
// largest-remainder integer rounding, donors visited in server-id order.
std::vector<BorrowTransfer> plan_borrow(const std::map<std::string, data::ServerState>& cluster,
                                        const std::string& app, const std::string& to_server,
                                        double deficit);

class InsufficientDonor : public std::runtime_error {
 public:
  explicit InsufficientDonor(const std::string& server)
      : std::runtime_error("donor " + server + " no longer holds the planned tokens") {}
};

// Moves tokens; borrowed tokens bypass the receiving bucket's capacity
// clamp so transfers conserve the per-app cluster-wide token sum.
void execute_transfers(std::map<std::string, data::ServerState>& cluster,
                       const std::vector<BorrowTransfer>& transfers,
                       metrics::Collector& collector, double now);

}  // namespace sdqos::ctrl
