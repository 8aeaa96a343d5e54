#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "sdqos/data_plane.hpp"

namespace sdqos::sched {

// Per-app urgency weight gamma_i = -ln(delta) / T for delay target T and
// violation probability delta.
inline double gamma(double delta, double T) {
  if (!(delta > 0.0 && delta < 1.0) || !(T > 0.0))
    throw std::domain_error("gamma requires 0 < delta < 1 and T > 0");
  return -std::log(delta) / T;
}

struct SchedWeights {
  std::map<std::string, double> gamma;  // app -> gamma_i
  // (app, server) -> tokens per epoch, mirroring the token rate table.
  std::map<std::pair<std::string, std::string>, double> base_allotment;

  double allotment(const std::string& app, const std::string& server) const {
    auto it = base_allotment.find({app, server});
    return it == base_allotment.end() ? 0.0 : it->second;
  }
  double gamma_of(const std::string& app) const {
    auto it = gamma.find(app);
    return it == gamma.end() ? 0.0 : it->second;
  }
};

// Extended M-LWDF metric: gamma_i * W_i * rho_i, where W_i is the
// head-of-line delay and rho_i = level / base allotment. Borrowed tokens
// raise rho_i and with it the app's claim on the server.
inline double priority(const data::AppQueue& queue, const data::TokenBucket& bucket,
                       double gamma_i, double allotment, double bytes_per_token, double now) {
  auto hol = queue.hol_since();
  if (!hol) return 0.0;
  double cost = static_cast<double>(
      data::token_cost(queue.pending.front().size_bytes,
                       static_cast<std::uint64_t>(bytes_per_token)));
  if (bucket.level() < cost) return 0.0;
  if (allotment <= 0.0) return 0.0;
  double hol_delay = now - *hol;
  if (hol_delay < 0.0) hol_delay = 0.0;
  double richness = bucket.level() / allotment;
  return gamma_i * hol_delay * richness;
}

// Picks the serviceable app with maximal priority. Ties go to the larger
// head-of-line delay, then the lexicographically smaller app id.
inline std::optional<std::string> select_next(const data::ServerState& server,
                                              const SchedWeights& weights, double now) {
  std::optional<std::string> best;
  double best_prio = -1.0;
  double best_delay = -1.0;
  for (const auto& [app, queue] : server.queues()) {
    if (queue.pending.empty()) continue;
    const data::IORequest& head = queue.pending.front();
    const data::TokenBucket& bucket = server.buckets().at(app);
    double cost =
        static_cast<double>(data::token_cost(head.size_bytes, server.bytes_per_token()));
    if (bucket.level() < cost) continue;
    if (server.capacity_budget_bytes() < static_cast<double>(head.size_bytes)) continue;
    double prio = priority(queue, bucket, weights.gamma_of(app),
                           weights.allotment(app, server.id()),
                           static_cast<double>(server.bytes_per_token()), now);
    double delay = now - *queue.hol_since();
    if (!best || prio > best_prio || (prio == best_prio && delay > best_delay)) {
      best = app;
      best_prio = prio;
      best_delay = delay;
    }
  }
  return best;
}

}  // namespace sdqos::sched
