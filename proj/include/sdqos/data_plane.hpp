#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>

namespace sdqos::data {

inline constexpr const char* kBestEffortClass = "best-effort";

struct IORequest {
  std::string app_id;
  std::uint64_t size_bytes = 0;
  double arrival_time = 0.0;
  std::string source_node;
  std::string target_server;
};

// FIFO per-application queue; hol_since() is the head's arrival time.
struct AppQueue {
  std::string app_id;
  std::deque<IORequest> pending;

  std::optional<double> hol_since() const {
    if (pending.empty()) return std::nullopt;
    return pending.front().arrival_time;
  }
};

// Virtual token bucket. refill() clamps at capacity; borrowed tokens are
// credited past the cap so transfers never destroy tokens.
class TokenBucket {
 public:
  double level() const { return level_; }
  double capacity() const { return capacity_; }
  void set_capacity(double cap) { capacity_ = cap; }

  // Returns the wasted (clamped-off) amount.
  double refill(double tokens) {
    double target = level_ + tokens;
    double wasted = 0.0;
    if (target > capacity_ && tokens > 0.0) {
      wasted = target - std::max(level_, capacity_);
      if (wasted < 0.0) wasted = 0.0;
      target = std::max(level_, capacity_);
    }
    level_ = target;
    return wasted;
  }

  void add_borrowed(double tokens) { level_ += tokens; }

  bool try_consume(double cost) {
    if (level_ < cost) return false;
    level_ -= cost;
    return true;
  }

 private:
  double level_ = 0.0;
  double capacity_ = 0.0;
};

struct ServeOutcome {
  enum class Kind { Served, EmptyQueue, NoTokens, NoCapacity };
  Kind kind = Kind::EmptyQueue;
  std::uint64_t bytes = 0;
  IORequest request;  // populated when Served
};

class UnknownApp : public std::runtime_error {
 public:
  explicit UnknownApp(const std::string& app) : std::runtime_error("unknown app " + app) {}
};

// Classification is total: registered apps map to themselves, everything
// else lands in the zero-rate best-effort class.
inline std::string classify(const IORequest& request, const std::set<std::string>& known) {
  return known.count(request.app_id) ? request.app_id : std::string(kBestEffortClass);
}

inline std::uint64_t token_cost(std::uint64_t size_bytes, std::uint64_t bytes_per_token) {
  return (size_bytes + bytes_per_token - 1) / bytes_per_token;
}

// One storage server: per-app queues and buckets plus the per-tick byte
// budget derived from the physical bandwidth ceiling.
class ServerState {
 public:
  ServerState(std::string id, double phys_limit_mbps, std::uint64_t bytes_per_token,
              std::uint64_t queue_depth_limit = 10000)
      : id_(std::move(id)),
        phys_limit_mbps_(phys_limit_mbps),
        bytes_per_token_(bytes_per_token),
        queue_depth_limit_(queue_depth_limit) {}

  const std::string& id() const { return id_; }
  double phys_limit_mbps() const { return phys_limit_mbps_; }
  std::uint64_t bytes_per_token() const { return bytes_per_token_; }
  double capacity_budget_bytes() const { return budget_bytes_; }

  void ensure_app(const std::string& app) {
    if (!queues_.count(app)) {
      queues_[app] = AppQueue{app, {}};
      buckets_[app] = TokenBucket{};
    }
  }

  // False means the queue hit its depth limit and the request was rejected.
  bool enqueue(const IORequest& request, const std::string& app) {
    ensure_app(app);
    AppQueue& q = queues_[app];
    if (q.pending.size() >= queue_depth_limit_) return false;
    q.pending.push_back(request);
    return true;
  }

  void begin_tick(double tick_len_s) { budget_bytes_ = phys_limit_mbps_ * tick_len_s * 1e6; }

  // Blocked reasons are checked in fixed order: EmptyQueue, NoTokens, NoCapacity.
  ServeOutcome try_serve_head(const std::string& app, double /*now*/) {
    auto qit = queues_.find(app);
    if (qit == queues_.end()) throw UnknownApp(app);
    AppQueue& q = qit->second;
    if (q.pending.empty()) return {ServeOutcome::Kind::EmptyQueue};
    const IORequest& head = q.pending.front();
    double cost = static_cast<double>(token_cost(head.size_bytes, bytes_per_token_));
    TokenBucket& bucket = buckets_[app];
    if (bucket.level() < cost) return {ServeOutcome::Kind::NoTokens};
    if (budget_bytes_ < static_cast<double>(head.size_bytes))
      return {ServeOutcome::Kind::NoCapacity};
    ServeOutcome out{ServeOutcome::Kind::Served, head.size_bytes, head};
    bucket.try_consume(cost);
    budget_bytes_ -= static_cast<double>(head.size_bytes);
    q.pending.pop_front();
    return out;
  }

  // Token cost of the whole backlog of one app (projected local need).
  double queued_token_cost(const std::string& app) const {
    auto it = queues_.find(app);
    if (it == queues_.end()) return 0.0;
    std::uint64_t cost = 0;
    for (const IORequest& r : it->second.pending)
      cost += token_cost(r.size_bytes, bytes_per_token_);
    return static_cast<double>(cost);
  }

  std::map<std::string, AppQueue>& queues() { return queues_; }
  const std::map<std::string, AppQueue>& queues() const { return queues_; }
  std::map<std::string, TokenBucket>& buckets() { return buckets_; }
  const std::map<std::string, TokenBucket>& buckets() const { return buckets_; }

 private:
  std::string id_;
  double phys_limit_mbps_;
  std::uint64_t bytes_per_token_;
  std::uint64_t queue_depth_limit_;
  double budget_bytes_ = 0.0;
  std::map<std::string, AppQueue> queues_;
  std::map<std::string, TokenBucket> buckets_;
};

}  // namespace sdqos::data
