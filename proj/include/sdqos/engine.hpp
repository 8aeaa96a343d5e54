#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "sdqos/config.hpp"
#include "sdqos/control_plane.hpp"
#include "sdqos/data_plane.hpp"
#include "sdqos/metrics.hpp"
#include "sdqos/rng.hpp"
#include "sdqos/scheduler.hpp"

namespace sdqos::sim {

// Same-timestamp kind priority: tokens land before service, service before
// new arrivals, metrics flush last.
enum class EventKind : int { EpochBoundary = 0, ServerTick = 1, Arrival = 2, MetricsFlush = 3 };

struct SimEvent {
  double time = 0.0;
  EventKind kind = EventKind::EpochBoundary;
  std::uint64_t seq = 0;
  std::string server_id;       // ServerTick
  data::IORequest request;     // Arrival
  std::size_t stream_index = 0;  // Arrival
};

class TimeTravel : public std::runtime_error {
 public:
  TimeTravel() : std::runtime_error("event scheduled before current clock") {}
};

// Min-heap over (time, kind, seq); seq assigned at scheduling time.
class EventQueue {
 public:
  void schedule(SimEvent ev, double clock) {
    if (ev.time < clock) throw TimeTravel();
    ev.seq = next_seq_++;
    heap_.push_back(std::move(ev));
    std::push_heap(heap_.begin(), heap_.end(), after);
  }

  bool empty() const { return heap_.empty(); }
  const SimEvent& top() const { return heap_.front(); }

  SimEvent pop() {
    std::pop_heap(heap_.begin(), heap_.end(), after);
    SimEvent ev = std::move(heap_.back());
    heap_.pop_back();
    return ev;
  }

 private:
  static bool after(const SimEvent& a, const SimEvent& b) {
    if (a.time != b.time) return a.time > b.time;
    if (a.kind != b.kind) return static_cast<int>(a.kind) > static_cast<int>(b.kind);
    return a.seq > b.seq;
  }
  std::vector<SimEvent> heap_;
  std::uint64_t next_seq_ = 0;
};

// Runtime state of one workload stream: its RNG substream plus the
// deterministic server-mapping counters.
class StreamRuntime {
 public:
  StreamRuntime(const cfg::WorkloadStream& config, std::size_t index, std::uint64_t seed,
                std::vector<std::string> server_ids);

  // Produces the arrival at `now` already targeted at a server, plus the
  // time of the following arrival.
  data::IORequest make_request(double now);
  double first_arrival_time();
  double next_arrival_time(double now);

 private:
  std::string pick_server();

  const cfg::WorkloadStream& config_;
  std::vector<std::string> server_ids_;
  Rng rng_;
  std::size_t rr_next_ = 0;
  std::vector<double> wrr_credit_;
  double interval_mean_;
};

// Per-epoch token-accounting snapshot for conservation checks.
struct EpochTrace {
  double time = 0.0;
  std::map<std::string, double> tokens_before_transfers;  // per app, cluster-wide
  std::map<std::string, double> tokens_after_transfers;
};

struct FlowCounts {
  std::uint64_t arrivals = 0;
  std::uint64_t served = 0;
  std::uint64_t rejected = 0;
  std::uint64_t queued_at_end = 0;
};

struct RunResult {
  metrics::Collector collector;
  metrics::MetricsReport report;
  std::map<std::string, double> effective_desired;  // at end of run
  std::vector<EpochTrace> epochs;
  std::map<std::string, FlowCounts> flows;
  double max_wait_s = 0.0;         // over completed requests
  double max_pending_age_s = 0.0;  // oldest request still queued at end
  double duration_s = 0.0;
  std::uint64_t seed = 0;
  double warmup_s = 0.0;

  void write_outputs(const std::filesystem::path& out_dir) const;
};

struct RunOptions {
  std::optional<std::uint64_t> seed_override;
  bool disable_borrowing = false;
  bool record_epoch_traces = false;
};

RunResult run(const cfg::SimConfig& config, double duration_s, const RunOptions& options = {});

}  // namespace sdqos::sim
