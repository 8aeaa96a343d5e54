#include "sdqos/engine.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace sdqos::sim {

StreamRuntime::StreamRuntime(const cfg::WorkloadStream& config, std::size_t index,
                             std::uint64_t seed, std::vector<std::string> server_ids)
    : config_(config),
      server_ids_(std::move(server_ids)),
      rng_(Rng::substream(seed, config.app_id + "/" + config.source_node + "/" +
                                    std::to_string(index))) {
  interval_mean_ = static_cast<double>(config_.request_size_bytes) /
                   (config_.arrival_process.rate_mbps * 1e6);
  if (config_.server_mapping.kind == cfg::ServerMapping::Kind::StaticWeights)
    wrr_credit_.assign(server_ids_.size(), 0.0);
}

std::string StreamRuntime::pick_server() {
  using Kind = cfg::ServerMapping::Kind;
  switch (config_.server_mapping.kind) {
    case Kind::RoundRobin: {
      std::size_t i = rr_next_;
      rr_next_ = (rr_next_ + 1) % server_ids_.size();
      return server_ids_[i];
    }
    case Kind::UniformRandom:
      return server_ids_[static_cast<std::size_t>(rng_.uniform() *
                                                  static_cast<double>(server_ids_.size()))];
    case Kind::StaticWeights:
      if (config_.arrival_process.kind == cfg::ArrivalProcess::Kind::Poisson) {
        return server_ids_[rng_.categorical(config_.server_mapping.weights)];
      } else {
        // Smooth weighted round-robin keeps the deterministic split exact.
        std::size_t best = 0;
        for (std::size_t i = 0; i < wrr_credit_.size(); ++i) {
          wrr_credit_[i] += config_.server_mapping.weights[i];
          if (wrr_credit_[i] > wrr_credit_[best]) best = i;
        }
        wrr_credit_[best] -= 1.0;
        return server_ids_[best];
      }
  }
  return server_ids_.front();
}

data::IORequest StreamRuntime::make_request(double now) {
  data::IORequest req;
  req.app_id = config_.app_id;
  req.size_bytes = config_.request_size_bytes;
  req.arrival_time = now;
  req.source_node = config_.source_node;
  req.target_server = pick_server();
  return req;
}

double StreamRuntime::first_arrival_time() { return next_arrival_time(0.0); }

double StreamRuntime::next_arrival_time(double now) {
  if (config_.arrival_process.kind == cfg::ArrivalProcess::Kind::Poisson)
    return now + rng_.exponential(interval_mean_);
  return now + interval_mean_;
}

namespace {

std::map<std::string, double> cluster_token_sums(
    const std::map<std::string, data::ServerState>& cluster) {
  std::map<std::string, double> sums;
  for (const auto& [id, server] : cluster)
    for (const auto& [app, bucket] : server.buckets()) sums[app] += bucket.level();
  return sums;
}

}  // namespace

RunResult run(const cfg::SimConfig& config, double duration_s, const RunOptions& options) {
  const std::uint64_t seed = options.seed_override.value_or(config.seed);
  const bool borrowing = config.borrowing_enabled && !options.disable_borrowing;
  const double tick_s = config.timing.tick_s;
  const auto ticks_per_epoch =
      static_cast<std::uint64_t>(std::llround(config.timing.epoch_s / tick_s));

  policy::PolicyRegistry registry = config.build_registry();

  std::vector<std::string> server_ids;
  std::map<std::string, data::ServerState> cluster;
  for (const cfg::ServerConfig& sc : config.servers) {
    server_ids.push_back(sc.id);
    cluster.emplace(sc.id, data::ServerState(sc.id, sc.phys_limit_mbps, config.bytes_per_token,
                                             config.queue_depth_limit));
  }
  std::sort(server_ids.begin(), server_ids.end());

  std::set<std::string> known_apps;
  for (const ctrl::ApplicationSpec& a : config.apps) known_apps.insert(a.app_id);

  std::vector<StreamRuntime> streams;
  streams.reserve(config.streams.size());
  for (std::size_t i = 0; i < config.streams.size(); ++i)
    streams.emplace_back(config.streams[i], i, seed, server_ids);

  metrics::Collector collector;
  RunResult result;
  result.duration_s = duration_s;
  result.seed = seed;
  result.warmup_s = config.timing.warmup_s;

  EventQueue queue;
  double clock = 0.0;

  // Tick/epoch times are always computed as tick_index * tick_s so the
  // epoch and tick events coincide exactly at epoch boundaries.
  std::uint64_t next_tick_index = 0;
  auto schedule_tick_round = [&](std::uint64_t tick_index) {
    double t = static_cast<double>(tick_index) * tick_s;
    if (t >= duration_s) return;
    if (tick_index % ticks_per_epoch == 0)
      queue.schedule({t, EventKind::EpochBoundary, 0, "", {}, 0}, clock);
    for (const std::string& sid : server_ids)
      queue.schedule({t, EventKind::ServerTick, 0, sid, {}, 0}, clock);
  };
  schedule_tick_round(next_tick_index++);

  for (std::size_t i = 0; i < streams.size(); ++i) {
    double t = streams[i].first_arrival_time();
    if (t < duration_s)
      queue.schedule({t, EventKind::Arrival, 0, "", streams[i].make_request(t), i}, clock);
  }

  double next_flush = config.timing.window_s;
  if (next_flush <= duration_s)
    queue.schedule({next_flush, EventKind::MetricsFlush, 0, "", {}, 0}, clock);
  double flushed_until = 0.0;

  ctrl::TokenRateTable rate_table;
  ctrl::EffectiveTable effective;
  sched::SchedWeights weights;

  auto epoch_step = [&](double now) {
    effective = ctrl::sync_desired_qos(config.apps, registry);
    rate_table = ctrl::generate_token_rates(effective, server_ids, config.timing.epoch_s,
                                            config.bytes_per_token);
    ctrl::distribute_tokens(cluster, rate_table, collector, now);

    weights.gamma.clear();
    weights.base_allotment.clear();
    for (const auto& [app, spec] : effective)
      weights.gamma[app] = sched::gamma(spec.delay_violation_prob, spec.delay_target_s);
    for (const auto& [key, share] : rate_table.per_server_share)
      weights.base_allotment[key] = static_cast<double>(share);

    EpochTrace trace;
    trace.time = now;
    if (options.record_epoch_traces) trace.tokens_before_transfers = cluster_token_sums(cluster);

    if (borrowing) {
      for (const auto& [app, spec] : effective) {
        if (!spec.borrow_allowed) continue;
        double sat = collector.satisfaction(app, spec.desired_mbps, config.timing.window_s, now);
        for (const std::string& sid : server_ids) {
          data::ServerState& server = cluster.at(sid);
          server.ensure_app(app);
          double deficit =
              server.queued_token_cost(app) - server.buckets().at(app).level();
          if (!ctrl::borrow_eligible(spec, sat, deficit)) continue;
          auto transfers = ctrl::plan_borrow(cluster, app, sid, deficit);
          ctrl::execute_transfers(cluster, transfers, collector, now);
        }
      }
    }

    if (options.record_epoch_traces) {
      trace.tokens_after_transfers = cluster_token_sums(cluster);
      result.epochs.push_back(std::move(trace));
    }
  };

  auto tick_step = [&](const std::string& sid, double now) {
    data::ServerState& server = cluster.at(sid);
    server.begin_tick(tick_s);
    while (auto app = sched::select_next(server, weights, now)) {
      data::ServeOutcome outcome = server.try_serve_head(*app, now);
      if (outcome.kind != data::ServeOutcome::Kind::Served) break;  // unreachable by selection
      collector.record_service({now, *app, sid, outcome.bytes});
      double wait = now - outcome.request.arrival_time;
      if (wait > result.max_wait_s) result.max_wait_s = wait;
    }
  };

  while (!queue.empty() && queue.top().time < duration_s) {
    SimEvent ev = queue.pop();
    clock = ev.time;
    switch (ev.kind) {
      case EventKind::EpochBoundary: {
        epoch_step(clock);
        // The epoch event leads the tick round; schedule the next round here.
        break;
      }
      case EventKind::ServerTick: {
        tick_step(ev.server_id, clock);
        if (ev.server_id == server_ids.back()) schedule_tick_round(next_tick_index++);
        break;
      }
      case EventKind::Arrival: {
        collector.record_arrival(ev.request.app_id, clock);
        std::string cls = data::classify(ev.request, known_apps);
        data::ServerState& server = cluster.at(ev.request.target_server);
        if (!server.enqueue(ev.request, cls)) collector.record_rejected(ev.request.app_id);
        double t = streams[ev.stream_index].next_arrival_time(clock);
        if (t < duration_s)
          queue.schedule({t, EventKind::Arrival, 0, "", streams[ev.stream_index].make_request(t),
                          ev.stream_index},
                         clock);
        break;
      }
      case EventKind::MetricsFlush: {
        collector.flush_window(flushed_until, clock);
        flushed_until = clock;
        double t = clock + config.timing.window_s;
        if (t <= duration_s) queue.schedule({t, EventKind::MetricsFlush, 0, "", {}, 0}, clock);
        break;
      }
    }
  }
  if (flushed_until < duration_s) collector.flush_window(flushed_until, duration_s);

  for (const std::string& app : known_apps) {
    FlowCounts fc;
    fc.arrivals = collector.arrivals_total(app);
    fc.served = collector.served_count(app);
    fc.rejected = collector.rejected_count(app);
    result.flows[app] = fc;
  }
  for (const auto& [sid, server] : cluster) {
    for (const auto& [app, q] : server.queues()) {
      if (result.flows.count(app)) result.flows[app].queued_at_end += q.pending.size();
      if (auto hol = q.hol_since())
        result.max_pending_age_s = std::max(result.max_pending_age_s, duration_s - *hol);
    }
  }

  effective = ctrl::sync_desired_qos(config.apps, registry);
  for (const auto& [app, spec] : effective) result.effective_desired[app] = spec.desired_mbps;

  result.report =
      collector.build_report(result.effective_desired, config.timing.warmup_s, duration_s);
  result.collector = std::move(collector);
  return result;
}

void RunResult::write_outputs(const std::filesystem::path& out_dir) const {
  collector.export_files(out_dir, seed, duration_s, warmup_s, effective_desired);
}

}  // namespace sdqos::sim
