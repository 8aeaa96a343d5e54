#include "sdqos/metrics.hpp"

#include <algorithm>
#include <array>
#include <fstream>

#include "json.hpp"
#include "sdqos/util.hpp"

namespace sdqos::metrics {

double jain_index(const std::vector<double>& values) {
  double sum = 0.0, sq = 0.0;
  for (double v : values) {
    sum += v;
    sq += v * v;
  }
  if (sq <= 0.0) throw std::domain_error("jain_index: all values are zero");
  return (sum * sum) / (static_cast<double>(values.size()) * sq);
}

void Collector::record_service(const MetricsSample& sample) {
  Series& s = per_app_[sample.app_id];
  s.times.push_back(sample.time);
  std::uint64_t prev = s.prefix_bytes.empty() ? 0 : s.prefix_bytes.back();
  s.prefix_bytes.push_back(prev + sample.bytes_served);
  served_count_[sample.app_id] += 1;
  samples_.push_back(sample);
}

void Collector::record_arrival(const std::string& app, double time) {
  arrivals_[app].push_back(time);
}

void Collector::record_rejected(const std::string& app) {
  ++rejected_;
  rejected_count_[app] += 1;
}

void Collector::record_waste(double time, const std::string& app, const std::string& server,
                             double tokens) {
  if (tokens <= 0.0) return;
  wasted_total_ += tokens;
  waste_events_.push_back({time, app, server, tokens});
}

void Collector::record_borrow(double time, const std::string& app, const std::string& /*from*/,
                              const std::string& to, double tokens) {
  if (tokens <= 0.0) return;
  borrowed_total_ += tokens;
  borrow_events_.push_back({time, app, to, tokens});
}

void Collector::record_granted(const std::string& app, double tokens) {
  granted_[app] += tokens;
}

std::uint64_t Collector::served_bytes(const std::string& app, double t0, double t1) const {
  auto it = per_app_.find(app);
  if (it == per_app_.end()) return 0;
  const Series& s = it->second;
  auto lo = std::lower_bound(s.times.begin(), s.times.end(), t0) - s.times.begin();
  auto hi = std::lower_bound(s.times.begin(), s.times.end(), t1) - s.times.begin();
  std::uint64_t before_lo = lo == 0 ? 0 : s.prefix_bytes[lo - 1];
  std::uint64_t before_hi = hi == 0 ? 0 : s.prefix_bytes[hi - 1];
  return before_hi - before_lo;
}

double Collector::window_bandwidth(const std::string& app, double t0, double t1) const {
  return static_cast<double>(served_bytes(app, t0, t1)) / (t1 - t0) / 1e6;
}

bool Collector::demand_in_window(const std::string& app, double t0, double t1) const {
  auto it = arrivals_.find(app);
  if (it == arrivals_.end()) return false;
  auto lo = std::lower_bound(it->second.begin(), it->second.end(), t0);
  return lo != it->second.end() && *lo < t1;
}

double Collector::satisfaction(const std::string& app, double desired_mbps, double window_s,
                               double now) const {
  // Nudge the window start so a service event logged exactly one window ago
  // is not dropped when now - window_s rounds up past it.
  double t0 = now - window_s - 1e-9;
  if (t0 < 0.0) t0 = 0.0;
  double span = now - t0;
  if (span <= 0.0) return 1.0;
  if (!demand_in_window(app, t0, now)) return 1.0;
  if (desired_mbps <= 0.0) return 1.0;
  double mbps = static_cast<double>(served_bytes(app, t0, now)) / span / 1e6;
  double sat = mbps / desired_mbps;
  return std::clamp(sat, 0.0, 1.0);
}

double Collector::granted_total(const std::string& app) const {
  auto it = granted_.find(app);
  return it == granted_.end() ? 0.0 : it->second;
}

std::uint64_t Collector::arrivals_total(const std::string& app) const {
  auto it = arrivals_.find(app);
  return it == arrivals_.end() ? 0 : it->second.size();
}

std::uint64_t Collector::served_count(const std::string& app) const {
  auto it = served_count_.find(app);
  return it == served_count_.end() ? 0 : it->second;
}

std::uint64_t Collector::rejected_count(const std::string& app) const {
  auto it = rejected_count_.find(app);
  return it == rejected_count_.end() ? 0 : it->second;
}

void Collector::flush_window(double t0, double t1) {
  // (app, server) -> [bytes, borrowed, wasted]; events arrive in time order.
  std::map<std::pair<std::string, std::string>, std::array<double, 3>> agg;
  while (sample_cursor_ < samples_.size() && samples_[sample_cursor_].time < t1) {
    const MetricsSample& s = samples_[sample_cursor_++];
    agg[{s.app_id, s.server_id}][0] += static_cast<double>(s.bytes_served);
  }
  while (borrow_cursor_ < borrow_events_.size() && borrow_events_[borrow_cursor_].time < t1) {
    const TokenEvent& e = borrow_events_[borrow_cursor_++];
    agg[{e.app, e.server}][1] += e.tokens;
  }
  while (waste_cursor_ < waste_events_.size() && waste_events_[waste_cursor_].time < t1) {
    const TokenEvent& e = waste_events_[waste_cursor_++];
    agg[{e.app, e.server}][2] += e.tokens;
  }
  for (const auto& [key, vals] : agg) {
    if (vals[0] == 0.0 && vals[1] == 0.0 && vals[2] == 0.0) continue;
    rows_.push_back({t0, key.first, key.second, vals[0] / 1e6, vals[1], vals[2]});
  }
}

MetricsReport Collector::build_report(const std::map<std::string, double>& desired_mbps,
                                      double warmup_s, double duration_s) const {
  MetricsReport report;
  double span = duration_s - warmup_s;
  if (span <= 0.0) span = duration_s;

  std::map<std::string, double> mb_by_app;
  for (const WindowRow& row : rows_) {
    if (row.time_s < warmup_s - 1e-9) continue;
    mb_by_app[row.app_id] += row.mb_served;
    report.per_server_mbps[{row.app_id, row.server_id}] += row.mb_served / span;
  }
  std::vector<double> sats;
  for (const auto& [app, desired] : desired_mbps) {
    AppReport ar;
    ar.desired_mbps = desired;
    auto it = mb_by_app.find(app);
    ar.achieved_mbps = it == mb_by_app.end() ? 0.0 : it->second / span;
    ar.satisfaction = desired > 0.0 ? std::min(1.0, ar.achieved_mbps / desired) : 1.0;
    sats.push_back(ar.satisfaction);
    report.apps[app] = ar;
  }
  bool any_positive = std::any_of(sats.begin(), sats.end(), [](double v) { return v > 0.0; });
  report.fairness_jain = any_positive ? jain_index(sats) : 0.0;
  report.borrowed_tokens = borrowed_total_;
  report.wasted_tokens = wasted_total_;
  report.rejected = rejected_;
  return report;
}

void Collector::export_files(const std::filesystem::path& out_dir, std::uint64_t seed,
                             double duration_s, double warmup_s,
                             const std::map<std::string, double>& desired_mbps) const {
  std::filesystem::create_directories(out_dir);

  std::ofstream csv(out_dir / "timeseries.csv", std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot write " + (out_dir / "timeseries.csv").string());
  csv << "time_s,app_id,server_id,mb_served,tokens_borrowed,tokens_wasted\n";
  for (const WindowRow& row : rows_) {
    csv << format_double(row.time_s) << ',' << row.app_id << ',' << row.server_id << ','
        << format_double(row.mb_served) << ',' << format_double(row.tokens_borrowed) << ','
        << format_double(row.tokens_wasted) << '\n';
  }
  csv.close();

  MetricsReport report = build_report(desired_mbps, warmup_s, duration_s);
  nlohmann::ordered_json doc;
  doc["run"] = {{"seed", seed}, {"duration_s", duration_s}, {"warmup_s", warmup_s}};
  nlohmann::ordered_json apps = nlohmann::ordered_json::object();
  for (const auto& [app, ar] : report.apps) {
    apps[app] = {{"desired_mbps", ar.desired_mbps},
                 {"achieved_mbps", ar.achieved_mbps},
                 {"satisfaction", ar.satisfaction}};
  }
  doc["apps"] = apps;
  doc["fairness_jain"] = report.fairness_jain;
  doc["totals"] = {{"borrowed_tokens", report.borrowed_tokens},
                   {"wasted_tokens", report.wasted_tokens},
                   {"rejected", report.rejected}};

  std::ofstream js(out_dir / "summary.json", std::ios::trunc);
  if (!js) throw std::runtime_error("cannot write " + (out_dir / "summary.json").string());
  js << doc.dump(2) << '\n';
}

}  // namespace sdqos::metrics
