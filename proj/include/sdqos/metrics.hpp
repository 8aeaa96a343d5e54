#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sdqos::metrics {

struct MetricsSample {
  double time = 0.0;
  std::string app_id;
  std::string server_id;
  std::uint64_t bytes_served = 0;
};

// One exported CSV row: aggregates over a flush window.
struct WindowRow {
  double time_s = 0.0;  // window start
  std::string app_id;
  std::string server_id;
  double mb_served = 0.0;
  double tokens_borrowed = 0.0;
  double tokens_wasted = 0.0;
};

struct AppReport {
  double desired_mbps = 0.0;
  double achieved_mbps = 0.0;
  double satisfaction = 0.0;
};

struct MetricsReport {
  std::map<std::string, AppReport> apps;
  std::map<std::pair<std::string, std::string>, double> per_server_mbps;
  double fairness_jain = 0.0;
  double borrowed_tokens = 0.0;
  double wasted_tokens = 0.0;
  std::uint64_t rejected = 0;
};

// Jain fairness index (sum x)^2 / (n * sum x^2). Throws std::domain_error
// when every value is zero.
double jain_index(const std::vector<double>& values);

class Collector {
 public:
  void record_service(const MetricsSample& sample);
  void record_arrival(const std::string& app, double time);
  void record_rejected(const std::string& app);
  void record_waste(double time, const std::string& app, const std::string& server,
                    double tokens);
  void record_borrow(double time, const std::string& app, const std::string& from,
                     const std::string& to, double tokens);
  void record_granted(const std::string& app, double tokens);

  std::uint64_t served_bytes(const std::string& app, double t0, double t1) const;
  double window_bandwidth(const std::string& app, double t0, double t1) const;
  bool demand_in_window(const std::string& app, double t0, double t1) const;

  // Achieved/desired over the trailing window, clamped to [0, 1]; idle
  // apps (no arrivals in the window) count as satisfied.
  double satisfaction(const std::string& app, double desired_mbps, double window_s,
                      double now) const;

  // Aggregates [t0, t1) into CSV rows; called at each flush boundary.
  void flush_window(double t0, double t1);

  const std::vector<WindowRow>& rows() const { return rows_; }
  std::uint64_t rejected_total() const { return rejected_; }
  double borrowed_total() const { return borrowed_total_; }
  double wasted_total() const { return wasted_total_; }
  double granted_total(const std::string& app) const;
  std::uint64_t arrivals_total(const std::string& app) const;
  std::uint64_t served_count(const std::string& app) const;
  std::uint64_t rejected_count(const std::string& app) const;

  // Steady-state summary from the flushed rows (time_s >= warmup).
  MetricsReport build_report(const std::map<std::string, double>& desired_mbps,
                             double warmup_s, double duration_s) const;

  void export_files(const std::filesystem::path& out_dir, std::uint64_t seed,
                    double duration_s, double warmup_s,
                    const std::map<std::string, double>& desired_mbps) const;

 private:
  struct Series {
    std::vector<double> times;
    std::vector<std::uint64_t> prefix_bytes;  // prefix_bytes[i] = sum of first i samples
  };

  struct TokenEvent {
    double time;
    std::string app;
    std::string server;
    double tokens;
  };

  std::map<std::string, Series> per_app_;
  std::map<std::string, std::vector<double>> arrivals_;
  std::map<std::string, std::uint64_t> served_count_;
  std::map<std::string, std::uint64_t> rejected_count_;
  std::map<std::string, double> granted_;
  std::vector<MetricsSample> samples_;
  std::vector<TokenEvent> waste_events_;
  std::vector<TokenEvent> borrow_events_;  // server = receiving side
  std::vector<WindowRow> rows_;
  std::size_t sample_cursor_ = 0;
  std::size_t waste_cursor_ = 0;
  std::size_t borrow_cursor_ = 0;
  std::uint64_t rejected_ = 0;
  double borrowed_total_ = 0.0;
  double wasted_total_ = 0.0;
};

}  // namespace sdqos::metrics
