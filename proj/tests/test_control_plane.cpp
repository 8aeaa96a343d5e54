#include <cmath>
#include <algorithm>
#include "doctest.h"
#include "sdqos/control_plane.hpp"
#include "sdqos/util.hpp"

using namespace sdqos;
using namespace sdqos::ctrl;

namespace {

constexpr std::uint64_t kMB = 1000000;

ApplicationSpec spec(const std::string& app, double mbps) {
  ApplicationSpec s;
  s.app_id = app;
  s.desired_mbps = mbps;
  return s;
}

std::map<std::string, data::ServerState> three_servers() {
  std::map<std::string, data::ServerState> cluster;
  for (const char* id : {"s1", "s2", "s3"})
    cluster.emplace(id, data::ServerState(id, 500.0, kMB));
  return cluster;
}

double cluster_sum(const std::map<std::string, data::ServerState>& cluster,
                   const std::string& app) {
  double sum = 0.0;
  for (const auto& [id, s] : cluster) {
    auto it = s.buckets().find(app);
    if (it != s.buckets().end()) sum += it->second.level();
  }
  return sum;
}

}  // namespace

TEST_CASE("sync_desired_qos merges policies over specs") {
  policy::PolicyRegistry reg;
  auto table = sync_desired_qos({spec("app-1", 300.0)}, reg);
  CHECK(table.at("app-1").desired_mbps == 300.0);

  reg.apply(policy::parse_policy("<app-1, rate=100 MB/s>"));
  table = sync_desired_qos({spec("app-1", 300.0)}, reg);
  CHECK(table.at("app-1").desired_mbps == 100.0);  // policy overrides Desired QoS

  policy::PolicyRegistry reg2;
  reg2.apply(policy::parse_policy("<app-i, borrow=TRUE, thres=0.8>"));
  auto table2 = sync_desired_qos({spec("app-i", 300.0)}, reg2);
  CHECK(table2.at("app-i").desired_mbps == 300.0);
  CHECK(table2.at("app-i").borrow_allowed);
  CHECK(table2.at("app-i").borrow_threshold == 0.8);

  CHECK_THROWS_AS(sync_desired_qos({spec("a", 1.0), spec("a", 2.0)}, reg), DuplicateApp);
}

TEST_CASE("generate_token_rates distributes equally with largest-remainder rounding") {
  policy::PolicyRegistry reg;
  auto table = sync_desired_qos({spec("app-1", 300.0)}, reg);

  auto rates = generate_token_rates(table, {"s1", "s2", "s3"}, 1.0, kMB);
  CHECK(rates.per_app_rate.at("app-1") == 300.0);
  for (const char* s : {"s1", "s2", "s3"}) CHECK(rates.share("app-1", s) == 100);

  auto one = generate_token_rates(sync_desired_qos({spec("a", 100.0)}, reg), {"s1"}, 1.0, kMB);
  CHECK(one.share("a", "s1") == 100);

  // 100 tokens over 3 servers: shares {34, 33, 33}, differing by at most one.
  auto uneven =
      generate_token_rates(sync_desired_qos({spec("a", 100.0)}, reg), {"s1", "s2", "s3"}, 1.0, kMB);
  CHECK(uneven.share("a", "s1") == 34);
  CHECK(uneven.share("a", "s2") == 33);
  CHECK(uneven.share("a", "s3") == 33);

  CHECK_THROWS_AS(generate_token_rates(table, {}, 1.0, kMB), NoServers);
}

TEST_CASE("equal-distribution invariant holds for many app/server counts") {
  policy::PolicyRegistry reg;
  for (double mbps : {1.0, 7.0, 100.0, 299.0, 1000.0}) {
    for (std::size_t n : {1u, 2u, 3u, 5u, 7u}) {
      std::vector<std::string> servers;
      for (std::size_t i = 0; i < n; ++i) servers.push_back("s" + std::to_string(i));
      auto rates =
          generate_token_rates(sync_desired_qos({spec("a", mbps)}, reg), servers, 1.0, kMB);
      long long lo = 1LL << 60, hi = -1, sum = 0;
      for (const auto& s : servers) {
        long long v = rates.share("a", s);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        sum += v;
      }
      CHECK(hi - lo <= 1);
      CHECK(sum == std::llround(mbps));
    }
  }
}

TEST_CASE("distribute_tokens refills every bucket and records waste") {
  auto cluster = three_servers();
  metrics::Collector collector;
  policy::PolicyRegistry reg;
  auto table = sync_desired_qos({spec("app-1", 300.0), spec("app-2", 150.0)}, reg);
  auto rates = generate_token_rates(table, {"s1", "s2", "s3"}, 1.0, kMB);

  distribute_tokens(cluster, rates, collector, 0.0);
  CHECK(cluster.at("s1").buckets().at("app-1").level() == 100.0);
  CHECK(cluster.at("s2").buckets().at("app-2").level() == 50.0);
  CHECK(collector.wasted_total() == 0.0);

  // Second epoch: buckets clamp at 2x the allotment, wasting the overflow.
  distribute_tokens(cluster, rates, collector, 1.0);
  distribute_tokens(cluster, rates, collector, 2.0);
  CHECK(cluster.at("s1").buckets().at("app-1").level() == 200.0);
  CHECK(collector.wasted_total() == doctest::Approx(450.0));  // 100+50 wasted on 3 servers
}

TEST_CASE("satisfaction ratio follows the served/desired window") {
  metrics::Collector c;
  // 250 MB served over [0, 1) against 300 MB/s desired -> 0.8333...
  for (int i = 0; i < 250; ++i) {
    c.record_arrival("app-1", i * 0.004);
    c.record_service({i * 0.004, "app-1", "s1", kMB});
  }
  CHECK(c.satisfaction("app-1", 300.0, 1.0, 1.0) == doctest::Approx(250.0 / 300.0).epsilon(1e-9));

  metrics::Collector zero;
  zero.record_arrival("app-1", 0.5);
  CHECK(zero.satisfaction("app-1", 300.0, 1.0, 1.0) == 0.0);

  metrics::Collector idle;
  CHECK(idle.satisfaction("app-1", 300.0, 1.0, 1.0) == 1.0);
}

TEST_CASE("borrow_eligible honors permission, deficit and threshold") {
  ApplicationSpec s = spec("app-1", 300.0);

  s.borrow_allowed = false;
  CHECK_FALSE(borrow_eligible(s, 0.1, 50.0));

  s.borrow_allowed = true;
  CHECK(borrow_eligible(s, 0.99, 50.0));       // no threshold
  CHECK_FALSE(borrow_eligible(s, 0.5, 0.0));   // no deficit

  s.borrow_threshold = 0.8;
  CHECK_FALSE(borrow_eligible(s, 250.0 / 300.0, 50.0));  // 0.8333 >= 0.8
  s.borrow_threshold = 0.9;
  CHECK(borrow_eligible(s, 250.0 / 300.0, 50.0));  // 0.8333 < 0.9
}

TEST_CASE("eligibility is monotone: lowering satisfaction never revokes it") {
  ApplicationSpec s = spec("app-1", 300.0);
  s.borrow_allowed = true;
  s.borrow_threshold = 0.7;
  bool prev = borrow_eligible(s, 1.0, 10.0);
  for (double sat = 0.95; sat >= 0.0; sat -= 0.05) {
    bool now = borrow_eligible(s, sat, 10.0);
    CHECK((now || !prev));  // true never flips back to false as sat decreases
    prev = now;
  }
}

namespace {

// Cluster in the unbalanced-demand shape: backlog 15/10/5 MB, 10 tokens each.
std::map<std::string, data::ServerState> skew_cluster() {
  auto cluster = three_servers();
  int backlog[3] = {15, 10, 5};
  const char* ids[3] = {"s1", "s2", "s3"};
  for (int i = 0; i < 3; ++i) {
    auto& server = cluster.at(ids[i]);
    server.ensure_app("app-1");
    for (int j = 0; j < backlog[i]; ++j)
      server.enqueue({"app-1", kMB, 0.01 * j, "c1", ids[i]}, "app-1");
    server.buckets().at("app-1").set_capacity(20.0);
    server.buckets().at("app-1").refill(10.0);
  }
  return cluster;
}

}  // namespace

TEST_CASE("plan_borrow taps only real surpluses, deterministically") {
  auto cluster = skew_cluster();
  // s1 deficit = 15 - 10 = 5; s2 surplus 0; s3 surplus = 10 - 5 = 5.
  auto transfers = plan_borrow(cluster, "app-1", "s1", 5.0);
  REQUIRE(transfers.size() == 1);
  CHECK(transfers[0].from_server == "s3");
  CHECK(transfers[0].to_server == "s1");
  CHECK(transfers[0].tokens == 5.0);

  // No surpluses anywhere -> empty plan.
  for (auto& [id, server] : cluster)
    server.buckets().at("app-1").try_consume(server.buckets().at("app-1").level());
  CHECK(plan_borrow(cluster, "app-1", "s1", 5.0).empty());
}

TEST_CASE("plan_borrow splits across donors proportionally") {
  auto cluster = three_servers();
  for (const char* id : {"s1", "s2", "s3"}) {
    cluster.at(id).ensure_app("app-1");
    cluster.at(id).buckets().at("app-1").set_capacity(100.0);
  }
  cluster.at("s2").buckets().at("app-1").refill(30.0);
  cluster.at("s3").buckets().at("app-1").refill(30.0);

  auto transfers = plan_borrow(cluster, "app-1", "s1", 50.0);
  REQUIRE(transfers.size() == 2);
  CHECK(transfers[0].from_server == "s2");
  CHECK(transfers[0].tokens == 25.0);
  CHECK(transfers[1].from_server == "s3");
  CHECK(transfers[1].tokens == 25.0);

  // Plan boundedness: never more than the deficit or the surplus pool.
  auto small = plan_borrow(cluster, "app-1", "s1", 10.0);
  double total = 0.0;
  for (const auto& t : small) total += t.tokens;
  CHECK(total <= 10.0);
}

TEST_CASE("execute_transfers conserves per-app cluster-wide tokens") {
  auto cluster = skew_cluster();
  metrics::Collector collector;
  double before = cluster_sum(cluster, "app-1");

  auto transfers = plan_borrow(cluster, "app-1", "s1", 5.0);
  execute_transfers(cluster, transfers, collector, 0.1);

  CHECK(cluster_sum(cluster, "app-1") == before);
  CHECK(cluster.at("s3").buckets().at("app-1").level() == 5.0);
  CHECK(cluster.at("s1").buckets().at("app-1").level() == 15.0);
  CHECK(collector.borrowed_total() == 5.0);

  // Empty list is the identity.
  execute_transfers(cluster, {}, collector, 0.2);
  CHECK(cluster_sum(cluster, "app-1") == before);

  // Two transfers to the same borrower are additive.
  auto cluster2 = three_servers();
  for (const char* id : {"s1", "s2", "s3"}) {
    cluster2.at(id).ensure_app("app-1");
    cluster2.at(id).buckets().at("app-1").set_capacity(100.0);
  }
  cluster2.at("s2").buckets().at("app-1").refill(30.0);
  cluster2.at("s3").buckets().at("app-1").refill(30.0);
  execute_transfers(cluster2,
                    {{"app-1", "s2", "s1", 10.0}, {"app-1", "s3", "s1", 20.0}}, collector, 0.3);
  CHECK(cluster2.at("s1").buckets().at("app-1").level() == 30.0);
}
