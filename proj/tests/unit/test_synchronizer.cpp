#include "doctest.h"
#include "mtmgossip/errors.hpp"
#include "mtmgossip/synchronizer.hpp"
#include "trace_corruption.hpp"

using namespace mtmgossip;

namespace {

SynchronizerConfig cfg(Topology topo, std::uint64_t rounds, std::uint64_t seed = 0,
                       DelayMode mode = DelayMode::fixed_max) {
  SynchronizerConfig c{std::move(topo)};
  c.rounds = rounds;
  c.seed = seed;
  c.delay.mode = mode;
  return c;
}

std::size_t count(const SimTrace& t, SimEventKind kind, NodeId u) {
  std::size_t c = 0;
  for (const auto& r : t.records) c += r.kind == kind && r.node == u;
  return c;
}

}  // namespace

TEST_CASE("total order positions") {
  CHECK(order_position({1, {}, false, false}) == 0);
  CHECK(order_position({1, {}, true, false}) == 1);
  CHECK(order_position({1, {}, true, true}) == 2);
  CHECK(order_position({2, {}, false, false}) == 3);
  CHECK_THROWS_AS(order_position({1, {}, false, true}), ProtocolViolation);
  CHECK_THROWS_AS(order_position({0, {}, false, false}), ProtocolViolation);
}

TEST_CASE("reconstructing a missed advertisement") {
  const AdvPayload a{7}, b{9};
  auto mid = reconstruct_missed({3, a, false, false}, {3, a, true, true});
  REQUIRE(mid.has_value());
  CHECK(*mid == SimAdvertisement{3, a, true, false});

  auto boundary = reconstruct_missed({3, a, true, true}, {4, b, true, false});
  REQUIRE(boundary.has_value());
  CHECK(*boundary == SimAdvertisement{4, b, false, false});

  CHECK_FALSE(reconstruct_missed({3, a, true, false}, {3, a, true, true}).has_value());
  CHECK_FALSE(reconstruct_missed({3, a, true, true}, {4, b, false, false}).has_value());

  CHECK_THROWS_AS(reconstruct_missed({3, a, true, false}, {3, a, true, false}), ProtocolViolation);
  CHECK_THROWS_AS(reconstruct_missed({3, a, false, false}, {4, b, false, false}), ProtocolViolation);
}

TEST_CASE("trivial algorithm on two nodes passes every stage") {
  TrivialAlgorithm alg;
  auto out = run_synchronized(cfg(Topology(2, {{0, 1}}), 1), alg);
  CHECK(out.finished);
  CHECK_FALSE(out.deadlocked);
  CHECK(out.protocol_errors.empty());
  for (NodeId u : {0u, 1u}) {
    CHECK(count(out.trace, SimEventKind::request_adv, u) == 1);
    CHECK(count(out.trace, SimEventKind::deliver_adv, u) == 1);
    CHECK(count(out.trace, SimEventKind::end_scan, u) == 1);
    CHECK(count(out.trace, SimEventKind::end_connect, u) == 1);
    CHECK(count(out.trace, SimEventKind::advance, u) == 1);
    CHECK(out.rounds_completed[u] == 1);
  }
  CHECK(validate_trace(out.trace, Topology(2, {{0, 1}})).empty());
  auto rep = round_time_report(out.trace, DeltaBounds{});
  CHECK(rep.ratio > 0);
  CHECK(rep.ratio <= 4);
}

TEST_CASE("gossip through the synchronizer on clique(8)") {
  auto topo = generate({TopologyKind::clique, 8});
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    GossipAlgorithm gossip(topo, 1, {}, seed);
    auto out = run_synchronized(cfg(topo, 20, seed), gossip);
    CHECK(out.finished);
    CHECK(validate_trace(out.trace, topo).empty());
    CHECK(check_synced_gossip(gossip, 8, 1, {}).empty());
    CHECK(out.connections == gossip.connections().size());
  }
}

TEST_CASE("synchronized gossip completes like the native engine") {
  auto topo = generate({TopologyKind::grid, 9});
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    GossipAlgorithm gossip(topo, 3, {}, seed, HashMode::oracle);
    auto out = run_synchronized(cfg(topo, 300, seed, DelayMode::uniform), gossip);
    CHECK(out.finished);
    CHECK(gossip.complete());
    CHECK(gossip.transfers().size() == 9 * 3 - 3);
    for (const auto& c : gossip.connections()) CHECK(c.productive);
    CHECK(check_synced_gossip(gossip, 9, 3, {}).empty());
  }
}

TEST_CASE("neighbors never drift more than one advertisement apart") {
  auto topo = generate({TopologyKind::line, 8});
  for (auto mode : {DelayMode::fixed_max, DelayMode::uniform, DelayMode::adversarial}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      GossipAlgorithm gossip(topo, 2, {}, seed);
      auto out = run_synchronized(cfg(topo, 10, seed, mode), gossip);
      CHECK(out.finished);
      CHECK(max_neighbor_lag(out.trace, topo) <= 1);
      CHECK(validate_trace(out.trace, topo).empty());
    }
  }
}

TEST_CASE("missed advertisements are reconstructed under uniform delays") {
  auto topo = generate({TopologyKind::ring, 10});
  std::uint64_t reconstructed = 0, missed = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    GossipAlgorithm gossip(topo, 2, {}, seed);
    auto out = run_synchronized(cfg(topo, 30, seed, DelayMode::uniform), gossip);
    CHECK(out.finished);
    CHECK(out.protocol_errors.empty());
    reconstructed += out.reconstructions;
    missed += out.missed;
    CHECK(validate_trace(out.trace, topo).empty());
  }
  CHECK(missed > 0);
  CHECK(reconstructed > 0);
}

TEST_CASE("validator detects an early end_scan") {
  auto topo = generate({TopologyKind::clique, 4});
  GossipAlgorithm gossip(topo, 2, {}, 1);
  auto out = run_synchronized(cfg(topo, 3, 1), gossip);
  REQUIRE(validate_trace(out.trace, topo).empty());
  auto bad = corrupt::early_end_scan(out.trace, topo, 2);
  REQUIRE(bad.has_value());
  auto v = validate_trace(bad->trace, topo);
  REQUIRE(v.size() == 1);
  CHECK(v[0].clause == 2);
  CHECK(v[0].node == bad->node);
  CHECK(v[0].round == 2);
}

TEST_CASE("validator detects an early request_adv") {
  auto topo = generate({TopologyKind::clique, 4});
  GossipAlgorithm gossip(topo, 2, {}, 1);
  auto out = run_synchronized(cfg(topo, 3, 1), gossip);
  auto bad = corrupt::early_request(out.trace, topo, 2);
  REQUIRE(bad.has_value());
  auto v = validate_trace(bad->trace, topo);
  REQUIRE(v.size() == 1);
  CHECK(v[0].clause == 3);
  CHECK(v[0].node == bad->node);
  CHECK(v[0].round == 2);
}

TEST_CASE("validator detects a wrong delivered payload") {
  auto topo = generate({TopologyKind::line, 3});
  GossipAlgorithm gossip(topo, 1, {}, 0);
  auto out = run_synchronized(cfg(topo, 2, 0), gossip);
  auto trace = out.trace;
  for (auto& rec : trace.records)
    if (rec.kind == SimEventKind::deliver_adv && rec.node == 1 && rec.round == 1) {
      rec.ads.begin()->second = {1, 2, 3, 4};
      break;
    }
  auto v = validate_trace(trace, topo);
  REQUIRE(v.size() == 1);
  CHECK(v[0].clause == 1);
}

TEST_CASE("zero rounds take zero time") {
  SimTrace empty;
  auto rep = round_time_report(empty, DeltaBounds{});
  CHECK(rep.total_time == 0);
  CHECK(rep.time_per_round == 0);
  CHECK(rep.ratio == 0);

  TrivialAlgorithm alg;
  auto out = run_synchronized(cfg(Topology(2, {{0, 1}}), 0), alg);
  CHECK(round_time_report(out.trace, DeltaBounds{}).total_time == 0);
}

TEST_CASE("a crashed neighbor deadlocks without a timeout and is dropped with one") {
  auto topo = generate({TopologyKind::line, 4});
  auto c = cfg(topo, 5);
  c.crashes = {{3, 2.5}};
  TrivialAlgorithm alg;
  auto stuck = run_synchronized(c, alg);
  CHECK_FALSE(stuck.finished);
  CHECK(stuck.deadlocked);
  CHECK_FALSE(stuck.diagnostic.empty());

  c.neighbor_timeout = 10.0;
  auto freed = run_synchronized(c, alg);
  CHECK(freed.finished);
  std::size_t timeouts = 0;
  for (const auto& r : freed.trace.records) timeouts += r.kind == SimEventKind::timeout;
  CHECK(timeouts >= 1);
}

TEST_CASE("gossip payload encoding") {
  SyncAdvertisement ad{true, false, 0xdeadbeef, 5};
  auto back = GossipAlgorithm::decode(GossipAlgorithm::encode(ad));
  CHECK(back.status);
  CHECK_FALSE(back.done);
  CHECK(back.hash == 0xdeadbeef);
  CHECK(back.node == 5);
  CHECK_THROWS_AS(GossipAlgorithm::decode({1, 2}), ProtocolViolation);
}

TEST_CASE("trace record kinds round trip") {
  for (auto k : {SimEventKind::request_adv, SimEventKind::deliver_adv, SimEventKind::end_scan,
                 SimEventKind::end_connect, SimEventKind::set_adv, SimEventKind::reconstruct,
                 SimEventKind::missed, SimEventKind::connect, SimEventKind::accept, SimEventKind::advance,
                 SimEventKind::crash, SimEventKind::timeout})
    CHECK(parse_sim_event_kind(to_string(k)) == k);
  CHECK_THROWS_AS(parse_sim_event_kind("nap"), ConfigError);
}

TEST_CASE("synchronized runs are deterministic") {
  auto topo = generate({TopologyKind::grid, 6});
  GossipAlgorithm g1(topo, 2, {}, 3), g2(topo, 2, {}, 3);
  auto a = run_synchronized(cfg(topo, 8, 3, DelayMode::uniform), g1);
  auto b = run_synchronized(cfg(topo, 8, 3, DelayMode::uniform), g2);
  REQUIRE(a.trace.records.size() == b.trace.records.size());
  for (std::size_t i = 0; i < a.trace.records.size(); ++i) {
    CHECK(a.trace.records[i].time == b.trace.records[i].time);
    CHECK(a.trace.records[i].kind == b.trace.records[i].kind);
    CHECK(a.trace.records[i].node == b.trace.records[i].node);
  }
}
