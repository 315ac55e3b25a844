#include "doctest.h"
#include "mtmgossip/errors.hpp"
#include "mtmgossip/sync_engine.hpp"
#include "oracles.hpp"

using namespace mtmgossip;

namespace {

SyncNodeState node(NodeId id, std::uint32_t k, std::initializer_list<TokenId> tokens) {
  SyncNodeState s;
  s.id = id;
  s.tokens = TokenSet(k);
  for (auto t : tokens) s.tokens.insert(t);
  return s;
}

}  // namespace

TEST_CASE("hash examples") {
  TokenSet a(4), b(4);
  a.insert(1);
  b.insert(1);
  CHECK(hash_tokens(a, 3, 7) == hash_tokens(b, 3, 7));
  CHECK(hash_tokens(a, 3, 7) != hash_tokens(a, 4, 7));
  TokenSet empty(4);
  CHECK_NOTHROW(hash_tokens(empty, 1, 0));
  CHECK(hash_tokens(empty, 1, 0) != hash_tokens(a, 1, 0));

  TagCodec oracle_codec(HashMode::oracle, 0);
  TokenSet one(4), two(4);
  one.insert(1);
  two.insert(2);
  for (Round r : {1u, 5u, 99u}) CHECK(oracle_codec.tag(one, r) != oracle_codec.tag(two, r));
  CHECK(oracle_codec.tag(one, 1) == oracle_codec.tag(one, 50));
}

TEST_CASE("advertisement size grows with log n") {
  CHECK(advertisement_bits(2) == 67);
  CHECK(advertisement_bits(1024) == 76);
}

TEST_CASE("phase boundaries") {
  CHECK(phase_length(16) == 4);
  CHECK(phase_length(2) == 1);
  CHECK(phase_length(5) == 3);
  CHECK_THROWS_AS(phase_length(1), ArgumentError);
  CHECK(is_phase_start(1, 4));
  CHECK(is_phase_start(5, 4));
  CHECK_FALSE(is_phase_start(2, 4));
  CHECK_THROWS_AS(is_phase_start(0, 4), ArgumentError);

  Rng rng(1);
  auto s = node(0, 1, {});
  s.done = true;
  s.status = true;
  auto same = begin_phase(s, 2, 4, rng);
  CHECK(same.done);
  CHECK(same.status);
  auto fresh = begin_phase(s, 5, 4, rng);
  CHECK_FALSE(fresh.done);
}

TEST_CASE("eligible targets") {
  const std::uint64_t own = 10;
  std::vector<SyncAdvertisement> ads{
      {false, false, 10, 1},  // equal hash
      {false, true, 11, 2},   // already done
      {true, false, 12, 3},   // a sender
      {false, false, 13, 4},  // eligible
  };
  CHECK(eligible_targets(own, ads) == NodeSet{4});
  CHECK(eligible_targets(own, ads, SyncAlgorithm::coin_flip_baseline) == NodeSet{2, 3, 4});
  CHECK(eligible_targets(own, std::vector<SyncAdvertisement>{}).empty());
}

TEST_CASE("choose target") {
  Rng rng(0);
  CHECK_FALSE(choose_target(NodeSet{}, rng).has_value());
  CHECK(choose_target(NodeSet{5}, rng) == 5u);
}

TEST_CASE("invitation delivery policies") {
  Rng rng(4);
  std::vector<SyncNodeState> states{node(0, 2, {0}), node(1, 2, {0, 1}), node(2, 2, {})};
  std::vector<Invitation> one{{0, 2}};
  for (auto p : {DeliveryPolicy::all, DeliveryPolicy::random_one, DeliveryPolicy::adversarial_one}) {
    auto d = deliver_invitations(one, p, states, rng);
    CHECK(d.at(2) == std::vector<NodeId>{0});
  }
  std::vector<Invitation> two{{1, 2}, {0, 2}};
  CHECK(deliver_invitations(two, DeliveryPolicy::all, states, rng).at(2) ==
        std::vector<NodeId>{0, 1});
  CHECK(deliver_invitations(two, DeliveryPolicy::random_one, states, rng).at(2).size() == 1);
  // Node 0 differs from the receiver by one token, node 1 by two.
  CHECK(deliver_invitations(two, DeliveryPolicy::adversarial_one, states, rng).at(2) ==
        std::vector<NodeId>{0});
}

TEST_CASE("connection resolution") {
  Rng rng(2);
  std::vector<SyncNodeState> states{node(0, 1, {0}), node(1, 1, {0}), node(2, 1, {})};
  CHECK(resolve_connections({}, states, rng).empty());

  DeliveredInvitations single{{2, {0}}};
  auto c = resolve_connections(single, states, rng);
  REQUIRE(c.size() == 1);
  CHECK(c[0] == Connection{0, 2});
  CHECK(states[2].done);

  states[2].done = false;
  int first = 0;
  for (int i = 0; i < 200; ++i) {
    auto both = resolve_connections(DeliveredInvitations{{2, {0, 1}}}, states, rng);
    REQUIRE(both.size() == 1);
    CHECK(both[0].receiver == 2);
    first += both[0].sender == 0;
  }
  CHECK(first > 60);
  CHECK(first < 140);
}

TEST_CASE("token exchange") {
  Rng rng(8);
  auto u = node(0, 2, {0});
  auto v = node(1, 2, {});
  auto t = exchange_tokens(u, v, 1, rng);
  CHECK(t == std::vector<Transfer>{{0, 0, 1}});
  CHECK(v.tokens.contains(0));

  auto a = node(0, 2, {0, 1});
  auto b = node(1, 2, {0});
  CHECK(exchange_tokens(a, b, 1, rng) == std::vector<Transfer>{{1, 0, 1}});

  auto x = node(0, 2, {0});
  auto y = node(1, 2, {1});
  auto both = exchange_tokens(x, y, 2, rng);
  CHECK(both.size() == 2);
  CHECK(x.tokens.full());
  CHECK(y.tokens.full());

  auto p = node(0, 2, {1});
  auto q = node(1, 2, {1});
  CHECK_THROWS_AS(exchange_tokens(p, q, 1, rng), ContractViolation);
}

TEST_CASE("productive subgraph") {
  auto g = Topology(2, {{0, 1}});
  std::vector<SyncNodeState> same{node(0, 1, {0}), node(1, 1, {0})};
  same[0].status = true;
  CHECK(productive_subgraph(g, same).empty());
  std::vector<SyncNodeState> senders{node(0, 1, {0}), node(1, 1, {})};
  senders[0].status = senders[1].status = true;
  CHECK(productive_subgraph(g, senders).empty());
  senders[1].status = false;
  CHECK(productive_subgraph(g, senders) == std::vector<Edge>{{0, 1}});
}

TEST_CASE("initial states and placement validation") {
  CHECK_THROWS_AS(initial_states(3, 4, default_placement(4)), ArgumentError);
  CHECK_THROWS_AS(initial_states(3, 0, {}), ArgumentError);
  std::vector<TokenPlacement> missing{{0, 0}};
  CHECK_THROWS_AS(initial_states(3, 2, missing), ArgumentError);
  std::vector<TokenPlacement> shared{{2, 0}, {2, 1}};
  auto s = initial_states(3, 2, shared);
  CHECK(s[2].tokens.full());
  CHECK(s[0].tokens.empty());
}

TEST_CASE("run_sync examples") {
  SyncConfig two{Topology(2, {{0, 1}})};
  two.seed = 3;
  auto r = run_sync(two);
  CHECK(r.completed);
  CHECK(r.rounds_used <= 20);
  CHECK(r.final_states[1].tokens.contains(0));

  SyncConfig k8{generate({TopologyKind::clique, 8})};
  k8.seed = 5;
  auto c = run_sync(k8);
  CHECK(c.completed);
  CHECK(c.total_transfers == 7);

  SyncConfig k64{generate({TopologyKind::clique, 64})};
  k64.k = 8;
  k64.seed = 1;
  auto big = run_sync(k64);
  CHECK(big.completed);
  CHECK(big.total_transfers == 8 * 64 - 8);
}

TEST_CASE("round cap leaves the run flagged incomplete") {
  SyncConfig cfg{generate({TopologyKind::line, 16})};
  cfg.k = 4;
  cfg.round_cap = 3;
  auto r = run_sync(cfg);
  CHECK_FALSE(r.completed);
  CHECK(r.rounds_used == 3);
  cfg.round_cap = 0;
  CHECK_THROWS_AS(run_sync(cfg), ArgumentError);
}

TEST_CASE("sync runs replay legally in oracle mode") {
  std::uint64_t rounds = 0;
  for (auto kind : {TopologyKind::line, TopologyKind::ring, TopologyKind::clique, TopologyKind::grid,
                    TopologyKind::star, TopologyKind::barbell}) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      for (auto policy : {DeliveryPolicy::all, DeliveryPolicy::random_one, DeliveryPolicy::adversarial_one}) {
        SyncConfig cfg{generate({kind, 12, seed})};
        cfg.k = 3;
        cfg.seed = seed;
        cfg.hash_mode = HashMode::oracle;
        cfg.delivery = policy;
        cfg.tokens_per_connection = static_cast<std::uint32_t>(1 + seed % 2);
        auto r = run_sync(cfg);
        CHECK(r.completed);
        CHECK(oracle::replay_sync(cfg.topology, r).empty());
        std::uint64_t initial = 0;
        for (auto c : r.initial_counts) initial += c;
        CHECK(r.total_transfers == 12 * 3 - initial);
        rounds += r.rounds_used;
      }
    }
  }
  CHECK(rounds > 100);
}

TEST_CASE("status is constant and done monotone within each phase") {
  SyncConfig cfg{generate({TopologyKind::grid, 16})};
  cfg.k = 4;
  cfg.seed = 9;
  cfg.record_advertisements = true;
  auto r = run_sync(cfg);
  REQUIRE(r.rounds.size() > 4);
  for (std::size_t i = 1; i < r.rounds.size(); ++i) {
    const auto& prev = r.rounds[i - 1];
    const auto& cur = r.rounds[i];
    if (is_phase_start(cur.round, r.phase_length)) {
      for (const auto& ad : cur.advertisements) CHECK_FALSE(ad.done);
      continue;
    }
    for (NodeId u = 0; u < r.n; ++u) {
      CHECK(cur.advertisements[u].status == prev.advertisements[u].status);
      CHECK((!prev.advertisements[u].done || cur.advertisements[u].done));
    }
  }
}

TEST_CASE("token sets never shrink") {
  SyncConfig cfg{generate({TopologyKind::binary_tree, 15})};
  cfg.k = 5;
  cfg.seed = 2;
  auto r = run_sync(cfg);
  std::vector<std::uint32_t> prev = r.initial_counts;
  for (const auto& log : r.rounds) {
    for (std::size_t t = 0; t < prev.size(); ++t) CHECK(log.counts[t] >= prev[t]);
    prev = log.counts;
  }
}

TEST_CASE("sync runs are deterministic") {
  SyncConfig cfg{generate({TopologyKind::ring, 10})};
  cfg.k = 3;
  cfg.seed = 77;
  auto a = run_sync(cfg), b = run_sync(cfg);
  REQUIRE(a.rounds.size() == b.rounds.size());
  for (std::size_t i = 0; i < a.rounds.size(); ++i) {
    CHECK(a.rounds[i].connections == b.rounds[i].connections);
    CHECK(a.rounds[i].transfers == b.rounds[i].transfers);
  }
}

TEST_CASE("baseline has unit phases and still completes") {
  SyncConfig cfg{generate({TopologyKind::clique, 8})};
  cfg.k = 2;
  cfg.algorithm = SyncAlgorithm::coin_flip_baseline;
  cfg.hash_mode = HashMode::oracle;
  auto r = run_sync(cfg);
  CHECK(r.phase_length == 1);
  CHECK(r.completed);
  CHECK(oracle::replay_sync(cfg.topology, r).empty());
}

TEST_CASE("enum names round trip") {
  for (auto m : {HashMode::digest, HashMode::oracle}) CHECK(parse_hash_mode(to_string(m)) == m);
  for (auto p : {DeliveryPolicy::all, DeliveryPolicy::adversarial_one, DeliveryPolicy::random_one})
    CHECK(parse_delivery_policy(to_string(p)) == p);
  for (auto a : {SyncAlgorithm::random_spread, SyncAlgorithm::coin_flip_baseline})
    CHECK(parse_sync_algorithm(to_string(a)) == a);
  CHECK_THROWS_AS(parse_hash_mode("md5"), ConfigError);
}
