#include "mtmgossip/sync_engine.hpp"

#include <algorithm>
#include <bit>

#include "mtmgossip/errors.hpp"

namespace mtmgossip {

std::string to_string(HashMode m) { return m == HashMode::digest ? "digest" : "oracle"; }

std::string to_string(DeliveryPolicy p) {
  switch (p) {
    case DeliveryPolicy::all: return "all";
    case DeliveryPolicy::adversarial_one: return "adversarial_one";
    case DeliveryPolicy::random_one: return "random_one";
  }
  return "unknown";
}

std::string to_string(SyncAlgorithm a) {
  return a == SyncAlgorithm::random_spread ? "random_spread" : "coin_flip_baseline";
}

HashMode parse_hash_mode(const std::string& s) {
  if (s == "digest") return HashMode::digest;
  if (s == "oracle") return HashMode::oracle;
  throw ConfigError("unknown hash mode '" + s + "'");
}

DeliveryPolicy parse_delivery_policy(const std::string& s) {
  if (s == "all") return DeliveryPolicy::all;
  if (s == "adversarial_one") return DeliveryPolicy::adversarial_one;
  if (s == "random_one") return DeliveryPolicy::random_one;
  throw ConfigError("unknown delivery policy '" + s + "'");
}

SyncAlgorithm parse_sync_algorithm(const std::string& s) {
  if (s == "random_spread") return SyncAlgorithm::random_spread;
  if (s == "coin_flip_baseline") return SyncAlgorithm::coin_flip_baseline;
  throw ConfigError("unknown sync algorithm '" + s + "'");
}

std::uint64_t hash_tokens(const TokenSet& tokens, Round r, std::uint64_t experiment_seed) {
  std::uint64_t h = mix64(experiment_seed ^ mix64(r ^ 0x5bd1e995ULL));
  for (auto t : tokens.to_vector()) h = mix64(h ^ (static_cast<std::uint64_t>(t) + 1));
  return mix64(h ^ tokens.size());
}

std::uint64_t TagCodec::tag(const TokenSet& tokens, Round r) {
  if (mode_ == HashMode::digest) return hash_tokens(tokens, r, seed_);
  auto [it, inserted] = interned_.try_emplace(tokens.words(), interned_.size());
  return it->second;
}

std::uint32_t advertisement_bits(std::uint32_t n) {
  return 2 + 64 + static_cast<std::uint32_t>(std::bit_width(std::max(n, 2U) - 1));
}

std::uint32_t phase_length(std::uint32_t degree_bound) {
  if (degree_bound < 2) throw ArgumentError("degree bound must be at least 2");
  return static_cast<std::uint32_t>(std::bit_width(degree_bound - 1));
}

bool is_phase_start(Round r, std::uint32_t phase_len) {
  if (r == 0) throw ArgumentError("rounds are numbered from 1");
  return (r - 1) % phase_len == 0;
}

SyncNodeState begin_phase(SyncNodeState state, Round r, std::uint32_t phase_len, Rng& rng) {
  if (is_phase_start(r, phase_len)) {
    state.status = rng.bit();
    state.done = false;
  }
  return state;
}

NodeSet eligible_targets(std::uint64_t own_hash, std::span<const SyncAdvertisement> ads,
                         SyncAlgorithm algorithm) {
  std::vector<NodeId> out;
  for (const auto& ad : ads) {
    if (ad.hash == own_hash) continue;
    if (algorithm == SyncAlgorithm::random_spread && (ad.status || ad.done)) continue;
    out.push_back(ad.node);
  }
  return NodeSet(std::move(out));
}

std::optional<NodeId> choose_target(const NodeSet& a_prime, Rng& rng) {
  if (a_prime.empty()) return std::nullopt;
  return a_prime.members()[rng.below(a_prime.size())];
}

DeliveredInvitations deliver_invitations(std::span<const Invitation> invitations,
                                         DeliveryPolicy policy,
                                         std::span<const SyncNodeState> states, Rng& rng) {
  DeliveredInvitations incoming;
  for (const auto& inv : invitations) incoming[inv.receiver].push_back(inv.sender);
  for (auto& [receiver, senders] : incoming) {
    std::sort(senders.begin(), senders.end());
    if (policy == DeliveryPolicy::all || senders.size() == 1) continue;
    NodeId keep;
    if (policy == DeliveryPolicy::random_one) {
      keep = senders[rng.below(senders.size())];
    } else {
      if (receiver >= states.size()) throw ArgumentError("adversarial delivery needs node states");
      const auto& rx = states[receiver].tokens;
      keep = senders.front();
      std::size_t best = rx.symmetric_difference(states[keep].tokens).size();
      for (auto s : senders) {
        const auto gain = rx.symmetric_difference(states[s].tokens).size();
        if (gain < best) {
          best = gain;
          keep = s;
        }
      }
    }
    senders.assign(1, keep);
  }
  return incoming;
}

std::vector<Connection> resolve_connections(const DeliveredInvitations& delivered,
                                            std::span<SyncNodeState> states, Rng& rng) {
  std::vector<Connection> out;
  for (const auto& [receiver, senders] : delivered) {
    if (senders.empty()) continue;
    const auto sender = senders[rng.below(senders.size())];
    out.push_back({sender, receiver});
    if (receiver < states.size()) states[receiver].done = true;
  }
  return out;
}

std::vector<Transfer> exchange_tokens(SyncNodeState& u, SyncNodeState& v, std::uint32_t c,
                                      Rng& rng) {
  if (u.tokens == v.tokens) {
    throw ContractViolation("connection between nodes " + std::to_string(u.id) + " and " +
                            std::to_string(v.id) + " with equal token sets");
  }
  std::vector<Transfer> out;
  for (std::uint32_t i = 0; i < c; ++i) {
    const auto diff = u.tokens.symmetric_difference(v.tokens);
    if (diff.empty()) break;
    const auto t = diff[rng.below(diff.size())];
    if (u.tokens.contains(t)) {
      v.tokens.insert(t);
      out.push_back({t, u.id, v.id});
    } else {
      u.tokens.insert(t);
      out.push_back({t, v.id, u.id});
    }
  }
  return out;
}

std::vector<Edge> productive_subgraph(const Topology& topo, std::span<const SyncNodeState> states) {
  std::vector<Edge> out;
  for (auto [u, v] : topo.edges()) {
    if (states[u].status != states[v].status && !(states[u].tokens == states[v].tokens)) {
      out.emplace_back(u, v);
    }
  }
  return out;
}

std::vector<TokenPlacement> default_placement(std::uint32_t k) {
  std::vector<TokenPlacement> p;
  for (TokenId t = 0; t < k; ++t) p.push_back({t, t});
  return p;
}

std::vector<SyncNodeState> initial_states(std::uint32_t n, std::uint32_t k,
                                          std::span<const TokenPlacement> placement) {
  if (k == 0 || k > n) throw ArgumentError("token count must satisfy 1 <= k <= n");
  std::vector<SyncNodeState> states(n);
  for (NodeId u = 0; u < n; ++u) {
    states[u].id = u;
    states[u].tokens = TokenSet(k);
  }
  std::vector<bool> placed(k, false);
  for (const auto& p : placement) {
    if (p.node >= n || p.token >= k) throw ArgumentError("token placement out of range");
    states[p.node].tokens.insert(p.token);
    placed[p.token] = true;
  }
  if (std::find(placed.begin(), placed.end(), false) != placed.end()) {
    throw ArgumentError("every token must start at some node");
  }
  return states;
}

namespace {

std::vector<std::uint32_t> token_counts(std::span<const SyncNodeState> states, std::uint32_t k) {
  std::vector<std::uint32_t> counts(k, 0);
  for (const auto& s : states) {
    for (auto t : s.tokens.to_vector()) ++counts[t];
  }
  return counts;
}

bool all_complete(std::span<const SyncNodeState> states) {
  return std::all_of(states.begin(), states.end(), [](const auto& s) { return s.tokens.full(); });
}

}  // namespace

SyncResult run_sync(const SyncConfig& config) {
  const auto& topo = config.topology;
  const auto n = topo.size();
  if (n < 2) throw ArgumentError("sync runs need n >= 2");
  if (config.tokens_per_connection < 1) throw ArgumentError("tokens_per_connection must be >= 1");
  if (config.round_cap == 0) throw ArgumentError("round_cap must be positive");

  SyncResult result;
  result.n = n;
  result.k = config.k;
  result.placement = config.placement.empty() ? default_placement(config.k) : config.placement;
  auto states = initial_states(n, config.k, result.placement);
  result.initial_counts = token_counts(states, config.k);

  const bool baseline = config.algorithm == SyncAlgorithm::coin_flip_baseline;
  const std::uint32_t plen = baseline ? 1 : phase_length(topo.degree_bound());
  result.phase_length = plen;

  Rng rng(config.seed);
  TagCodec codec(config.hash_mode, config.seed);
  std::vector<SyncAdvertisement> ads(n);
  std::vector<SyncAdvertisement> neighbor_ads;

  for (Round r = 1; r <= config.round_cap && !all_complete(states); ++r) {
    RoundLog log;
    log.round = r;
    log.phase = (r - 1) / plen + 1;

    for (auto& s : states) s = begin_phase(std::move(s), r, plen, rng);
    for (NodeId u = 0; u < n; ++u) {
      ads[u] = {states[u].status, baseline ? false : states[u].done,
                codec.tag(states[u].tokens, r), u};
    }
    if (config.record_advertisements) log.advertisements = ads;

    for (NodeId u = 0; u < n; ++u) {
      if (!states[u].status) continue;
      neighbor_ads.clear();
      for (auto v : topo.neighbors(u)) neighbor_ads.push_back(ads[v]);
      const auto targets = eligible_targets(ads[u].hash, neighbor_ads, config.algorithm);
      if (auto v = choose_target(targets, rng)) log.invitations.push_back({u, *v});
    }

    // Invitations addressed to senders are implicitly rejected.
    std::vector<Invitation> to_receivers;
    for (const auto& inv : log.invitations) {
      if (!states[inv.receiver].status) to_receivers.push_back(inv);
    }
    const auto delivered = deliver_invitations(to_receivers, config.delivery, states, rng);
    log.connections = resolve_connections(delivered, states, rng);

    for (const auto& c : log.connections) {
      auto moved = exchange_tokens(states[c.sender], states[c.receiver],
                                   config.tokens_per_connection, rng);
      if (!moved.empty()) ++result.productive_connections;
      log.transfers.insert(log.transfers.end(), moved.begin(), moved.end());
    }
    result.total_transfers += log.transfers.size();
    log.counts = token_counts(states, config.k);
    result.rounds.push_back(std::move(log));
    result.rounds_used = r;
  }

  result.completed = all_complete(states);
  result.final_states = std::move(states);
  return result;
}

}  // namespace mtmgossip
