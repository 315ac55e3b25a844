#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mtmgossip/rng.hpp"
#include "mtmgossip/token_set.hpp"
#include "mtmgossip/topology.hpp"

namespace mtmgossip {

using Round = std::uint64_t;

enum class HashMode { digest, oracle };
enum class DeliveryPolicy { all, adversarial_one, random_one };
enum class SyncAlgorithm { random_spread, coin_flip_baseline };

std::string to_string(HashMode m);
std::string to_string(DeliveryPolicy p);
std::string to_string(SyncAlgorithm a);
HashMode parse_hash_mode(const std::string& s);
DeliveryPolicy parse_delivery_policy(const std::string& s);
SyncAlgorithm parse_sync_algorithm(const std::string& s);

/// Seeded 64-bit digest of (sorted token ids, round, experiment seed).
std::uint64_t hash_tokens(const TokenSet& tokens, Round r, std::uint64_t experiment_seed);

/// Produces the hash field of advertisements. In oracle mode every distinct
/// token set is interned to its own label, so equal labels imply equal sets.
class TagCodec {
 public:
  TagCodec(HashMode mode, std::uint64_t experiment_seed) : mode_(mode), seed_(experiment_seed) {}
  std::uint64_t tag(const TokenSet& tokens, Round r);
  HashMode mode() const { return mode_; }

 private:
  HashMode mode_;
  std::uint64_t seed_;
  std::map<std::vector<std::uint64_t>, std::uint64_t> interned_;
};

/// Advertisement size in bits: status, done, 64-bit digest, node id.
std::uint32_t advertisement_bits(std::uint32_t n);

struct SyncAdvertisement {
  bool status = false;  // true = sender
  bool done = false;
  std::uint64_t hash = 0;
  NodeId node = 0;
};

struct SyncNodeState {
  NodeId id = 0;
  TokenSet tokens;
  bool status = false;
  bool done = false;
};

/// Rounds per phase: ceil(log2 N) for degree bound N >= 2.
std::uint32_t phase_length(std::uint32_t degree_bound);

/// True when round r opens a phase, i.e. (r - 1) mod phase_len == 0.
bool is_phase_start(Round r, std::uint32_t phase_len);

/// At a phase start: fresh fair status bit and done cleared.
SyncNodeState begin_phase(SyncNodeState state, Round r, std::uint32_t phase_len, Rng& rng);

/// Neighbors a sender may invite this round. random_spread requires an
/// advertised receiver with done = 0; the baseline only compares hashes.
NodeSet eligible_targets(std::uint64_t own_hash, std::span<const SyncAdvertisement> ads,
                         SyncAlgorithm algorithm = SyncAlgorithm::random_spread);

std::optional<NodeId> choose_target(const NodeSet& a_prime, Rng& rng);

struct Invitation {
  NodeId sender = 0;
  NodeId receiver = 0;
  friend bool operator==(const Invitation&, const Invitation&) = default;
};

struct Connection {
  NodeId sender = 0;
  NodeId receiver = 0;
  friend bool operator==(const Connection&, const Connection&) = default;
};

struct Transfer {
  TokenId token = 0;
  NodeId from = 0;
  NodeId to = 0;
  friend bool operator==(const Transfer&, const Transfer&) = default;
};

/// receiver -> senders whose invitations reached it (ascending).
using DeliveredInvitations = std::map<NodeId, std::vector<NodeId>>;

/// Every receiver with at least one invitation gets a nonempty subset.
/// adversarial_one keeps the sender with the smallest token-set symmetric
/// difference to the receiver, lowest id on ties; this needs `states`.
DeliveredInvitations deliver_invitations(std::span<const Invitation> invitations,
                                         DeliveryPolicy policy,
                                         std::span<const SyncNodeState> states, Rng& rng);

/// Each receiver accepts one delivered invitation uniformly at random and
/// sets its done flag. The result is a matching.
std::vector<Connection> resolve_connections(const DeliveredInvitations& delivered,
                                            std::span<SyncNodeState> states, Rng& rng);

/// Up to c draws, each moving a uniform token of the current symmetric
/// difference to the endpoint that lacks it.
std::vector<Transfer> exchange_tokens(SyncNodeState& u, SyncNodeState& v, std::uint32_t c,
                                      Rng& rng);

/// Topology edges whose endpoints differ in tokens and in status.
std::vector<Edge> productive_subgraph(const Topology& topo, std::span<const SyncNodeState> states);

struct TokenPlacement {
  NodeId node = 0;
  TokenId token = 0;
};

/// Tokens 0..k-1 at nodes 0..k-1.
std::vector<TokenPlacement> default_placement(std::uint32_t k);

struct SyncConfig {
  Topology topology;
  std::uint32_t k = 1;
  std::vector<TokenPlacement> placement;  // empty = default_placement(k)
  std::uint32_t tokens_per_connection = 1;
  DeliveryPolicy delivery = DeliveryPolicy::all;
  SyncAlgorithm algorithm = SyncAlgorithm::random_spread;
  HashMode hash_mode = HashMode::digest;
  Round round_cap = 100000;
  std::uint64_t seed = 0;
  bool record_advertisements = false;
};

struct RoundLog {
  Round round = 0;
  std::uint64_t phase = 0;
  std::vector<SyncAdvertisement> advertisements;  // only when recorded
  std::vector<Invitation> invitations;
  std::vector<Connection> connections;
  std::vector<Transfer> transfers;
  /// Per-token holder counts at the end of the round.
  std::vector<std::uint32_t> counts;
};

struct SyncResult {
  std::uint32_t n = 0;
  std::uint32_t k = 0;
  std::uint32_t phase_length = 1;
  Round rounds_used = 0;
  bool completed = false;
  std::vector<std::uint32_t> initial_counts;
  std::vector<TokenPlacement> placement;
  std::vector<RoundLog> rounds;
  std::uint64_t productive_connections = 0;
  std::uint64_t total_transfers = 0;
  std::vector<SyncNodeState> final_states;
};

std::vector<SyncNodeState> initial_states(std::uint32_t n, std::uint32_t k,
                                          std::span<const TokenPlacement> placement);

SyncResult run_sync(const SyncConfig& config);

}  // namespace mtmgossip
