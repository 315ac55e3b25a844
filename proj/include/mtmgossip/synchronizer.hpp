#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mtmgossip/amtm.hpp"
#include "mtmgossip/rng.hpp"
#include "mtmgossip/sync_engine.hpp"
#include "mtmgossip/topology.hpp"

namespace mtmgossip {

using AdvPayload = std::vector<std::uint64_t>;

/// Advertisement broadcast by the synchronizer: round, the algorithm's
/// payload, and the scanned/done stage bits.
struct SimAdvertisement {
  Round round = 1;
  AdvPayload payload;
  bool scanned = false;
  bool done = false;
  bool operator==(const SimAdvertisement&) const = default;
};

/// Position in the total order <1,0,0> < <1,1,0> < <1,1,1> < <2,0,0> < ...
/// Throws ProtocolViolation for the illegal <r,0,1> form.
std::uint64_t order_position(const SimAdvertisement& ad);

/// The single advertisement strictly between last_seen and current when
/// exactly one was skipped; none when adjacent. Throws ProtocolViolation when
/// current is not ahead of last_seen or more than one was skipped.
std::optional<SimAdvertisement> reconstruct_missed(const SimAdvertisement& last_seen,
                                                   const SimAdvertisement& current);

/// Lets an algorithm act during its connect stage.
class ConnectPort {
 public:
  virtual ~ConnectPort() = default;
  /// At most one attempt per round, only before end_connect.
  virtual void connect(NodeId target) = 0;
  virtual void end_connect() = 0;
};

/// A synchronous MTM algorithm driven through the four-function interface.
/// One object holds the state of every node.
class MtmAlgorithm {
 public:
  virtual ~MtmAlgorithm() = default;
  virtual AdvPayload request_adv(NodeId u, Round r) = 0;
  virtual void deliver_adv(NodeId u, Round r, const std::map<NodeId, AdvPayload>& ads) = 0;
  virtual void end_scan(NodeId u, Round r, ConnectPort& port) = 0;
  /// Called on the target when an attempt from `from` arrives.
  virtual bool accept_invitation(NodeId u, Round r, NodeId from) = 0;
  /// Called once the connection's communication latency has elapsed.
  virtual void communicate(Round r, NodeId initiator, NodeId target) = 0;
  /// Outcome of u's attempt; the algorithm must eventually call end_connect.
  virtual void connect_result(NodeId u, Round r, bool accepted, ConnectPort& port) = 0;
};

/// Advertises a constant payload and never connects.
class TrivialAlgorithm : public MtmAlgorithm {
 public:
  AdvPayload request_adv(NodeId u, Round r) override;
  void deliver_adv(NodeId, Round, const std::map<NodeId, AdvPayload>&) override {}
  void end_scan(NodeId, Round, ConnectPort& port) override { port.end_connect(); }
  bool accept_invitation(NodeId, Round, NodeId) override { return false; }
  void communicate(Round, NodeId, NodeId) override {}
  void connect_result(NodeId, Round, bool, ConnectPort& port) override { port.end_connect(); }
};

struct SyncedConnection {
  Round round = 0;
  NodeId sender = 0;
  NodeId receiver = 0;
  bool productive = false;
};

/// Random spread gossip expressed as an MTM algorithm: the payload is
/// <status, done, hash, id>.
class GossipAlgorithm : public MtmAlgorithm {
 public:
  GossipAlgorithm(const Topology& topo, std::uint32_t k, std::vector<TokenPlacement> placement,
                  std::uint64_t seed, HashMode hash_mode = HashMode::digest);

  AdvPayload request_adv(NodeId u, Round r) override;
  void deliver_adv(NodeId u, Round r, const std::map<NodeId, AdvPayload>& ads) override;
  void end_scan(NodeId u, Round r, ConnectPort& port) override;
  bool accept_invitation(NodeId u, Round r, NodeId from) override;
  void communicate(Round r, NodeId initiator, NodeId target) override;
  void connect_result(NodeId u, Round r, bool accepted, ConnectPort& port) override;

  const std::vector<SyncNodeState>& states() const { return states_; }
  const std::vector<SyncedConnection>& connections() const { return connections_; }
  const std::vector<Transfer>& transfers() const { return transfers_; }
  /// Round of each transfer, parallel to transfers().
  const std::vector<Round>& transfer_rounds() const { return transfer_rounds_; }
  bool complete() const;
  std::uint32_t phase_length() const { return plen_; }

  static AdvPayload encode(const SyncAdvertisement& ad);
  static SyncAdvertisement decode(const AdvPayload& payload);

 private:
  std::uint32_t plen_;
  Rng rng_;
  TagCodec codec_;
  std::vector<SyncNodeState> states_;
  std::vector<std::uint64_t> own_hash_;
  std::vector<std::vector<SyncAdvertisement>> seen_;
  std::vector<Round> accepted_in_;  // round of the last accepted invitation, 0 = none
  std::vector<SyncedConnection> connections_;
  std::vector<Transfer> transfers_;
  std::vector<Round> transfer_rounds_;
};

enum class SimEventKind {
  request_adv,
  deliver_adv,
  end_scan,
  end_connect,
  set_adv,
  reconstruct,
  missed,
  connect,
  accept,
  advance,
  crash,
  timeout,
};
std::string to_string(SimEventKind k);
SimEventKind parse_sim_event_kind(const std::string& s);

struct SimTraceRecord {
  double time = 0.0;
  std::uint64_t seq = 0;
  SimEventKind kind = SimEventKind::request_adv;
  NodeId node = 0;
  Round round = 0;
  /// request_adv / set_adv: own payload; reconstruct / missed: the neighbor's.
  AdvPayload payload;
  /// set_adv / reconstruct: stage bits.
  bool scanned = false;
  bool done = false;
  /// connect / accept / reconstruct / missed / timeout: the other node.
  NodeId peer = 0;
  /// accept: outcome.
  bool success = false;
  /// deliver_adv: the advertisement set handed to the algorithm.
  std::map<NodeId, AdvPayload> ads;
};

/// Callback records in the order they happened.
struct SimTrace {
  std::uint32_t n = 0;
  std::uint64_t rounds = 0;
  std::vector<SimTraceRecord> records;
};

struct SynchronizerConfig {
  Topology topology;
  DeltaBounds delta;
  DelayPolicy delay;
  std::uint64_t rounds = 1;
  std::uint64_t seed = 0;
  std::vector<Crash> crashes;
  /// Drop a neighbor that has not been heard from for this long while
  /// blocking on it. Runs with faults are not Property-1 checked.
  std::optional<double> neighbor_timeout;
  double time_cap = 1e7;
};

struct SynchronizerOutcome {
  SimTrace trace;
  bool finished = false;
  bool deadlocked = false;
  std::string diagnostic;
  double end_time = 0.0;
  std::vector<std::uint64_t> rounds_completed;
  std::uint64_t reconstructions = 0;
  std::uint64_t missed = 0;
  std::uint64_t connections = 0;
  std::vector<std::string> protocol_errors;
};

/// Runs `rounds` simulated rounds of the algorithm on every node over the
/// asynchronous substrate. Each node advertises <r,a,0,0>, waits for every
/// neighbor's round-r advertisement and calls deliver_adv, advertises
/// <r,a,1,0>, waits for every neighbor's scanned bit and calls end_scan,
/// waits for end_connect and advertises <r,a,1,1>, then waits for every
/// neighbor's done bit before advancing.
///
/// A node discovers only a neighbor's current advertisement; one that was
/// replaced before its delivery is missed and later reconstructed.
SynchronizerOutcome run_synchronized(const SynchronizerConfig& config, MtmAlgorithm& algorithm);

struct TraceViolation {
  int clause = 0;
  NodeId node = 0;
  Round round = 0;
  std::string detail;
};

/// Checks the three model guarantees per node and round, using record order.
/// At most one violation is reported per (clause, node, round).
std::vector<TraceViolation> validate_trace(const SimTrace& trace, const Topology& topo);

/// Largest order-position difference between neighbors over the run.
std::uint64_t max_neighbor_lag(const SimTrace& trace, const Topology& topo);

struct RoundTimeReport {
  std::uint64_t rounds = 0;
  double total_time = 0.0;
  double time_per_round = 0.0;
  double round_length = 0.0;  // delta_update + delta_connect + delta_comm
  double ratio = 0.0;         // time_per_round / round_length
};

RoundTimeReport round_time_report(const SimTrace& trace, const DeltaBounds& bounds);

/// Per-round checks on gossip run through the synchronizer: connections form
/// a matching, each joins differing token sets, and replaying the transfers
/// from the placement reproduces the final states.
std::vector<std::string> check_synced_gossip(const GossipAlgorithm& gossip, std::uint32_t n,
                                             std::uint32_t k,
                                             const std::vector<TokenPlacement>& placement);

}  // namespace mtmgossip
