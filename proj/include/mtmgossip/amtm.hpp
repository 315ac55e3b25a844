#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "mtmgossip/rng.hpp"
#include "mtmgossip/sync_engine.hpp"
#include "mtmgossip/token_set.hpp"
#include "mtmgossip/topology.hpp"

namespace mtmgossip {

/// Adversarial timing bounds of the asynchronous model.
struct DeltaBounds {
  double update = 1.0;
  double old = 2.0;
  double connect = 1.0;
  double comm = 1.0;

  /// One worst-case pass of the node loop.
  double max() const { return update + connect + comm; }
  void validate() const;
};

enum class DelayMode { fixed_max, uniform, adversarial };
std::string to_string(DelayMode m);
DelayMode parse_delay_mode(const std::string& s);

/// How the scheduler picks each latency within its bound.
///   fixed_max   every latency equals its bound; attempts arrive at half of
///               delta_connect and resolve at the bound.
///   uniform     latencies uniform on (0, bound].
///   adversarial advertisements that would look productive to the receiver
///               take the full bound, all others `fast_fraction` of it;
///               attempts arrive late; communication takes the bound.
struct DelayPolicy {
  DelayMode mode = DelayMode::fixed_max;
  double fast_fraction = 0.05;
};

struct Crash {
  NodeId node = 0;
  double time = 0.0;
};

struct FaultPlan {
  std::vector<Crash> crashes;
  std::vector<NodeId> byzantine;
};

/// Picks round(fraction * n) byzantine nodes uniformly among nodes that hold
/// no initial token.
FaultPlan byzantine_plan(const Topology& topo, double fraction,
                         const std::vector<TokenPlacement>& placement, std::uint64_t seed);

enum class EventKind { adv_deliver, connect_arrive, connect_resolve, comm_done, node_wake, crash };
std::string to_string(EventKind k);

struct Event {
  double time = 0.0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::node_wake;
  NodeId node = 0;  // receiver of a delivery, initiator of a connection
  NodeId peer = 0;  // sender of a delivery, target of a connection
  std::uint64_t tag = 0;
  double version = 0.0;  // update time of the advertisement carried
  double ref = 0.0;      // trigger / attempt start / communication start
  double resolve_at = 0.0;
  bool success = false;
};

/// Min-queue on (time, seq); seq is assigned at insertion.
class EventQueue {
 public:
  std::uint64_t push(Event e);
  Event pop();
  const Event& top() const { return heap_.top(); }
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };
  std::priority_queue<Event, std::vector<Event>, Later> heap_;
  std::uint64_t next_seq_ = 0;
};

/// Samples latencies under a DelayPolicy; every value lies in (0, bound].
class DelaySampler {
 public:
  DelaySampler(DeltaBounds bounds, DelayPolicy policy) : bounds_(bounds), policy_(policy) {}
  double advertisement(Rng& rng, bool looks_productive) const;
  /// Offset of attempt arrival and of resolution from the attempt start.
  std::pair<double, double> connection(Rng& rng) const;
  double communication(Rng& rng) const;
  const DeltaBounds& bounds() const { return bounds_; }
  const DelayPolicy& policy() const { return policy_; }

 private:
  DeltaBounds bounds_;
  DelayPolicy policy_;
};

struct NeighborEntry {
  std::uint64_t tag = 0;
  double version = 0.0;
};

enum class LoopPos { top, waiting_neighbors, connecting, communicating, crashed };

struct LoopStats {
  std::uint64_t iterations = 0;
  std::uint64_t null_selects = 0;
  std::uint64_t attempts = 0;
  std::uint64_t failed_attempts = 0;
  std::uint64_t connections = 0;
  std::uint64_t served = 0;
  std::uint64_t learned = 0;
};

struct AsyncNodeState {
  NodeId id = 0;
  TokenSet tokens;
  std::map<NodeId, NeighborEntry> neighbors;
  bool connected = false;
  std::optional<NodeId> receiver;
  bool incoming_busy = false;
  std::optional<NodeId> incoming_from;
  LoopPos pos = LoopPos::top;
  /// Map changed (or own tag changed) since the last Select.
  bool map_dirty = false;
  bool alive = true;
  bool byzantine = false;
  bool has_advertised = false;
  std::uint64_t advertised_tag = 0;
  double advertised_at = 0.0;
  double last_update_at = 0.0;
  LoopStats stats;
};

/// Entries whose tag differs from own_tag. When any exist the map is cleared
/// and one is returned uniformly at random; otherwise the map is kept.
std::optional<NodeId> select_productive(AsyncNodeState& node, std::uint64_t own_tag, Rng& rng);

enum class TimelineKind {
  update,
  adv_deliver,
  adv_stale,
  adv_drop,
  select,
  connect_attempt,
  connect_arrive,
  connect_resolve,
  comm_done,
  learn,
  crash,
  complete,
};
std::string to_string(TimelineKind k);

struct TimelineRecord {
  double time = 0.0;
  std::uint64_t seq = 0;
  TimelineKind kind = TimelineKind::update;
  NodeId node = 0;
  NodeId peer = 0;
  std::uint64_t value = 0;
  double ref = 0.0;
  bool success = false;
};

struct AsyncConfig {
  Topology topology;
  std::uint32_t k = 1;
  std::vector<TokenPlacement> placement;  // empty = default_placement(k)
  DeltaBounds delta;
  DelayPolicy delay;
  FaultPlan faults;
  HashMode hash_mode = HashMode::digest;
  std::uint64_t seed = 0;
  double time_cap = 1e6;
  bool record_timeline = true;
};

struct DeltaAccounting {
  std::uint64_t deliveries = 0;
  double delivery_time = 0.0;
  std::uint64_t resolutions = 0;
  double connect_time = 0.0;
  std::uint64_t communications = 0;
  double comm_time = 0.0;
};

struct AsyncResult {
  bool completed = false;
  /// Event queue drained before completion.
  bool stalled = false;
  double completion_time = 0.0;
  double end_time = 0.0;
  std::uint64_t transfers = 0;
  std::uint64_t attempts = 0;
  std::uint64_t failed_attempts = 0;
  std::uint64_t events = 0;
  std::vector<double> learn_times;
  std::vector<TimelineRecord> timeline;
  std::vector<LoopStats> node_stats;
  DeltaAccounting accounting;
  std::vector<std::string> contract_violations;
  double max_byzantine_fraction = 0.0;
  double mean_byzantine_fraction = 0.0;
};

/// Event-driven simulation of random spread gossip on the asynchronous
/// model. Each node runs: GetTag, update, block for neighbor updates,
/// Select, block for connection, Communicate.
///
/// Advertisements persist: a node that clears its neighbor map rediscovers
/// each live neighbor's current advertisement within delta_update, and a
/// crashed node's last advertisement remains discoverable until
/// delta_old after its final update. After a Select that finds nothing
/// productive the node blocks until its map or its own tag changes.
class AsyncSimulator {
 public:
  explicit AsyncSimulator(AsyncConfig config);

  /// Runs to completion, stall, or time_cap.
  AsyncResult run();

  // Single-step interface used by tests.
  bool step();
  double now() const { return now_; }
  const AsyncNodeState& node(NodeId u) const { return nodes_[u]; }
  std::vector<Event> update(NodeId u, std::uint64_t tag);
  std::optional<NodeId> select(NodeId u);
  void attempt_connection(NodeId u, NodeId v);
  void communicate(NodeId u, NodeId v);
  void start();
  const AsyncResult& partial() const { return result_; }
  std::uint64_t get_tag(NodeId u);

 private:
  void handle(const Event& e);
  void loop_top(NodeId u);
  void try_select(NodeId u);
  void rediscover(NodeId u);
  void deliver(const Event& e);
  void connect_arrive(const Event& e);
  void connect_resolve(const Event& e);
  void comm_done(const Event& e);
  void crash(NodeId u);
  void tokens_changed(NodeId u);
  void learn(NodeId learner, NodeId source, TokenId t);
  void check_completion();
  void record(TimelineKind kind, NodeId node, NodeId peer = 0, std::uint64_t value = 0,
              double ref = 0.0, bool success = false);
  std::uint64_t schedule(Event e);
  void violation(const std::string& what);

  AsyncConfig config_;
  DelaySampler sampler_;
  Rng rng_;
  TagCodec codec_;
  EventQueue queue_;
  std::vector<AsyncNodeState> nodes_;
  AsyncResult result_;
  double now_ = 0.0;
  std::uint64_t record_seq_ = 0;
  bool started_ = false;
  bool finished_ = false;
};

AsyncResult run_async(const AsyncConfig& config);

/// Offline timing and concurrency checks over a recorded timeline.
std::vector<std::string> validate_timeline(const std::vector<TimelineRecord>& timeline,
                                           const DeltaBounds& bounds, std::uint32_t n);

/// Gaps between consecutive learn events (starting at time 0) that exceed
/// delta_max + eps while the run is incomplete.
std::vector<std::string> check_progress(const AsyncResult& result, const DeltaBounds& bounds,
                                        double eps = 1e-9);

}  // namespace mtmgossip
