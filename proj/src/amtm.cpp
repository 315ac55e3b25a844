#include "mtmgossip/amtm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mtmgossip/errors.hpp"

namespace mtmgossip {

namespace {

constexpr double kTimeEps = 1e-9;
constexpr std::uint64_t kNoToken = ~std::uint64_t{0};

std::string fmt_time(double t) {
  std::ostringstream os;
  os.precision(12);
  os << t;
  return os.str();
}

}  // namespace

void DeltaBounds::validate() const {
  if (!(update > 0 && old > 0 && connect > 0 && comm > 0)) {
    throw ArgumentError("delta bounds must be positive");
  }
  if (!(old > update)) throw ArgumentError("delta_old must exceed delta_update");
}

std::string to_string(DelayMode m) {
  switch (m) {
    case DelayMode::fixed_max: return "fixed_max";
    case DelayMode::uniform: return "uniform";
    case DelayMode::adversarial: return "adversarial";
  }
  return "unknown";
}

DelayMode parse_delay_mode(const std::string& s) {
  if (s == "fixed_max") return DelayMode::fixed_max;
  if (s == "uniform") return DelayMode::uniform;
  if (s == "adversarial") return DelayMode::adversarial;
  throw ConfigError("unknown delay mode '" + s + "'");
}

std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::adv_deliver: return "adv_deliver";
    case EventKind::connect_arrive: return "connect_arrive";
    case EventKind::connect_resolve: return "connect_resolve";
    case EventKind::comm_done: return "comm_done";
    case EventKind::node_wake: return "node_wake";
    case EventKind::crash: return "crash";
  }
  return "unknown";
}

std::string to_string(TimelineKind k) {
  switch (k) {
    case TimelineKind::update: return "update";
    case TimelineKind::adv_deliver: return "adv_deliver";
    case TimelineKind::adv_stale: return "adv_stale";
    case TimelineKind::adv_drop: return "adv_drop";
    case TimelineKind::select: return "select";
    case TimelineKind::connect_attempt: return "connect_attempt";
    case TimelineKind::connect_arrive: return "connect_arrive";
    case TimelineKind::connect_resolve: return "connect_resolve";
    case TimelineKind::comm_done: return "comm_done";
    case TimelineKind::learn: return "learn";
    case TimelineKind::crash: return "crash";
    case TimelineKind::complete: return "complete";
  }
  return "unknown";
}

FaultPlan byzantine_plan(const Topology& topo, double fraction,
                         const std::vector<TokenPlacement>& placement, std::uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0) throw ArgumentError("byzantine fraction must be in [0, 1)");
  const auto n = topo.size();
  const auto count = static_cast<std::uint32_t>(std::llround(fraction * n));
  std::vector<bool> holds(n, false);
  for (const auto& p : placement) {
    if (p.node < n) holds[p.node] = true;
  }
  std::vector<NodeId> candidates;
  for (NodeId u = 0; u < n; ++u) {
    if (!holds[u]) candidates.push_back(u);
  }
  if (count > candidates.size()) {
    throw ArgumentError("not enough token-free nodes for the requested byzantine fraction");
  }
  Rng rng(derive_seed(seed, 0xb12a));
  for (std::size_t i = candidates.size(); i > 1; --i) {
    std::swap(candidates[i - 1], candidates[rng.below(i)]);
  }
  FaultPlan plan;
  plan.byzantine.assign(candidates.begin(), candidates.begin() + count);
  std::sort(plan.byzantine.begin(), plan.byzantine.end());
  return plan;
}

std::uint64_t EventQueue::push(Event e) {
  e.seq = next_seq_++;
  heap_.push(e);
  return e.seq;
}

Event EventQueue::pop() {
  Event e = heap_.top();
  heap_.pop();
  return e;
}

double DelaySampler::advertisement(Rng& rng, bool looks_productive) const {
  switch (policy_.mode) {
    case DelayMode::fixed_max: return bounds_.update;
    case DelayMode::uniform: return rng.open_closed(bounds_.update);
    case DelayMode::adversarial:
      return looks_productive ? bounds_.update : policy_.fast_fraction * bounds_.update;
  }
  return bounds_.update;
}

std::pair<double, double> DelaySampler::connection(Rng& rng) const {
  const double c = bounds_.connect;
  switch (policy_.mode) {
    case DelayMode::fixed_max: return {c / 2, c};
    case DelayMode::uniform: {
      const double arrive = rng.open_closed(c);
      return {arrive, arrive + (c - arrive) * rng.unit()};
    }
    case DelayMode::adversarial: return {0.9 * c, c};
  }
  return {c / 2, c};
}

double DelaySampler::communication(Rng& rng) const {
  if (policy_.mode == DelayMode::uniform) return rng.open_closed(bounds_.comm);
  return bounds_.comm;
}

std::optional<NodeId> select_productive(AsyncNodeState& node, std::uint64_t own_tag, Rng& rng) {
  std::vector<NodeId> productive;
  for (const auto& [id, entry] : node.neighbors) {
    if (entry.tag != own_tag) productive.push_back(id);
  }
  if (productive.empty()) return std::nullopt;
  node.neighbors.clear();
  return productive[rng.below(productive.size())];
}

AsyncSimulator::AsyncSimulator(AsyncConfig config)
    : config_(std::move(config)),
      sampler_(config_.delta, config_.delay),
      rng_(config_.seed),
      codec_(config_.hash_mode, config_.seed) {
  config_.delta.validate();
  const auto& topo = config_.topology;
  const auto n = topo.size();
  if (n < 2) throw ArgumentError("async runs need n >= 2");
  if (config_.placement.empty()) config_.placement = default_placement(config_.k);
  const auto sync_states = initial_states(n, config_.k, config_.placement);
  nodes_.resize(n);
  for (NodeId u = 0; u < n; ++u) {
    nodes_[u].id = u;
    nodes_[u].tokens = sync_states[u].tokens;
  }
  for (auto b : config_.faults.byzantine) {
    if (b >= n) throw ArgumentError("byzantine node out of range");
    nodes_[b].byzantine = true;
  }
  for (const auto& c : config_.faults.crashes) {
    if (c.node >= n) throw ArgumentError("crash node out of range");
    if (c.time < 0) throw ArgumentError("crash time must be non-negative");
  }
  double total = 0.0;
  std::uint32_t honest = 0;
  for (NodeId u = 0; u < n; ++u) {
    if (nodes_[u].byzantine) continue;
    std::uint32_t byz = 0;
    for (auto v : topo.neighbors(u)) byz += nodes_[v].byzantine ? 1 : 0;
    const double frac = static_cast<double>(byz) / topo.degree(u);
    result_.max_byzantine_fraction = std::max(result_.max_byzantine_fraction, frac);
    total += frac;
    ++honest;
  }
  result_.mean_byzantine_fraction = honest ? total / honest : 0.0;
}

void AsyncSimulator::start() {
  if (started_) return;
  started_ = true;
  for (const auto& c : config_.faults.crashes) {
    Event e;
    e.time = c.time;
    e.kind = EventKind::crash;
    e.node = c.node;
    schedule(e);
  }
  for (NodeId u = 0; u < nodes_.size(); ++u) {
    Event e;
    e.kind = EventKind::node_wake;
    e.node = u;
    schedule(e);
  }
  check_completion();
}

std::uint64_t AsyncSimulator::schedule(Event e) { return queue_.push(e); }

void AsyncSimulator::violation(const std::string& what) {
  result_.contract_violations.push_back("t=" + fmt_time(now_) + ": " + what);
}

void AsyncSimulator::record(TimelineKind kind, NodeId node, NodeId peer, std::uint64_t value,
                            double ref, bool success) {
  if (!config_.record_timeline) return;
  result_.timeline.push_back({now_, record_seq_++, kind, node, peer, value, ref, success});
}

bool AsyncSimulator::step() {
  if (!started_) start();
  if (finished_ || queue_.empty()) return false;
  if (queue_.top().time > config_.time_cap) {
    finished_ = true;
    return false;
  }
  const Event e = queue_.pop();
  now_ = e.time;
  ++result_.events;
  handle(e);
  return !finished_;
}

AsyncResult AsyncSimulator::run() {
  start();
  while (step()) {
  }
  result_.end_time = now_;
  result_.stalled = !result_.completed && queue_.empty();
  result_.node_stats.clear();
  for (const auto& s : nodes_) result_.node_stats.push_back(s.stats);
  return result_;
}

void AsyncSimulator::handle(const Event& e) {
  switch (e.kind) {
    case EventKind::node_wake:
      if (nodes_[e.node].alive) loop_top(e.node);
      break;
    case EventKind::adv_deliver: deliver(e); break;
    case EventKind::connect_arrive: connect_arrive(e); break;
    case EventKind::connect_resolve: connect_resolve(e); break;
    case EventKind::comm_done: comm_done(e); break;
    case EventKind::crash: crash(e.node); break;
  }
}

std::uint64_t AsyncSimulator::get_tag(NodeId u) {
  auto& s = nodes_[u];
  if (s.byzantine) return rng_.next() | (std::uint64_t{1} << 63);
  return codec_.tag(s.tokens, 0);
}

void AsyncSimulator::loop_top(NodeId u) {
  auto& s = nodes_[u];
  if (!s.alive) return;
  s.pos = LoopPos::top;
  ++s.stats.iterations;
  update(u, get_tag(u));
  s.pos = LoopPos::waiting_neighbors;
  try_select(u);
}

std::vector<Event> AsyncSimulator::update(NodeId u, std::uint64_t tag) {
  auto& s = nodes_[u];
  std::vector<Event> scheduled;
  if (!s.alive) return scheduled;
  s.last_update_at = now_;
  record(TimelineKind::update, u, u, tag);
  if (s.has_advertised && s.advertised_tag == tag) return scheduled;
  s.has_advertised = true;
  s.advertised_tag = tag;
  s.advertised_at = now_;
  for (auto v : config_.topology.neighbors(u)) {
    const auto& target = nodes_[v];
    if (!target.alive) continue;
    Event e;
    e.time = now_ + sampler_.advertisement(rng_, tag != target.advertised_tag);
    e.kind = EventKind::adv_deliver;
    e.node = v;
    e.peer = u;
    e.tag = tag;
    e.version = now_;
    e.ref = now_;
    e.seq = schedule(e);
    scheduled.push_back(e);
  }
  return scheduled;
}

void AsyncSimulator::try_select(NodeId u) {
  auto& s = nodes_[u];
  if (!s.alive || s.pos != LoopPos::waiting_neighbors) return;
  if (s.neighbors.empty() || !s.map_dirty) return;
  s.map_dirty = false;
  const auto choice = select(u);
  if (!choice) {
    ++s.stats.null_selects;
    return;
  }
  record(TimelineKind::select, u, *choice);
  rediscover(u);
  attempt_connection(u, *choice);
}

std::optional<NodeId> AsyncSimulator::select(NodeId u) {
  auto& s = nodes_[u];
  // A crashed neighbor's advertisement expires delta_old after its last update.
  std::erase_if(s.neighbors, [&](const auto& entry) {
    const auto& w = nodes_[entry.first];
    return !w.alive && now_ > w.last_update_at + config_.delta.old;
  });
  const std::uint64_t own = s.byzantine ? s.advertised_tag : codec_.tag(s.tokens, 0);
  return select_productive(s, own, rng_);
}

void AsyncSimulator::rediscover(NodeId u) {
  const auto own = nodes_[u].advertised_tag;
  for (auto w : config_.topology.neighbors(u)) {
    const auto& ws = nodes_[w];
    if (!ws.has_advertised) continue;
    if (!ws.alive && now_ >= ws.last_update_at + config_.delta.old) continue;
    Event e;
    e.time = now_ + sampler_.advertisement(rng_, ws.advertised_tag != own);
    e.kind = EventKind::adv_deliver;
    e.node = u;
    e.peer = w;
    e.tag = ws.advertised_tag;
    e.version = ws.advertised_at;
    e.ref = now_;
    schedule(e);
  }
}

void AsyncSimulator::deliver(const Event& e) {
  auto& r = nodes_[e.node];
  const auto& sender = nodes_[e.peer];
  if (!r.alive) return;
  const double delay = now_ - e.ref;
  if (!(delay > 0) || delay > config_.delta.update + kTimeEps) {
    violation("advertisement delivered after " + fmt_time(delay));
  }
  if (delay > config_.delta.old ||
      (!sender.alive && now_ > sender.last_update_at + config_.delta.old)) {
    record(TimelineKind::adv_drop, e.node, e.peer, e.tag, e.ref);
    return;
  }
  auto it = r.neighbors.find(e.peer);
  if (it != r.neighbors.end() && it->second.version > e.version) {
    record(TimelineKind::adv_stale, e.node, e.peer, e.tag, e.ref);
    ++result_.accounting.deliveries;
    result_.accounting.delivery_time += delay;
    return;
  }
  const bool changed = it == r.neighbors.end() || it->second.tag != e.tag;
  r.neighbors[e.peer] = {e.tag, e.version};
  record(TimelineKind::adv_deliver, e.node, e.peer, e.tag, e.ref);
  ++result_.accounting.deliveries;
  result_.accounting.delivery_time += delay;
  if (changed) {
    r.map_dirty = true;
    try_select(e.node);
  }
}

void AsyncSimulator::attempt_connection(NodeId u, NodeId v) {
  auto& s = nodes_[u];
  if (s.receiver) violation("node " + std::to_string(u) + " started a second outgoing attempt");
  s.receiver = v;
  s.pos = LoopPos::connecting;
  ++s.stats.attempts;
  ++result_.attempts;
  const auto [arrive, resolve] = sampler_.connection(rng_);
  record(TimelineKind::connect_attempt, u, v, 0, now_);
  Event e;
  e.time = now_ + arrive;
  e.kind = EventKind::connect_arrive;
  e.node = u;
  e.peer = v;
  e.ref = now_;
  e.resolve_at = now_ + resolve;
  schedule(e);
}

void AsyncSimulator::connect_arrive(const Event& e) {
  auto& target = nodes_[e.peer];
  const bool accepted = target.alive && !target.incoming_busy && nodes_[e.node].alive;
  if (accepted) {
    target.incoming_busy = true;
    target.incoming_from = e.node;
  }
  record(TimelineKind::connect_arrive, e.peer, e.node, 0, e.ref, accepted);
  Event r = e;
  r.time = e.resolve_at;
  r.kind = EventKind::connect_resolve;
  r.success = accepted;
  schedule(r);
}

void AsyncSimulator::connect_resolve(const Event& e) {
  auto& s = nodes_[e.node];
  auto& t = nodes_[e.peer];
  const double took = now_ - e.ref;
  if (took > config_.delta.connect + kTimeEps) {
    violation("connection attempt resolved after " + fmt_time(took));
  }
  ++result_.accounting.resolutions;
  result_.accounting.connect_time += took;
  const bool ok = e.success && s.alive && t.alive;
  if (e.success && !ok && t.incoming_from == e.node) {
    t.incoming_busy = false;
    t.incoming_from.reset();
  }
  record(TimelineKind::connect_resolve, e.node, e.peer, e.success ? 1 : 0, e.ref, ok);
  if (!s.alive) return;
  if (!ok) {
    ++s.stats.failed_attempts;
    ++result_.failed_attempts;
    s.receiver.reset();
    loop_top(e.node);
    return;
  }
  s.connected = true;
  s.pos = LoopPos::communicating;
  ++s.stats.connections;
  communicate(e.node, e.peer);
}

void AsyncSimulator::communicate(NodeId u, NodeId v) {
  Event e;
  e.time = now_ + sampler_.communication(rng_);
  e.kind = EventKind::comm_done;
  e.node = u;
  e.peer = v;
  e.ref = now_;
  schedule(e);
}

void AsyncSimulator::comm_done(const Event& e) {
  auto& s = nodes_[e.node];
  auto& t = nodes_[e.peer];
  const double took = now_ - e.ref;
  if (took > config_.delta.comm + kTimeEps) violation("communication took " + fmt_time(took));
  ++result_.accounting.communications;
  result_.accounting.comm_time += took;

  std::optional<NodeId> learner;
  std::uint64_t moved = kNoToken;
  if (s.alive && t.alive && !s.byzantine && !t.byzantine) {
    const auto diff = s.tokens.symmetric_difference(t.tokens);
    if (!diff.empty()) {
      const auto tok = diff[rng_.below(diff.size())];
      moved = tok;
      learner = s.tokens.contains(tok) ? e.peer : e.node;
    }
  }
  record(TimelineKind::comm_done, e.node, e.peer, moved, e.ref, learner.has_value());
  if (t.incoming_from == e.node) {
    t.incoming_busy = false;
    t.incoming_from.reset();
    ++t.stats.served;
  }
  s.connected = false;
  s.receiver.reset();
  if (learner) {
    learn(*learner, *learner == e.node ? e.peer : e.node, static_cast<TokenId>(moved));
    if (*learner == e.peer) tokens_changed(e.peer);
  }
  if (s.alive) loop_top(e.node);
}

void AsyncSimulator::tokens_changed(NodeId u) {
  auto& s = nodes_[u];
  s.map_dirty = true;
  if (s.alive && s.pos == LoopPos::waiting_neighbors) loop_top(u);
}

void AsyncSimulator::learn(NodeId learner, NodeId source, TokenId t) {
  nodes_[learner].tokens.insert(t);
  ++nodes_[learner].stats.learned;
  ++result_.transfers;
  result_.learn_times.push_back(now_);
  record(TimelineKind::learn, learner, source, t);
  check_completion();
}

void AsyncSimulator::crash(NodeId u) {
  auto& s = nodes_[u];
  if (!s.alive) return;
  s.alive = false;
  s.pos = LoopPos::crashed;
  record(TimelineKind::crash, u, u);
  check_completion();
}

void AsyncSimulator::check_completion() {
  if (result_.completed) return;
  for (const auto& s : nodes_) {
    if (s.alive && !s.byzantine && !s.tokens.full()) return;
  }
  result_.completed = true;
  result_.completion_time = now_;
  finished_ = true;
  record(TimelineKind::complete, 0, 0);
}

AsyncResult run_async(const AsyncConfig& config) { return AsyncSimulator(config).run(); }

std::vector<std::string> validate_timeline(const std::vector<TimelineRecord>& timeline,
                                           const DeltaBounds& bounds, std::uint32_t n) {
  std::vector<std::string> problems;
  std::vector<int> outgoing(n, 0);
  std::vector<int> incoming(n, 0);
  auto bad = [&](const TimelineRecord& r, const std::string& what) {
    problems.push_back("t=" + fmt_time(r.time) + " " + to_string(r.kind) + " node " +
                       std::to_string(r.node) + ": " + what);
  };
  for (const auto& r : timeline) {
    const double d = r.time - r.ref;
    switch (r.kind) {
      case TimelineKind::adv_deliver:
      case TimelineKind::adv_stale:
        if (!(d > 0) || d > bounds.update + kTimeEps) bad(r, "delivery delay " + fmt_time(d));
        break;
      case TimelineKind::connect_attempt:
        if (++outgoing[r.node] > 1) bad(r, "more than one outgoing attempt");
        break;
      case TimelineKind::connect_arrive:
        if (r.success && ++incoming[r.node] > 1) bad(r, "more than one incoming connection");
        break;
      case TimelineKind::connect_resolve:
        if (!(d > 0) || d > bounds.connect + kTimeEps) bad(r, "resolution after " + fmt_time(d));
        if (!r.success) {
          --outgoing[r.node];
          if (r.value == 1) --incoming[r.peer];
        }
        break;
      case TimelineKind::comm_done:
        if (!(d > 0) || d > bounds.comm + kTimeEps) bad(r, "communication took " + fmt_time(d));
        --outgoing[r.node];
        --incoming[r.peer];
        break;
      default:
        break;
    }
  }
  return problems;
}

std::vector<std::string> check_progress(const AsyncResult& result, const DeltaBounds& bounds,
                                        double eps) {
  std::vector<std::string> gaps;
  const double limit = bounds.max() + eps;
  double last = 0.0;
  for (double t : result.learn_times) {
    if (t - last > limit) {
      gaps.push_back("no token learned in (" + fmt_time(last) + ", " + fmt_time(t) + "]");
    }
    last = t;
  }
  if (!result.completed && result.end_time - last > limit) {
    gaps.push_back("no token learned in (" + fmt_time(last) + ", " + fmt_time(result.end_time) +
                   "] before the run ended incomplete");
  }
  return gaps;
}

}  // namespace mtmgossip
