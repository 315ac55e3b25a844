#include "mtmgossip/synchronizer.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "mtmgossip/errors.hpp"

namespace mtmgossip {

std::uint64_t order_position(const SimAdvertisement& ad) {
  if (ad.round < 1) throw ProtocolViolation("advertisement round must be >= 1");
  if (ad.done && !ad.scanned) throw ProtocolViolation("advertisement with done set but not scanned");
  const std::uint64_t stage = ad.done ? 2 : (ad.scanned ? 1 : 0);
  return 3 * (ad.round - 1) + stage;
}

std::optional<SimAdvertisement> reconstruct_missed(const SimAdvertisement& last_seen,
                                                   const SimAdvertisement& current) {
  const auto pl = order_position(last_seen);
  const auto pc = order_position(current);
  if (pc <= pl) throw ProtocolViolation("advertisement is not ahead of the last one seen");
  if (pc - pl == 1) return std::nullopt;
  if (pc - pl > 2) {
    throw ProtocolViolation("neighbor moved " + std::to_string(pc - pl - 1) +
                            " advertisements ahead");
  }
  const auto mid = pl + 1;
  SimAdvertisement ad;
  ad.round = mid / 3 + 1;
  ad.scanned = mid % 3 >= 1;
  ad.done = mid % 3 == 2;
  ad.payload = ad.round == current.round ? current.payload : last_seen.payload;
  return ad;
}

AdvPayload TrivialAlgorithm::request_adv(NodeId u, Round) { return {u}; }

GossipAlgorithm::GossipAlgorithm(const Topology& topo, std::uint32_t k,
                                 std::vector<TokenPlacement> placement, std::uint64_t seed,
                                 HashMode hash_mode)
    : plen_(mtmgossip::phase_length(topo.degree_bound())),
      rng_(derive_seed(seed, 0x60551)),
      codec_(hash_mode, seed) {
  if (placement.empty()) placement = default_placement(k);
  states_ = initial_states(topo.size(), k, placement);
  own_hash_.assign(topo.size(), 0);
  seen_.resize(topo.size());
  accepted_in_.assign(topo.size(), 0);
}

AdvPayload GossipAlgorithm::encode(const SyncAdvertisement& ad) {
  return {ad.status ? 1ULL : 0ULL, ad.done ? 1ULL : 0ULL, ad.hash, ad.node};
}

SyncAdvertisement GossipAlgorithm::decode(const AdvPayload& payload) {
  if (payload.size() != 4) throw ProtocolViolation("gossip advertisement must have 4 fields");
  return {payload[0] != 0, payload[1] != 0, payload[2], static_cast<NodeId>(payload[3])};
}

AdvPayload GossipAlgorithm::request_adv(NodeId u, Round r) {
  states_[u] = begin_phase(std::move(states_[u]), r, plen_, rng_);
  own_hash_[u] = codec_.tag(states_[u].tokens, r);
  return encode({states_[u].status, states_[u].done, own_hash_[u], u});
}

void GossipAlgorithm::deliver_adv(NodeId u, Round, const std::map<NodeId, AdvPayload>& ads) {
  seen_[u].clear();
  for (const auto& [v, payload] : ads) seen_[u].push_back(decode(payload));
}

void GossipAlgorithm::end_scan(NodeId u, Round, ConnectPort& port) {
  if (!states_[u].status) {
    port.end_connect();
    return;
  }
  const auto targets = eligible_targets(own_hash_[u], seen_[u], SyncAlgorithm::random_spread);
  if (auto v = choose_target(targets, rng_)) {
    port.connect(*v);
  } else {
    port.end_connect();
  }
}

bool GossipAlgorithm::accept_invitation(NodeId u, Round r, NodeId) {
  if (states_[u].status || accepted_in_[u] == r) return false;
  accepted_in_[u] = r;
  states_[u].done = true;
  return true;
}

void GossipAlgorithm::communicate(Round r, NodeId initiator, NodeId target) {
  SyncedConnection c{r, initiator, target, false};
  if (!(states_[initiator].tokens == states_[target].tokens)) {
    const auto moved = exchange_tokens(states_[initiator], states_[target], 1, rng_);
    c.productive = !moved.empty();
    for (const auto& t : moved) {
      transfers_.push_back(t);
      transfer_rounds_.push_back(r);
    }
  }
  connections_.push_back(c);
}

void GossipAlgorithm::connect_result(NodeId, Round, bool, ConnectPort& port) { port.end_connect(); }

bool GossipAlgorithm::complete() const {
  return std::all_of(states_.begin(), states_.end(), [](const auto& s) { return s.tokens.full(); });
}

std::string to_string(SimEventKind k) {
  switch (k) {
    case SimEventKind::request_adv: return "request_adv";
    case SimEventKind::deliver_adv: return "deliver_adv";
    case SimEventKind::end_scan: return "end_scan";
    case SimEventKind::end_connect: return "end_connect";
    case SimEventKind::set_adv: return "set_adv";
    case SimEventKind::reconstruct: return "reconstruct";
    case SimEventKind::missed: return "missed";
    case SimEventKind::connect: return "connect";
    case SimEventKind::accept: return "accept";
    case SimEventKind::advance: return "advance";
    case SimEventKind::crash: return "crash";
    case SimEventKind::timeout: return "timeout";
  }
  return "unknown";
}

SimEventKind parse_sim_event_kind(const std::string& s) {
  for (int i = 0; i <= static_cast<int>(SimEventKind::timeout); ++i) {
    const auto k = static_cast<SimEventKind>(i);
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown trace record kind '" + s + "'");
}

namespace {

enum class Stage { wait_ads, wait_scanned, connecting, wait_done, finished };

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::wait_ads: return "wait_ads";
    case Stage::wait_scanned: return "wait_scanned";
    case Stage::connecting: return "connecting";
    case Stage::wait_done: return "wait_done";
    case Stage::finished: return "finished";
  }
  return "?";
}

struct SimNode {
  Round round = 1;
  Stage stage = Stage::wait_ads;
  SimAdvertisement ad;
  std::uint64_t serial = 0;
  std::vector<NodeId> active;
  std::map<NodeId, SimAdvertisement> view;
  std::map<NodeId, double> last_heard;
  bool alive = true;
  bool attempted = false;
  bool pending = false;
  bool incoming_busy = false;
};

class Synchronizer;

class NodePort : public ConnectPort {
 public:
  NodePort(Synchronizer& sim, NodeId u) : sim_(sim), u_(u) {}
  void connect(NodeId target) override;
  void end_connect() override;

 private:
  Synchronizer& sim_;
  NodeId u_;
};

constexpr std::uint64_t kTimeoutCheck = 1;

class Synchronizer {
 public:
  Synchronizer(const SynchronizerConfig& config, MtmAlgorithm& algorithm)
      : config_(config),
        algorithm_(algorithm),
        sampler_(config.delta, config.delay),
        rng_(derive_seed(config.seed, 0x5194c)) {
    config_.delta.validate();
    const auto n = config_.topology.size();
    nodes_.resize(n);
    for (NodeId u = 0; u < n; ++u) {
      const auto nb = config_.topology.neighbors(u);
      nodes_[u].active.assign(nb.begin(), nb.end());
      for (auto v : nb) nodes_[u].last_heard[v] = 0.0;
    }
    out_.trace.n = n;
    out_.trace.rounds = config_.rounds;
    out_.rounds_completed.assign(n, 0);
  }

  SynchronizerOutcome run() {
    const auto n = config_.topology.size();
    if (config_.rounds == 0) {
      out_.finished = true;
      return out_;
    }
    for (const auto& c : config_.crashes) {
      if (c.node >= n) throw ArgumentError("crash node out of range");
      Event e;
      e.time = c.time;
      e.kind = EventKind::crash;
      e.node = c.node;
      queue_.push(e);
    }
    for (NodeId u = 0; u < n; ++u) {
      Event e;
      e.kind = EventKind::node_wake;
      e.node = u;
      queue_.push(e);
      if (config_.neighbor_timeout) {
        e.time = *config_.neighbor_timeout;
        e.tag = kTimeoutCheck;
        queue_.push(e);
      }
    }
    while (!queue_.empty() && !all_finished()) {
      if (queue_.top().time > config_.time_cap) break;
      const Event e = queue_.pop();
      now_ = e.time;
      handle(e);
    }
    out_.end_time = now_;
    out_.finished = all_finished();
    if (!out_.finished && queue_.empty()) {
      out_.deadlocked = true;
      out_.diagnostic = dump();
    }
    return std::move(out_);
  }

  void port_connect(NodeId u, NodeId v) {
    auto& s = nodes_[u];
    if (s.stage != Stage::connecting || s.attempted) {
      error("node " + std::to_string(u) + " attempted a connection outside its connect stage");
      return;
    }
    if (!config_.topology.adjacent(u, v)) {
      error("node " + std::to_string(u) + " attempted a connection to non-neighbor " +
            std::to_string(v));
      return;
    }
    s.attempted = true;
    s.pending = true;
    record(SimEventKind::connect, u, s.round, {}, v);
    const auto [arrive, resolve] = sampler_.connection(rng_);
    Event e;
    e.time = now_ + arrive;
    e.kind = EventKind::connect_arrive;
    e.node = u;
    e.peer = v;
    e.tag = s.round;
    e.ref = now_;
    e.resolve_at = now_ + resolve;
    queue_.push(e);
  }

  void port_end_connect(NodeId u) {
    auto& s = nodes_[u];
    if (s.stage != Stage::connecting || s.pending) {
      error("node " + std::to_string(u) + " called end_connect outside its connect stage");
      return;
    }
    record(SimEventKind::end_connect, u, s.round);
    s.stage = Stage::wait_done;
    set_adv(u, {s.round, s.ad.payload, true, true});
  }

 private:
  void handle(const Event& e) {
    switch (e.kind) {
      case EventKind::node_wake:
        if (e.tag == kTimeoutCheck) {
          timeout_check(e.node);
        } else if (nodes_[e.node].alive) {
          begin_round(e.node);
          progress(e.node);
        }
        break;
      case EventKind::adv_deliver: deliver(e); break;
      case EventKind::connect_arrive: connect_arrive(e); break;
      case EventKind::connect_resolve: connect_resolve(e); break;
      case EventKind::comm_done: comm_done(e); break;
      case EventKind::crash:
        if (nodes_[e.node].alive) {
          nodes_[e.node].alive = false;
          record(SimEventKind::crash, e.node, nodes_[e.node].round);
        }
        break;
    }
  }

  void record(SimEventKind kind, NodeId u, Round r, AdvPayload payload = {}, NodeId peer = 0,
              bool success = false) {
    SimTraceRecord rec;
    rec.time = now_;
    rec.seq = out_.trace.records.size();
    rec.kind = kind;
    rec.node = u;
    rec.round = r;
    rec.payload = std::move(payload);
    rec.peer = peer;
    rec.success = success;
    out_.trace.records.push_back(std::move(rec));
  }

  void error(const std::string& what) {
    std::ostringstream os;
    os << "t=" << now_ << ": " << what;
    out_.protocol_errors.push_back(os.str());
  }

  void set_adv(NodeId u, SimAdvertisement ad) {
    auto& s = nodes_[u];
    s.ad = std::move(ad);
    ++s.serial;
    record(SimEventKind::set_adv, u, s.ad.round, s.ad.payload);
    out_.trace.records.back().scanned = s.ad.scanned;
    out_.trace.records.back().done = s.ad.done;
    for (auto v : config_.topology.neighbors(u)) {
      Event e;
      e.time = now_ + sampler_.advertisement(rng_, true);
      e.kind = EventKind::adv_deliver;
      e.node = v;
      e.peer = u;
      e.tag = s.serial;
      e.ref = now_;
      queue_.push(e);
    }
  }

  void begin_round(NodeId u) {
    auto& s = nodes_[u];
    auto payload = algorithm_.request_adv(u, s.round);
    record(SimEventKind::request_adv, u, s.round, payload);
    s.stage = Stage::wait_ads;
    s.attempted = false;
    set_adv(u, {s.round, std::move(payload), false, false});
  }

  static std::int64_t position_of(const SimNode& s, NodeId v) {
    auto it = s.view.find(v);
    return it == s.view.end() ? -1 : static_cast<std::int64_t>(order_position(it->second));
  }

  bool neighbors_reached(NodeId u, std::int64_t pos) const {
    const auto& s = nodes_[u];
    return std::all_of(s.active.begin(), s.active.end(),
                       [&](NodeId v) { return position_of(s, v) >= pos; });
  }

  void progress(NodeId u) {
    while (true) {
      auto& s = nodes_[u];
      if (!s.alive) return;
      const auto base = static_cast<std::int64_t>(3 * (s.round - 1));
      switch (s.stage) {
        case Stage::wait_ads: {
          if (!neighbors_reached(u, base)) return;
          std::map<NodeId, AdvPayload> ads;
          for (auto v : s.active) {
            const auto& seen = s.view.at(v);
            if (seen.round != s.round) {
              error("node " + std::to_string(u) + " saw neighbor " + std::to_string(v) +
                    " in round " + std::to_string(seen.round) + " while collecting round " +
                    std::to_string(s.round));
            }
            ads[v] = seen.payload;
          }
          record(SimEventKind::deliver_adv, u, s.round);
          out_.trace.records.back().ads = ads;
          algorithm_.deliver_adv(u, s.round, ads);
          s.stage = Stage::wait_scanned;
          set_adv(u, {s.round, s.ad.payload, true, false});
          break;
        }
        case Stage::wait_scanned: {
          if (!neighbors_reached(u, base + 1)) return;
          s.stage = Stage::connecting;
          record(SimEventKind::end_scan, u, s.round);
          NodePort port(*this, u);
          algorithm_.end_scan(u, s.round, port);
          break;
        }
        case Stage::connecting: return;
        case Stage::wait_done: {
          if (!neighbors_reached(u, base + 2)) return;
          record(SimEventKind::advance, u, s.round);
          ++out_.rounds_completed[u];
          if (s.round >= config_.rounds) {
            s.stage = Stage::finished;
            return;
          }
          ++s.round;
          begin_round(u);
          break;
        }
        case Stage::finished: return;
      }
    }
  }

  void observe(NodeId u, NodeId v, const SimAdvertisement& ad) {
    auto& s = nodes_[u];
    s.last_heard[v] = now_;
    const auto pos = static_cast<std::int64_t>(order_position(ad));
    const auto last = position_of(s, v);
    if (pos <= last) return;
    std::optional<SimAdvertisement> mid;
    try {
      if (last < 0) {
        if (pos == 1) mid = SimAdvertisement{ad.round, ad.payload, false, false};
        if (pos > 1) throw ProtocolViolation("first advertisement seen is too far ahead");
      } else {
        mid = reconstruct_missed(s.view.at(v), ad);
      }
    } catch (const ProtocolViolation& e) {
      error("node " + std::to_string(u) + " from " + std::to_string(v) + ": " + e.what());
    }
    if (mid) {
      record(SimEventKind::reconstruct, u, mid->round, mid->payload, v);
      out_.trace.records.back().scanned = mid->scanned;
      out_.trace.records.back().done = mid->done;
      ++out_.reconstructions;
    }
    s.view[v] = ad;
  }

  void deliver(const Event& e) {
    if (!nodes_[e.node].alive) return;
    const auto& sender = nodes_[e.peer];
    if (sender.serial != e.tag) {
      ++out_.missed;
      record(SimEventKind::missed, e.node, nodes_[e.node].round, {}, e.peer);
      return;
    }
    observe(e.node, e.peer, sender.ad);
    progress(e.node);
  }

  void connect_arrive(const Event& e) {
    auto& target = nodes_[e.peer];
    bool ok = false;
    if (target.alive && nodes_[e.node].alive && !target.incoming_busy) {
      if (target.round != e.tag) {
        error("attempt from " + std::to_string(e.node) + " reached " + std::to_string(e.peer) +
              " in a different round");
      } else {
        ok = algorithm_.accept_invitation(e.peer, target.round, e.node);
      }
    }
    if (ok) target.incoming_busy = true;
    record(SimEventKind::accept, e.peer, e.tag, {}, e.node, ok);
    Event r = e;
    r.time = e.resolve_at;
    r.kind = EventKind::connect_resolve;
    r.success = ok;
    queue_.push(r);
  }

  void connect_resolve(const Event& e) {
    auto& s = nodes_[e.node];
    auto& t = nodes_[e.peer];
    if (e.success && !(s.alive && t.alive)) t.incoming_busy = false;
    if (!s.alive) return;
    if (e.success && t.alive) {
      Event c = e;
      c.time = now_ + sampler_.communication(rng_);
      c.kind = EventKind::comm_done;
      c.ref = now_;
      queue_.push(c);
      return;
    }
    s.pending = false;
    NodePort port(*this, e.node);
    algorithm_.connect_result(e.node, e.tag, false, port);
    progress(e.node);
  }

  void comm_done(const Event& e) {
    auto& s = nodes_[e.node];
    auto& t = nodes_[e.peer];
    t.incoming_busy = false;
    if (!s.alive) return;
    if (t.alive) {
      algorithm_.communicate(e.tag, e.node, e.peer);
      ++out_.connections;
    }
    s.pending = false;
    NodePort port(*this, e.node);
    algorithm_.connect_result(e.node, e.tag, t.alive, port);
    progress(e.node);
  }

  void timeout_check(NodeId u) {
    auto& s = nodes_[u];
    if (!s.alive || s.stage == Stage::finished) return;
    const double limit = *config_.neighbor_timeout;
    std::vector<NodeId> keep;
    for (auto v : s.active) {
      if (now_ - s.last_heard[v] >= limit && position_of(s, v) < current_need(u)) {
        record(SimEventKind::timeout, u, s.round, {}, v);
      } else {
        keep.push_back(v);
      }
    }
    s.active = std::move(keep);
    progress(u);
    if (nodes_[u].stage != Stage::finished) {
      Event e;
      e.time = now_ + limit;
      e.kind = EventKind::node_wake;
      e.node = u;
      e.tag = kTimeoutCheck;
      queue_.push(e);
    }
  }

  std::int64_t current_need(NodeId u) const {
    const auto& s = nodes_[u];
    const auto base = static_cast<std::int64_t>(3 * (s.round - 1));
    switch (s.stage) {
      case Stage::wait_ads: return base;
      case Stage::wait_scanned: return base + 1;
      case Stage::wait_done: return base + 2;
      default: return -1;
    }
  }

  bool all_finished() const {
    return std::all_of(nodes_.begin(), nodes_.end(),
                       [](const SimNode& s) { return !s.alive || s.stage == Stage::finished; });
  }

  std::string dump() const {
    std::ostringstream os;
    os << "deadlock at t=" << now_ << "\n";
    for (NodeId u = 0; u < nodes_.size(); ++u) {
      const auto& s = nodes_[u];
      if (!s.alive || s.stage == Stage::finished) continue;
      os << "node " << u << " round " << s.round << " " << stage_name(s.stage) << " sees";
      for (auto v : s.active) os << " " << v << "@" << position_of(s, v);
      os << "\n";
    }
    return os.str();
  }

  SynchronizerConfig config_;
  MtmAlgorithm& algorithm_;
  DelaySampler sampler_;
  Rng rng_;
  EventQueue queue_;
  std::vector<SimNode> nodes_;
  SynchronizerOutcome out_;
  double now_ = 0.0;
};

void NodePort::connect(NodeId target) { sim_.port_connect(u_, target); }
void NodePort::end_connect() { sim_.port_end_connect(u_); }

}  // namespace

SynchronizerOutcome run_synchronized(const SynchronizerConfig& config, MtmAlgorithm& algorithm) {
  return Synchronizer(config, algorithm).run();
}

std::vector<TraceViolation> validate_trace(const SimTrace& trace, const Topology& topo) {
  using Key = std::pair<NodeId, Round>;
  std::map<Key, std::size_t> req, del, scan, endc;
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const auto& rec = trace.records[i];
    const Key key{rec.node, rec.round};
    switch (rec.kind) {
      case SimEventKind::request_adv: req.try_emplace(key, i); break;
      case SimEventKind::deliver_adv: del.try_emplace(key, i); break;
      case SimEventKind::end_scan: scan.try_emplace(key, i); break;
      case SimEventKind::end_connect: endc.try_emplace(key, i); break;
      default: break;
    }
  }
  auto find = [](const std::map<Key, std::size_t>& m, NodeId u, Round r) -> std::optional<std::size_t> {
    auto it = m.find({u, r});
    if (it == m.end()) return std::nullopt;
    return it->second;
  };

  std::vector<TraceViolation> out;
  const auto n = topo.size();
  for (Round r = 1; r <= trace.rounds; ++r) {
    for (NodeId u = 0; u < n; ++u) {
      const auto nbrs = topo.neighbors(u);
      const auto rq = find(req, u, r);
      const auto dv = find(del, u, r);

      std::string c1;
      if (!rq || !dv) {
        c1 = "missing request_adv or deliver_adv";
      } else if (*rq > *dv) {
        c1 = "deliver_adv precedes request_adv";
      } else {
        const auto& ads = trace.records[*dv].ads;
        const std::set<NodeId> expect(nbrs.begin(), nbrs.end());
        std::set<NodeId> got;
        for (const auto& [v, _] : ads) got.insert(v);
        if (got != expect) {
          c1 = "delivered set does not match the neighborhood";
        } else {
          for (const auto& [v, payload] : ads) {
            const auto vr = find(req, v, r);
            if (!vr || *vr > *dv || trace.records[*vr].payload != payload) {
              c1 = "advertisement of neighbor " + std::to_string(v) + " is not its round value";
              break;
            }
          }
        }
      }
      if (!c1.empty()) out.push_back({1, u, r, c1});

      std::string c2;
      const auto sc = find(scan, u, r);
      if (!sc) {
        c2 = "missing end_scan";
      } else if (!dv || *dv > *sc) {
        c2 = "end_scan before own deliver_adv";
      } else {
        for (auto v : nbrs) {
          const auto dvv = find(del, v, r);
          if (!dvv || *dvv > *sc) {
            c2 = "end_scan before deliver_adv of neighbor " + std::to_string(v);
            break;
          }
        }
      }
      if (!c2.empty()) out.push_back({2, u, r, c2});

      if (r > 1 && rq) {
        std::string c3;
        std::vector<NodeId> group(nbrs.begin(), nbrs.end());
        group.push_back(u);
        for (auto w : group) {
          const auto ec = find(endc, w, r - 1);
          if (!ec || *ec > *rq) {
            c3 = "request_adv before end_connect of " + std::to_string(w) + " in round " +
                 std::to_string(r - 1);
            break;
          }
        }
        if (!c3.empty()) out.push_back({3, u, r, c3});
      }
    }
  }
  return out;
}

std::uint64_t max_neighbor_lag(const SimTrace& trace, const Topology& topo) {
  std::vector<std::int64_t> pos(topo.size(), -1);
  std::uint64_t worst = 0;
  for (const auto& rec : trace.records) {
    if (rec.kind != SimEventKind::set_adv) continue;
    SimAdvertisement ad{rec.round, {}, rec.scanned, rec.done};
    pos[rec.node] = static_cast<std::int64_t>(order_position(ad));
    for (auto v : topo.neighbors(rec.node)) {
      if (pos[v] < 0) continue;
      const auto d = pos[v] > pos[rec.node] ? pos[v] - pos[rec.node] : pos[rec.node] - pos[v];
      worst = std::max<std::uint64_t>(worst, static_cast<std::uint64_t>(d));
    }
  }
  return worst;
}

RoundTimeReport round_time_report(const SimTrace& trace, const DeltaBounds& bounds) {
  RoundTimeReport rep;
  rep.rounds = trace.rounds;
  rep.round_length = bounds.max();
  if (trace.rounds == 0) return rep;
  for (const auto& rec : trace.records) rep.total_time = std::max(rep.total_time, rec.time);
  rep.time_per_round = rep.total_time / static_cast<double>(trace.rounds);
  rep.ratio = rep.time_per_round / rep.round_length;
  return rep;
}

std::vector<std::string> check_synced_gossip(const GossipAlgorithm& gossip, std::uint32_t n,
                                             std::uint32_t k,
                                             const std::vector<TokenPlacement>& placement) {
  std::vector<std::string> problems;
  std::map<Round, std::set<NodeId>> busy;
  for (const auto& c : gossip.connections()) {
    auto& used = busy[c.round];
    if (!used.insert(c.sender).second || !used.insert(c.receiver).second) {
      problems.push_back("round " + std::to_string(c.round) + ": connections are not a matching");
    }
    if (!c.productive) {
      problems.push_back("round " + std::to_string(c.round) + ": connection " +
                         std::to_string(c.sender) + "-" + std::to_string(c.receiver) +
                         " joined equal token sets");
    }
  }
  auto states = initial_states(n, k, placement.empty() ? default_placement(k) : placement);
  for (const auto& t : gossip.transfers()) {
    if (!states[t.from].tokens.contains(t.token) || states[t.to].tokens.contains(t.token)) {
      problems.push_back("transfer of token " + std::to_string(t.token) + " is not legal");
    }
    states[t.to].tokens.insert(t.token);
  }
  for (NodeId u = 0; u < n; ++u) {
    if (!(states[u].tokens == gossip.states()[u].tokens)) {
      problems.push_back("replayed tokens of node " + std::to_string(u) + " differ");
    }
  }
  return problems;
}

}  // namespace mtmgossip
