#include "mtmgossip/harness.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "mtmgossip/analysis.hpp"
#include "mtmgossip/errors.hpp"

namespace mtmgossip {

using nlohmann::json;

std::string to_string(Model m) {
  switch (m) {
    case Model::sync: return "sync";
    case Model::async: return "async";
    case Model::synchronized: return "synchronized";
  }
  return "unknown";
}

Model parse_model(const std::string& s) {
  if (s == "sync") return Model::sync;
  if (s == "async") return Model::async;
  if (s == "synchronized") return Model::synchronized;
  throw ConfigError("unknown model '" + s + "'");
}

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

std::uint64_t as_uint(const json& v, const std::string& where) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
  throw ConfigError(where + ": expected a non-negative integer");
}

std::uint32_t as_u32(const json& v, const std::string& where) {
  const auto x = as_uint(v, where);
  if (x > 0xffffffffULL) throw ConfigError(where + ": value too large");
  return static_cast<std::uint32_t>(x);
}

double as_double(const json& v, const std::string& where) {
  if (!v.is_number()) throw ConfigError(where + ": expected a number");
  return v.get<double>();
}

std::string as_string(const json& v, const std::string& where) {
  if (!v.is_string()) throw ConfigError(where + ": expected a string");
  return v.get<std::string>();
}

bool as_bool(const json& v, const std::string& where) {
  if (!v.is_boolean()) throw ConfigError(where + ": expected a boolean");
  return v.get<bool>();
}

TopologyKind as_kind(const json& v, const std::string& where) {
  try {
    return parse_topology_kind(as_string(v, where));
  } catch (const ArgumentError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

template <class T, class F>
std::vector<T> as_list(const json& v, const std::string& where, F&& each) {
  if (!v.is_array()) throw ConfigError(where + ": expected an array");
  std::vector<T> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(each(v[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

void validate(const ExperimentConfig& c) {
  if (c.k < 1) throw ConfigError("k must be >= 1");
  if (c.tokens_per_connection < 1) throw ConfigError("sync.tokens_per_connection must be >= 1");
  if (c.round_cap < 1) throw ConfigError("sync.round_cap must be >= 1");
  if (c.seeds.empty()) throw ConfigError("seeds must not be empty");
  if (c.threads < 1) throw ConfigError("threads must be >= 1");
  if (c.byzantine < 0 || c.byzantine >= 1) throw ConfigError("async.byzantine must be in [0, 1)");
  if (!(c.time_cap > 0)) throw ConfigError("async.time_cap must be positive");
  if (c.delay.fast_fraction <= 0 || c.delay.fast_fraction > 1) {
    throw ConfigError("async.delay.fast_fraction must be in (0, 1]");
  }
  try {
    c.delta.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("async.delta: ") + e.what());
  }
  for (double b : c.sweep_byzantine) {
    if (b < 0 || b >= 1) throw ConfigError("sweep.byzantine values must be in [0, 1)");
  }
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  check_keys(j, {"model", "topology", "k", "placement", "hash_mode", "sync", "async", "synced",
                 "seeds", "threads", "output", "sweep"},
             "config");
  ExperimentConfig c;
  try {
    if (j.contains("model")) c.model = parse_model(as_string(j["model"], "model"));
    if (j.contains("topology")) {
      const auto& t = j["topology"];
      check_keys(t, {"kind", "n", "seed", "degree", "p", "edge_list"}, "topology");
      if (t.contains("kind")) c.topology.kind = as_kind(t["kind"], "topology.kind");
      if (t.contains("n")) c.topology.n = as_u32(t["n"], "topology.n");
      if (t.contains("seed")) c.topology.seed = as_uint(t["seed"], "topology.seed");
      if (t.contains("degree")) c.topology.degree = as_u32(t["degree"], "topology.degree");
      if (t.contains("p")) c.topology.p = as_double(t["p"], "topology.p");
      if (t.contains("edge_list") && !t["edge_list"].is_null()) {
        c.edge_list = as_string(t["edge_list"], "topology.edge_list");
      }
    }
    if (j.contains("k")) c.k = as_u32(j["k"], "k");
    if (j.contains("placement")) {
      c.placement = as_list<TokenPlacement>(j["placement"], "placement", [](const json& p, const std::string& w) {
        check_keys(p, {"node", "token"}, w);
        if (!p.contains("node") || !p.contains("token")) throw ConfigError(w + ": needs node and token");
        return TokenPlacement{as_u32(p["node"], w + ".node"), as_u32(p["token"], w + ".token")};
      });
    }
    if (j.contains("hash_mode")) c.hash_mode = parse_hash_mode(as_string(j["hash_mode"], "hash_mode"));
    if (j.contains("sync")) {
      const auto& s = j["sync"];
      check_keys(s, {"algorithm", "delivery", "tokens_per_connection", "round_cap"}, "sync");
      if (s.contains("algorithm")) c.algorithm = parse_sync_algorithm(as_string(s["algorithm"], "sync.algorithm"));
      if (s.contains("delivery")) c.delivery = parse_delivery_policy(as_string(s["delivery"], "sync.delivery"));
      if (s.contains("tokens_per_connection")) {
        c.tokens_per_connection = as_u32(s["tokens_per_connection"], "sync.tokens_per_connection");
      }
      if (s.contains("round_cap")) c.round_cap = as_uint(s["round_cap"], "sync.round_cap");
    }
    if (j.contains("async")) {
      const auto& a = j["async"];
      check_keys(a, {"delta", "delay", "byzantine", "crashes", "time_cap", "log_timeline"}, "async");
      if (a.contains("delta")) {
        const auto& d = a["delta"];
        check_keys(d, {"update", "old", "connect", "comm"}, "async.delta");
        if (d.contains("update")) c.delta.update = as_double(d["update"], "async.delta.update");
        if (d.contains("old")) c.delta.old = as_double(d["old"], "async.delta.old");
        if (d.contains("connect")) c.delta.connect = as_double(d["connect"], "async.delta.connect");
        if (d.contains("comm")) c.delta.comm = as_double(d["comm"], "async.delta.comm");
      }
      if (a.contains("delay")) {
        const auto& d = a["delay"];
        check_keys(d, {"mode", "fast_fraction"}, "async.delay");
        if (d.contains("mode")) c.delay.mode = parse_delay_mode(as_string(d["mode"], "async.delay.mode"));
        if (d.contains("fast_fraction")) {
          c.delay.fast_fraction = as_double(d["fast_fraction"], "async.delay.fast_fraction");
        }
      }
      if (a.contains("byzantine")) c.byzantine = as_double(a["byzantine"], "async.byzantine");
      if (a.contains("crashes")) {
        c.crashes = as_list<Crash>(a["crashes"], "async.crashes", [](const json& x, const std::string& w) {
          check_keys(x, {"node", "time"}, w);
          if (!x.contains("node") || !x.contains("time")) throw ConfigError(w + ": needs node and time");
          return Crash{as_u32(x["node"], w + ".node"), as_double(x["time"], w + ".time")};
        });
      }
      if (a.contains("time_cap")) c.time_cap = as_double(a["time_cap"], "async.time_cap");
      if (a.contains("log_timeline")) c.log_timeline = as_bool(a["log_timeline"], "async.log_timeline");
    }
    if (j.contains("synced")) {
      const auto& s = j["synced"];
      check_keys(s, {"rounds", "algorithm", "neighbor_timeout"}, "synced");
      if (s.contains("rounds")) c.rounds = as_uint(s["rounds"], "synced.rounds");
      if (s.contains("algorithm")) {
        const auto name = as_string(s["algorithm"], "synced.algorithm");
        if (name == "gossip") {
          c.synced_algorithm = SyncedAlgorithm::gossip;
        } else if (name == "trivial") {
          c.synced_algorithm = SyncedAlgorithm::trivial;
        } else {
          throw ConfigError("synced.algorithm: unknown algorithm '" + name + "'");
        }
      }
      if (s.contains("neighbor_timeout") && !s["neighbor_timeout"].is_null()) {
        c.neighbor_timeout = as_double(s["neighbor_timeout"], "synced.neighbor_timeout");
      }
    }
    if (j.contains("seeds")) {
      const auto& s = j["seeds"];
      if (s.is_string()) {
        c.seeds = parse_seed_list(s.get<std::string>());
      } else if (s.is_object()) {
        check_keys(s, {"from", "count"}, "seeds");
        const auto from = s.contains("from") ? as_uint(s["from"], "seeds.from") : 0;
        const auto count = s.contains("count") ? as_uint(s["count"], "seeds.count") : 1;
        c.seeds.clear();
        for (std::uint64_t i = 0; i < count; ++i) c.seeds.push_back(from + i);
      } else {
        c.seeds = as_list<std::uint64_t>(s, "seeds", [](const json& x, const std::string& w) { return as_uint(x, w); });
      }
    }
    if (j.contains("threads")) c.threads = as_u32(j["threads"], "threads");
    if (j.contains("output")) {
      const auto& o = j["output"];
      check_keys(o, {"log", "summary"}, "output");
      if (o.contains("log") && !o["log"].is_null()) c.log_path = as_string(o["log"], "output.log");
      if (o.contains("summary") && !o["summary"].is_null()) {
        c.summary_path = as_string(o["summary"], "output.summary");
      }
    }
    if (j.contains("sweep")) {
      const auto& s = j["sweep"];
      check_keys(s, {"topologies", "n", "k", "byzantine"}, "sweep");
      if (s.contains("topologies")) {
        c.sweep_topologies = as_list<TopologyKind>(s["topologies"], "sweep.topologies", as_kind);
      }
      if (s.contains("n")) c.sweep_n = as_list<std::uint32_t>(s["n"], "sweep.n", as_u32);
      if (s.contains("k")) c.sweep_k = as_list<std::uint32_t>(s["k"], "sweep.k", as_u32);
      if (s.contains("byzantine")) {
        c.sweep_byzantine = as_list<double>(s["byzantine"], "sweep.byzantine", as_double);
      }
    }
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  validate(c);
  return c;
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["model"] = to_string(c.model);
  j["topology"] = {{"kind", to_string(c.topology.kind)},
                   {"n", c.topology.n},
                   {"seed", c.topology.seed},
                   {"degree", c.topology.degree},
                   {"p", c.topology.p},
                   {"edge_list", c.edge_list ? json(*c.edge_list) : json(nullptr)}};
  j["k"] = c.k;
  j["placement"] = json::array();
  for (const auto& p : c.placement) j["placement"].push_back({{"node", p.node}, {"token", p.token}});
  j["hash_mode"] = to_string(c.hash_mode);
  j["sync"] = {{"algorithm", to_string(c.algorithm)},
               {"delivery", to_string(c.delivery)},
               {"tokens_per_connection", c.tokens_per_connection},
               {"round_cap", c.round_cap}};
  json crashes = json::array();
  for (const auto& x : c.crashes) crashes.push_back({{"node", x.node}, {"time", x.time}});
  j["async"] = {{"delta",
                 {{"update", c.delta.update},
                  {"old", c.delta.old},
                  {"connect", c.delta.connect},
                  {"comm", c.delta.comm}}},
                {"delay", {{"mode", to_string(c.delay.mode)}, {"fast_fraction", c.delay.fast_fraction}}},
                {"byzantine", c.byzantine},
                {"crashes", crashes},
                {"time_cap", c.time_cap},
                {"log_timeline", c.log_timeline}};
  j["synced"] = {{"rounds", c.rounds},
                 {"algorithm", c.synced_algorithm == SyncedAlgorithm::gossip ? "gossip" : "trivial"},
                 {"neighbor_timeout", c.neighbor_timeout ? json(*c.neighbor_timeout) : json(nullptr)}};
  j["seeds"] = c.seeds;
  j["threads"] = c.threads;
  j["output"] = {{"log", c.log_path ? json(*c.log_path) : json(nullptr)},
                 {"summary", c.summary_path ? json(*c.summary_path) : json(nullptr)}};
  json kinds = json::array();
  for (auto k : c.sweep_topologies) kinds.push_back(to_string(k));
  j["sweep"] = {{"topologies", kinds}, {"n", c.sweep_n}, {"k", c.sweep_k}, {"byzantine", c.sweep_byzantine}};
  return j;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(s);
  std::string part;
  auto number = [&](const std::string& x) -> std::uint64_t {
    if (x.empty() || !std::all_of(x.begin(), x.end(), [](unsigned char ch) { return std::isdigit(ch); })) {
      throw ConfigError("bad seed list '" + s + "'");
    }
    return std::stoull(x);
  };
  while (std::getline(ss, part, ',')) {
    const auto dash = part.find('-');
    if (dash == std::string::npos) {
      out.push_back(number(part));
      continue;
    }
    const auto lo = number(part.substr(0, dash));
    const auto hi = number(part.substr(dash + 1));
    if (hi < lo) throw ConfigError("bad seed range '" + part + "'");
    for (auto x = lo; x <= hi; ++x) out.push_back(x);
  }
  if (out.empty()) throw ConfigError("empty seed list");
  return out;
}

Topology build_topology(const ExperimentConfig& c) {
  if (c.edge_list) {
    std::ifstream in(*c.edge_list);
    if (!in) throw ConfigError("cannot open edge list '" + *c.edge_list + "'");
    return read_edge_list(in);
  }
  return generate(c.topology);
}

namespace {

std::string topology_label(const ExperimentConfig& c) {
  return c.edge_list ? std::string("edge_list") : to_string(c.topology.kind);
}

json run_header(const SummaryRow& row) {
  return {{"type", "run"}, {"seed", row.seed}, {"model", to_string(row.model)},
          {"n", row.n}, {"k", row.k}};
}

RunOutput run_sync_seed(const ExperimentConfig& c, const Topology& topo, std::uint64_t seed) {
  SyncConfig sc{topo};
  sc.k = c.k;
  sc.placement = c.placement;
  sc.tokens_per_connection = c.tokens_per_connection;
  sc.delivery = c.delivery;
  sc.algorithm = c.algorithm;
  sc.hash_mode = c.hash_mode;
  sc.round_cap = c.round_cap;
  sc.seed = seed;
  const auto res = run_sync(sc);

  RunOutput out;
  auto& row = out.row;
  row.seed = seed;
  row.model = Model::sync;
  row.n = res.n;
  row.k = res.k;
  row.completed = res.completed;
  row.rounds = res.rounds_used;
  row.completion_time = static_cast<double>(res.rounds_used);
  row.transfers = res.total_transfers;

  auto head = run_header(row);
  head["phase_length"] = res.phase_length;
  head["initial_counts"] = res.initial_counts;
  json placement = json::array();
  for (const auto& p : res.placement) placement.push_back({p.node, p.token});
  head["placement"] = placement;
  out.log.push_back(head.dump());
  for (const auto& log : res.rounds) {
    json conns = json::array();
    for (const auto& x : log.connections) conns.push_back({x.sender, x.receiver});
    json moved = json::array();
    for (const auto& t : log.transfers) moved.push_back({t.token, t.from, t.to});
    out.log.push_back(json{{"type", "round"},
                           {"seed", seed},
                           {"round", log.round},
                           {"phase", log.phase},
                           {"connections", conns},
                           {"transfers", moved},
                           {"counts", log.counts}}
                          .dump());
  }
  out.log.push_back(json{{"type", "result"},
                         {"seed", seed},
                         {"completed", res.completed},
                         {"rounds", res.rounds_used},
                         {"transfers", res.total_transfers},
                         {"productive_connections", res.productive_connections}}
                        .dump());
  if (!res.completed) {
    out.diagnostics.push_back("seed " + std::to_string(seed) + ": not complete after round cap " +
                              std::to_string(c.round_cap));
  }
  return out;
}

RunOutput run_async_seed(const ExperimentConfig& c, const Topology& topo, std::uint64_t seed) {
  AsyncConfig ac{topo};
  ac.k = c.k;
  ac.placement = c.placement.empty() ? default_placement(c.k) : c.placement;
  ac.delta = c.delta;
  ac.delay = c.delay;
  if (c.byzantine > 0) ac.faults = byzantine_plan(topo, c.byzantine, ac.placement, seed);
  ac.faults.crashes = c.crashes;
  ac.hash_mode = c.hash_mode;
  ac.seed = seed;
  ac.time_cap = c.time_cap;
  ac.record_timeline = c.log_timeline;
  const auto res = run_async(ac);

  RunOutput out;
  auto& row = out.row;
  row.seed = seed;
  row.model = Model::async;
  row.n = topo.size();
  row.k = c.k;
  row.byzantine = c.byzantine;
  row.completed = res.completed;
  row.completion_time = res.completed ? res.completion_time : res.end_time;
  row.transfers = res.transfers;
  row.failed_attempts = res.failed_attempts;
  row.ratio = row.completion_time / (static_cast<double>(row.n) * row.k * c.delta.max());
  row.violations = res.contract_violations.size();
  const bool fixed = c.delay.mode == DelayMode::fixed_max && c.byzantine == 0 && c.crashes.empty();
  const auto gaps = fixed ? check_progress(res, c.delta) : std::vector<std::string>{};
  row.violations += gaps.size();

  auto head = run_header(row);
  head["byzantine"] = ac.faults.byzantine;
  head["max_byzantine_fraction"] = res.max_byzantine_fraction;
  out.log.push_back(head.dump());
  for (const auto& r : res.timeline) {
    out.log.push_back(json{{"type", "event"},
                           {"seed", seed},
                           {"time", r.time},
                           {"kind", to_string(r.kind)},
                           {"node", r.node},
                           {"peer", r.peer},
                           {"value", r.value},
                           {"ref", r.ref},
                           {"success", r.success}}
                          .dump());
  }
  out.log.push_back(json{{"type", "result"},
                         {"seed", seed},
                         {"completed", res.completed},
                         {"stalled", res.stalled},
                         {"completion_time", res.completion_time},
                         {"end_time", res.end_time},
                         {"transfers", res.transfers},
                         {"attempts", res.attempts},
                         {"failed_attempts", res.failed_attempts},
                         {"events", res.events},
                         {"learn_times", res.learn_times},
                         {"contract_violations", res.contract_violations},
                         {"progress_gaps", gaps}}
                        .dump());
  if (!res.completed) {
    out.diagnostics.push_back("seed " + std::to_string(seed) +
                              (res.stalled ? ": stalled before completion" : ": time cap reached"));
  }
  for (const auto& v : res.contract_violations) out.diagnostics.push_back(v);
  for (const auto& g : gaps) out.diagnostics.push_back("seed " + std::to_string(seed) + ": " + g);
  return out;
}

json trace_record_json(const SimTraceRecord& r, std::uint64_t seed) {
  json j{{"type", "trace"}, {"seed", seed}, {"time", r.time}, {"kind", to_string(r.kind)},
         {"node", r.node}, {"round", r.round}};
  if (!r.payload.empty()) j["payload"] = r.payload;
  if (r.kind == SimEventKind::set_adv || r.kind == SimEventKind::reconstruct) {
    j["scanned"] = r.scanned;
    j["done"] = r.done;
  }
  if (r.kind == SimEventKind::connect || r.kind == SimEventKind::accept ||
      r.kind == SimEventKind::reconstruct || r.kind == SimEventKind::missed ||
      r.kind == SimEventKind::timeout) {
    j["peer"] = r.peer;
  }
  if (r.kind == SimEventKind::accept) j["success"] = r.success;
  if (r.kind == SimEventKind::deliver_adv) {
    json ads = json::array();
    for (const auto& [v, p] : r.ads) ads.push_back({v, p});
    j["ads"] = ads;
  }
  return j;
}

RunOutput run_synced_seed(const ExperimentConfig& c, const Topology& topo, std::uint64_t seed) {
  SynchronizerConfig sc{topo};
  sc.delta = c.delta;
  sc.delay = c.delay;
  sc.rounds = c.rounds;
  sc.seed = seed;
  sc.crashes = c.crashes;
  sc.neighbor_timeout = c.neighbor_timeout;

  std::optional<GossipAlgorithm> gossip;
  TrivialAlgorithm trivial;
  MtmAlgorithm* algorithm = &trivial;
  if (c.synced_algorithm == SyncedAlgorithm::gossip) {
    gossip.emplace(topo, c.k, c.placement, seed, c.hash_mode);
    algorithm = &*gossip;
  }
  const auto res = run_synchronized(sc, *algorithm);
  const bool faulty = !c.crashes.empty();
  const auto violations = faulty ? std::vector<TraceViolation>{} : validate_trace(res.trace, topo);
  const auto legality = gossip ? check_synced_gossip(*gossip, topo.size(), c.k, c.placement)
                               : std::vector<std::string>{};
  const auto timing = round_time_report(res.trace, c.delta);

  RunOutput out;
  auto& row = out.row;
  row.seed = seed;
  row.model = Model::synchronized;
  row.n = topo.size();
  row.k = c.k;
  row.completed = res.finished;
  row.rounds = c.rounds;
  row.completion_time = res.end_time;
  row.transfers = gossip ? gossip->transfers().size() : 0;
  row.ratio = timing.ratio;
  row.violations = violations.size() + legality.size() + res.protocol_errors.size();

  auto head = run_header(row);
  head["rounds"] = c.rounds;
  out.log.push_back(head.dump());
  for (const auto& r : res.trace.records) out.log.push_back(trace_record_json(r, seed).dump());
  json vio = json::array();
  for (const auto& v : violations) {
    vio.push_back({{"clause", v.clause}, {"node", v.node}, {"round", v.round}, {"detail", v.detail}});
  }
  out.log.push_back(json{{"type", "result"},
                         {"seed", seed},
                         {"finished", res.finished},
                         {"deadlocked", res.deadlocked},
                         {"end_time", res.end_time},
                         {"time_per_round", timing.time_per_round},
                         {"ratio", timing.ratio},
                         {"reconstructions", res.reconstructions},
                         {"missed", res.missed},
                         {"connections", res.connections},
                         {"gossip_complete", gossip ? json(gossip->complete()) : json(nullptr)},
                         {"violations", vio},
                         {"legality", legality},
                         {"protocol_errors", res.protocol_errors}}
                        .dump());
  if (res.deadlocked) out.diagnostics.push_back("seed " + std::to_string(seed) + ": " + res.diagnostic);
  for (const auto& v : violations) {
    out.diagnostics.push_back("seed " + std::to_string(seed) + ": clause " + std::to_string(v.clause) +
                              " node " + std::to_string(v.node) + " round " + std::to_string(v.round) +
                              ": " + v.detail);
  }
  for (const auto& p : legality) out.diagnostics.push_back("seed " + std::to_string(seed) + ": " + p);
  for (const auto& p : res.protocol_errors) out.diagnostics.push_back("seed " + std::to_string(seed) + ": " + p);
  return out;
}

}  // namespace

RunOutput run_one(const ExperimentConfig& c, const Topology& topo, std::uint64_t seed) {
  RunOutput out;
  switch (c.model) {
    case Model::sync: out = run_sync_seed(c, topo, seed); break;
    case Model::async: out = run_async_seed(c, topo, seed); break;
    case Model::synchronized: out = run_synced_seed(c, topo, seed); break;
  }
  out.row.topology = topology_label(c);
  return out;
}

std::vector<RunOutput> run_seeds(const ExperimentConfig& c) {
  const auto topo = build_topology(c);
  auto seeds = c.seeds;
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
  std::vector<RunOutput> results(seeds.size());
  std::vector<std::string> errors(seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        results[i] = run_one(c, topo, seeds[i]);
      } catch (const std::exception& e) {
        errors[i] = "seed " + std::to_string(seeds[i]) + ": " + e.what();
      }
    }
  };
  const auto workers = std::min<std::size_t>(c.threads, seeds.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw std::runtime_error(e);
  }
  return results;
}

std::string summary_csv_header() {
  return "seed,model,topology,n,k,byzantine,completed,rounds,completion_time,transfers,"
         "failed_attempts,ratio,violations";
}

std::string summary_csv_line(const SummaryRow& r) {
  std::ostringstream os;
  os.precision(10);
  os << r.seed << ',' << to_string(r.model) << ',' << r.topology << ',' << r.n << ',' << r.k << ','
     << r.byzantine << ',' << (r.completed ? 1 : 0) << ',' << r.rounds << ',' << r.completion_time
     << ',' << r.transfers << ',' << r.failed_attempts << ',' << r.ratio << ',' << r.violations;
  return os.str();
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto m = values.size() / 2;
  return values.size() % 2 ? values[m] : (values[m - 1] + values[m]) / 2.0;
}

namespace {

struct Overrides {
  std::string config;
  std::optional<std::string> topology;
  std::optional<std::uint32_t> n;
  std::optional<std::uint32_t> k;
  std::optional<std::uint64_t> topo_seed;
  std::optional<std::uint32_t> degree;
  std::optional<double> p;
  std::optional<std::string> edge_list;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> seeds;
  std::optional<std::uint32_t> threads;
  std::optional<std::string> log;
  std::optional<std::string> summary;
  std::optional<std::string> hash_mode;
  // sync
  std::optional<std::string> algorithm;
  std::optional<std::string> delivery;
  std::optional<std::uint32_t> tokens_per_connection;
  std::optional<std::uint64_t> round_cap;
  // async / synced
  std::optional<std::string> delay_mode;
  std::optional<double> delta_update;
  std::optional<double> delta_old;
  std::optional<double> delta_connect;
  std::optional<double> delta_comm;
  std::optional<double> byzantine;
  std::optional<double> time_cap;
  bool timeline = false;
  std::optional<std::uint64_t> rounds;
  std::optional<std::string> synced_algorithm;
  // sweep
  std::optional<std::string> model;
  std::optional<std::string> sweep_topologies;
  std::optional<std::string> sweep_n;
  std::optional<std::string> sweep_k;
  std::optional<std::string> sweep_b;
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "JSON config file");
  app->add_option("--topology,--kind", o.topology, "topology kind");
  app->add_option("--n", o.n, "number of nodes");
  app->add_option("--k", o.k, "number of tokens");
  app->add_option("--topology-seed", o.topo_seed, "seed for random topologies");
  app->add_option("--degree", o.degree, "degree for random_regular");
  app->add_option("--p", o.p, "edge probability for erdos_renyi");
  app->add_option("--edge-list", o.edge_list, "read the topology from an edge-list file");
  app->add_option("--seed", o.seed, "single run seed");
  app->add_option("--seeds", o.seeds, "seed list such as 0-29 or 1,2,5");
  app->add_option("--threads", o.threads, "worker threads");
  app->add_option("--log", o.log, "JSON-lines log path");
  app->add_option("--summary", o.summary, "CSV summary path");
  app->add_option("--hash-mode", o.hash_mode, "digest or oracle");
}

void add_delta(CLI::App* app, Overrides& o) {
  app->add_option("--delay-mode", o.delay_mode, "fixed_max, uniform or adversarial");
  app->add_option("--delta-update", o.delta_update);
  app->add_option("--delta-old", o.delta_old);
  app->add_option("--delta-connect", o.delta_connect);
  app->add_option("--delta-comm", o.delta_comm);
}

template <class T>
std::vector<T> split_list(const std::string& s, T (*conv)(const std::string&)) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(conv(part));
  return out;
}

std::uint32_t to_u32(const std::string& s) {
  try {
    std::size_t used = 0;
    const auto v = std::stoul(s, &used);
    if (used != s.size()) throw ConfigError("bad integer '" + s + "'");
    return static_cast<std::uint32_t>(v);
  } catch (const std::logic_error&) {
    throw ConfigError("bad integer '" + s + "'");
  }
}

double to_dbl(const std::string& s) {
  try {
    std::size_t used = 0;
    const auto v = std::stod(s, &used);
    if (used != s.size()) throw ConfigError("bad number '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw ConfigError("bad number '" + s + "'");
  }
}

TopologyKind to_kind(const std::string& s) {
  try {
    return parse_topology_kind(s);
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
}

ExperimentConfig resolve(const Overrides& o, std::optional<Model> model) {
  json j = o.config.empty() ? json::object() : to_json(load_config(o.config));
  if (model) j["model"] = to_string(*model);
  if (o.model) j["model"] = *o.model;
  if (!j.contains("topology")) j["topology"] = json::object();
  if (o.topology) j["topology"]["kind"] = *o.topology;
  if (o.n) j["topology"]["n"] = *o.n;
  if (o.topo_seed) j["topology"]["seed"] = *o.topo_seed;
  if (o.degree) j["topology"]["degree"] = *o.degree;
  if (o.p) j["topology"]["p"] = *o.p;
  if (o.edge_list) j["topology"]["edge_list"] = *o.edge_list;
  if (o.k) j["k"] = *o.k;
  if (o.seed) j["seeds"] = json::array({*o.seed});
  if (o.seeds) j["seeds"] = *o.seeds;
  if (o.threads) j["threads"] = *o.threads;
  if (o.hash_mode) j["hash_mode"] = *o.hash_mode;
  if (!j.contains("output")) j["output"] = json::object();
  if (o.log) j["output"]["log"] = *o.log;
  if (o.summary) j["output"]["summary"] = *o.summary;
  auto section = [&](const char* name) -> json& {
    if (!j.contains(name)) j[name] = json::object();
    return j[name];
  };
  if (o.algorithm) section("sync")["algorithm"] = *o.algorithm;
  if (o.delivery) section("sync")["delivery"] = *o.delivery;
  if (o.tokens_per_connection) section("sync")["tokens_per_connection"] = *o.tokens_per_connection;
  if (o.round_cap) section("sync")["round_cap"] = *o.round_cap;
  auto& a = section("async");
  if (o.delay_mode) a["delay"]["mode"] = *o.delay_mode;
  if (o.delta_update) a["delta"]["update"] = *o.delta_update;
  if (o.delta_old) a["delta"]["old"] = *o.delta_old;
  if (o.delta_connect) a["delta"]["connect"] = *o.delta_connect;
  if (o.delta_comm) a["delta"]["comm"] = *o.delta_comm;
  if (o.byzantine) a["byzantine"] = *o.byzantine;
  if (o.time_cap) a["time_cap"] = *o.time_cap;
  if (o.timeline) a["log_timeline"] = true;
  if (o.rounds) section("synced")["rounds"] = *o.rounds;
  if (o.synced_algorithm) section("synced")["algorithm"] = *o.synced_algorithm;
  if (o.sweep_topologies) {
    json kinds = json::array();
    for (auto k : split_list<TopologyKind>(*o.sweep_topologies, to_kind)) kinds.push_back(to_string(k));
    section("sweep")["topologies"] = kinds;
  }
  if (o.sweep_n) section("sweep")["n"] = split_list<std::uint32_t>(*o.sweep_n, to_u32);
  if (o.sweep_k) section("sweep")["k"] = split_list<std::uint32_t>(*o.sweep_k, to_u32);
  if (o.sweep_b) section("sweep")["byzantine"] = split_list<double>(*o.sweep_b, to_dbl);
  return parse_config(j);
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path + "'");
  f << contents;
}

int run_command(const ExperimentConfig& c, std::ostream& out, std::ostream& err) {
  const auto results = run_seeds(c);
  std::ostringstream log;
  log << json{{"type", "header"}, {"config", to_json(c)}}.dump() << '\n';
  std::ostringstream csv;
  csv << summary_csv_header() << '\n';
  int status = 0;
  for (const auto& r : results) {
    for (const auto& line : r.log) log << line << '\n';
    csv << summary_csv_line(r.row) << '\n';
    for (const auto& d : r.diagnostics) err << d << '\n';
    if (!r.row.completed || r.row.violations) status = 1;
  }
  if (c.log_path) write_file(*c.log_path, log.str());
  if (c.summary_path) write_file(*c.summary_path, csv.str());
  out << csv.str();
  return status;
}

int sweep_command(ExperimentConfig base, std::ostream& out, std::ostream& err) {
  const auto kinds = base.sweep_topologies.empty() ? std::vector<TopologyKind>{base.topology.kind}
                                                   : base.sweep_topologies;
  const auto ns = base.sweep_n.empty() ? std::vector<std::uint32_t>{base.topology.n} : base.sweep_n;
  const auto ks = base.sweep_k.empty() ? std::vector<std::uint32_t>{base.k} : base.sweep_k;
  const auto bs = base.sweep_byzantine.empty() ? std::vector<double>{base.byzantine} : base.sweep_byzantine;

  std::ostringstream log;
  log << json{{"type", "header"}, {"config", to_json(base)}}.dump() << '\n';
  std::ostringstream csv;
  csv << summary_csv_header() << '\n';
  std::ostringstream agg;
  agg.precision(10);
  agg << "model,topology,n,k,byzantine,runs,completed,median_rounds,median_time,median_ratio\n";
  int status = 0;
  for (auto kind : kinds) {
    for (auto n : ns) {
      for (auto k : ks) {
        if (k > n) continue;
        for (auto b : bs) {
          auto c = base;
          c.topology.kind = kind;
          c.topology.n = n;
          c.k = k;
          c.byzantine = b;
          c.edge_list.reset();
          const auto results = run_seeds(c);
          std::vector<double> rounds, times, ratios;
          std::uint64_t done = 0;
          for (const auto& r : results) {
            for (const auto& line : r.log) log << line << '\n';
            csv << summary_csv_line(r.row) << '\n';
            for (const auto& d : r.diagnostics) err << d << '\n';
            if (!r.row.completed || r.row.violations) status = 1;
            done += r.row.completed ? 1 : 0;
            rounds.push_back(static_cast<double>(r.row.rounds));
            times.push_back(r.row.completion_time);
            ratios.push_back(r.row.ratio);
          }
          agg << to_string(c.model) << ',' << to_string(kind) << ',' << n << ',' << k << ',' << b
              << ',' << results.size() << ',' << done << ',' << median(rounds) << ','
              << median(times) << ',' << median(ratios) << '\n';
        }
      }
    }
  }
  if (base.log_path) write_file(*base.log_path, log.str());
  if (base.summary_path) write_file(*base.summary_path, csv.str());
  out << agg.str();
  return status;
}

int topo_command(const Overrides& o, bool analyze, const std::string& out_path, std::ostream& out) {
  auto c = resolve(o, std::nullopt);
  const auto topo = build_topology(c);
  out << "topology " << topology_label(c) << " n " << topo.size() << " edges " << topo.edge_count()
      << " max_degree " << topo.max_degree() << " degree_bound " << topo.degree_bound() << '\n';
  if (!out_path.empty()) {
    std::ofstream f(out_path);
    if (!f) throw ConfigError("cannot write '" + out_path + "'");
    write_edge_list(f, topo);
  }
  if (!analyze) return 0;
  if (topo.size() > kExhaustiveLimit) {
    throw UnsupportedError("exact analysis is limited to n <= " + std::to_string(kExhaustiveLimit));
  }
  const auto report = check_matching_lemma(topo);
  out << "alpha = " << format_rational(report.alpha) << '\n';
  out << "gamma = " << format_rational(report.gamma) << '\n';
  out << "alpha/4 = " << format_rational(report.alpha / 4) << '\n';
  out << "subsets checked " << report.subsets_checked << '\n';
  out << "matching lemma " << (report.passed() ? "holds" : "VIOLATED") << '\n';
  return report.passed() ? 0 : 1;
}

std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::vector<json> out;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error&) {
      throw ConfigError(path + ":" + std::to_string(no) + ": not valid JSON");
    }
  }
  if (out.empty() || out.front().value("type", "") != "header") {
    throw ConfigError(path + ": missing header line");
  }
  return out;
}

int bands_command(const std::string& input, std::ostream& out) {
  const auto lines = read_jsonl(input);
  std::map<std::uint64_t, SpreadHistory> runs;
  std::map<std::uint64_t, std::vector<std::vector<std::pair<NodeId, NodeId>>>> pairs;
  for (const auto& j : lines) {
    const auto type = j.value("type", "");
    if (type == "run") {
      if (j.value("model", "") != "sync") throw ConfigError("bands needs a run-sync log");
      auto& h = runs[j["seed"].get<std::uint64_t>()];
      h.n = j["n"];
      h.k = j["k"];
      h.phase_length = j["phase_length"];
      h.initial_counts = j["initial_counts"].get<std::vector<std::uint32_t>>();
    } else if (type == "round") {
      auto& h = runs.at(j["seed"].get<std::uint64_t>());
      h.counts.push_back(j["counts"].get<std::vector<std::uint32_t>>());
      std::set<std::pair<NodeId, NodeId>> moved;
      for (const auto& t : j["transfers"]) {
        const NodeId a = t[1], b = t[2];
        moved.insert({std::min(a, b), std::max(a, b)});
      }
      std::uint64_t productive = 0;
      for (const auto& c : j["connections"]) {
        const NodeId a = c[0], b = c[1];
        productive += moved.count({std::min(a, b), std::max(a, b)});
      }
      h.productive_connections.push_back(productive);
    }
  }
  if (runs.empty()) throw ConfigError(input + ": no sync runs found");
  int status = 0;
  out << "seed,phases,upgrades,fills,terminals,upgrade_bound,within_bound,table_ok\n";
  for (const auto& [seed, h] : runs) {
    const auto report = classify_phases(h);
    const auto audit = audit_band_table(h);
    out << seed << ',' << report.phases.size() << ',' << report.upgrades << ',' << report.fills << ','
        << report.terminals << ',' << report.upgrade_bound << ',' << (report.within_bound() ? 1 : 0)
        << ',' << (audit.ok() ? 1 : 0) << '\n';
    if (!report.within_bound() || !audit.ok()) status = 1;
  }
  return status;
}

int validate_command(const std::string& input, std::ostream& out) {
  const auto lines = read_jsonl(input);
  const auto config = parse_config(lines.front()["config"]);
  const auto topo = build_topology(config);
  std::map<std::uint64_t, SimTrace> traces;
  for (const auto& j : lines) {
    const auto type = j.value("type", "");
    if (type == "run") {
      if (j.value("model", "") != "synchronized") throw ConfigError("validate needs a run-synced log");
      auto& t = traces[j["seed"].get<std::uint64_t>()];
      t.n = j["n"];
      t.rounds = j["rounds"];
    } else if (type == "trace") {
      auto& t = traces.at(j["seed"].get<std::uint64_t>());
      SimTraceRecord r;
      r.time = j["time"];
      r.seq = t.records.size();
      r.kind = parse_sim_event_kind(j["kind"]);
      r.node = j["node"];
      r.round = j["round"];
      if (j.contains("payload")) r.payload = j["payload"].get<AdvPayload>();
      r.scanned = j.value("scanned", false);
      r.done = j.value("done", false);
      r.peer = j.value("peer", 0U);
      r.success = j.value("success", false);
      if (j.contains("ads")) {
        for (const auto& a : j["ads"]) r.ads[a[0].get<NodeId>()] = a[1].get<AdvPayload>();
      }
      t.records.push_back(std::move(r));
    }
  }
  if (traces.empty()) throw ConfigError(input + ": no synchronized runs found");
  int status = 0;
  for (const auto& [seed, trace] : traces) {
    const auto v = validate_trace(trace, topo);
    out << "seed " << seed << ": " << v.size() << " violations\n";
    for (const auto& x : v) {
      out << "  clause " << x.clause << " node " << x.node << " round " << x.round << ": " << x.detail
          << '\n';
    }
    if (!v.empty()) status = 1;
  }
  return status;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Random spread gossip experiments"};
  app.require_subcommand(1);
  Overrides o;

  auto* topo = app.add_subcommand("topo", "generate or analyze a topology");
  add_common(topo, o);
  bool analyze = false;
  std::string topo_out;
  topo->add_flag("--analyze", analyze, "compute exact expansion and check the matching lemma");
  topo->add_option("--out", topo_out, "write the edge list here");

  auto* sync = app.add_subcommand("run-sync", "synchronous random spread gossip");
  add_common(sync, o);
  sync->add_option("--algorithm", o.algorithm, "random_spread or coin_flip_baseline");
  sync->add_option("--delivery", o.delivery, "all, adversarial_one or random_one");
  sync->add_option("--tokens-per-connection", o.tokens_per_connection);
  sync->add_option("--round-cap", o.round_cap);

  auto* async = app.add_subcommand("run-async", "asynchronous random spread gossip");
  add_common(async, o);
  add_delta(async, o);
  async->add_option("--byzantine", o.byzantine, "fraction of byzantine nodes");
  async->add_option("--time-cap", o.time_cap);
  async->add_flag("--timeline", o.timeline, "log every timeline record");

  auto* synced = app.add_subcommand("run-synced", "synchronous gossip over the synchronizer");
  add_common(synced, o);
  add_delta(synced, o);
  synced->add_option("--rounds", o.rounds, "simulated rounds");
  synced->add_option("--algorithm", o.synced_algorithm, "gossip or trivial");

  auto* sweep = app.add_subcommand("sweep", "grid of runs with median summaries");
  add_common(sweep, o);
  add_delta(sweep, o);
  sweep->add_option("--model", o.model, "sync, async or synchronized");
  sweep->add_option("--topologies", o.sweep_topologies, "comma-separated kinds");
  sweep->add_option("--ns", o.sweep_n, "comma-separated node counts");
  sweep->add_option("--ks", o.sweep_k, "comma-separated token counts");
  sweep->add_option("--bs", o.sweep_b, "comma-separated byzantine fractions");
  sweep->add_option("--byzantine", o.byzantine);
  sweep->add_option("--rounds", o.rounds);
  sweep->add_option("--round-cap", o.round_cap);

  std::string input;
  auto* bands = app.add_subcommand("bands", "size band and phase report from a run-sync log");
  bands->add_option("input", input, "run-sync JSON-lines log")->required();
  std::string trace_input;
  auto* validate_cmd = app.add_subcommand("validate", "check a run-synced log against the model guarantees");
  validate_cmd->add_option("input", trace_input, "run-synced JSON-lines log")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (topo->parsed()) return topo_command(o, analyze, topo_out, out);
    if (sync->parsed()) return run_command(resolve(o, Model::sync), out, err);
    if (async->parsed()) return run_command(resolve(o, Model::async), out, err);
    if (synced->parsed()) return run_command(resolve(o, Model::synchronized), out, err);
    if (sweep->parsed()) return sweep_command(resolve(o, std::nullopt), out, err);
    if (bands->parsed()) return bands_command(input, out);
    if (validate_cmd->parsed()) return validate_command(trace_input, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

}  // namespace mtmgossip
