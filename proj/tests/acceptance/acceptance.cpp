// Acceptance checks. Prints one PASS/FAIL line per criterion.
//
//   acceptance [--only 1,4] [--expect-fail 5]
//
// Exit status is 0 when the set of failing criteria equals the expected set.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mtmgossip/amtm.hpp"
#include "mtmgossip/analysis.hpp"
#include "mtmgossip/harness.hpp"
#include "mtmgossip/synchronizer.hpp"
#include "mtmgossip/topology.hpp"
#include "oracles.hpp"
#include "trace_corruption.hpp"

using namespace mtmgossip;

namespace {

// Envelope constant for T <= C n k delta_max, fixed from the calibration run
// on the smallest instance (max observed ratio 0.583, rounded up).
constexpr double kPinnedEnvelope = 1.0;
constexpr double kEnvelopeCeiling = 10.0;
// Synchronizer time per round over t_hat.
constexpr double kPinnedRoundFactor = 8.0;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;
  void note(const std::string& s) { notes.push_back(s); }
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("failed: " + what);
    }
  }
};

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(4);
  s << x;
  return s.str();
}

Topology random_connected(std::uint32_t n, Rng& rng) {
  std::vector<Edge> edges;
  std::set<Edge> have;
  for (NodeId v = 1; v < n; ++v) {
    const auto u = static_cast<NodeId>(rng.below(v));
    edges.emplace_back(u, v);
    have.insert({u, v});
  }
  const double p = rng.unit() * 0.5;
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = u + 1; v < n; ++v)
      if (!have.count({u, v}) && rng.unit() < p) edges.emplace_back(u, v);
  return Topology(n, edges);
}

Outcome matching_lemma() {
  Outcome o;
  std::vector<Topology> graphs;
  for (auto kind : {TopologyKind::line, TopologyKind::ring, TopologyKind::clique, TopologyKind::star,
                    TopologyKind::grid, TopologyKind::binary_tree, TopologyKind::barbell,
                    TopologyKind::random_regular, TopologyKind::erdos_renyi}) {
    for (std::uint32_t n = 4; n <= 14; n += 2) {
      TopologySpec spec{kind, n, n};
      spec.degree = 3;
      spec.p = 0.35;
      graphs.push_back(generate(spec));
    }
  }
  const auto suite = graphs.size();
  Rng rng(0xacce97);
  for (int i = 0; i < 200; ++i)
    graphs.push_back(random_connected(static_cast<std::uint32_t>(2 + rng.below(13)), rng));
  std::uint64_t subsets = 0, violations = 0;
  Rational worst(1000);
  for (const auto& g : graphs) {
    const auto rep = check_matching_lemma(g);
    subsets += rep.subsets_checked;
    violations += rep.violations.size();
    worst = std::min(worst, rep.gamma / rep.alpha);
    // Spot-check the exact values against the brute-force oracles.
    const auto [num, den] = oracle::expansion(g);
    o.require(rep.alpha == Rational(num, den), "alpha disagrees with the oracle");
    if (!rep.gamma_witness.empty()) {
      o.require(rep.gamma * static_cast<std::int64_t>(rep.gamma_witness.size()) ==
                    Rational(oracle::cut_matching(g, oracle::mask_of(rep.gamma_witness.members()))),
                "gamma witness disagrees with the oracle");
    }
  }
  o.require(violations == 0, std::to_string(violations) + " violating cuts");
  o.note(std::to_string(suite) + " suite graphs + 200 random, " + std::to_string(subsets) +
         " cuts, min gamma/alpha = " + format_rational(worst));
  return o;
}

Outcome sync_legality() {
  Outcome o;
  std::uint64_t rounds = 0, connections = 0, problems = 0;
  std::uint64_t seed = 0;
  for (auto kind : {TopologyKind::line, TopologyKind::ring, TopologyKind::clique, TopologyKind::star,
                    TopologyKind::grid, TopologyKind::binary_tree, TopologyKind::random_regular,
                    TopologyKind::erdos_renyi, TopologyKind::barbell}) {
    for (std::uint32_t n : {8u, 16u, 32u}) {
      for (auto policy : {DeliveryPolicy::all, DeliveryPolicy::random_one, DeliveryPolicy::adversarial_one}) {
        ++seed;
        TopologySpec spec{kind, n, seed};
        spec.degree = 4;
        spec.p = 0.3;
        SyncConfig cfg{generate(spec)};
        cfg.k = 4;
        cfg.seed = seed;
        cfg.hash_mode = HashMode::oracle;
        cfg.delivery = policy;
        cfg.record_advertisements = true;
        const auto run = run_sync(cfg);
        problems += oracle::replay_sync(cfg.topology, run).size();
        for (const auto& log : run.rounds) {
          ++rounds;
          for (const auto& c : log.connections) {
            ++connections;
            if (log.advertisements[c.sender].hash == log.advertisements[c.receiver].hash) ++problems;
          }
        }
      }
    }
  }
  o.require(rounds >= 1000, "only " + std::to_string(rounds) + " rounds");
  o.require(problems == 0, std::to_string(problems) + " illegal rounds or connections");
  o.note(std::to_string(rounds) + " rounds, " + std::to_string(connections) + " connections checked");
  return o;
}

struct SyncSample {
  std::vector<double> rounds;
  std::vector<SpreadHistory> histories;
};

SyncSample sync_sample(TopologyKind kind, std::uint32_t n, std::uint32_t k, std::uint64_t seeds) {
  SyncSample s;
  const auto topo = generate({kind, n});
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    SyncConfig cfg{topo};
    cfg.k = k;
    cfg.seed = seed;
    const auto run = run_sync(cfg);
    if (!run.completed) throw std::runtime_error("sync run hit the round cap");
    s.rounds.push_back(static_cast<double>(run.rounds_used));
    s.histories.push_back(spread_history(run));
  }
  return s;
}

std::map<std::pair<TopologyKind, std::uint32_t>, SyncSample>& scaling_runs() {
  static std::map<std::pair<TopologyKind, std::uint32_t>, SyncSample> runs;
  if (runs.empty())
    for (auto kind : {TopologyKind::line, TopologyKind::clique})
      for (std::uint32_t n : {16u, 32u, 64u}) runs[{kind, n}] = sync_sample(kind, n, 4, 30);
  return runs;
}

Outcome band_table() {
  Outcome o;
  SizeBandTable t(32, 3);
  std::vector<std::uint32_t> counts{4, 31, 32};
  t.update(counts);
  o.require(t.current_band(0) == 2 && t.current_band(1) == 8 && t.current_band(2) == 9,
            "n=32 examples");
  o.require(t.bit(0, 1) && t.bit(0, 2) && !t.bit(0, 3), "count 4 rows");
  o.require(!t.bit(1, 9), "count 31 row 9");
  for (std::uint32_t c = 0; c <= 32; ++c)
    o.require(SizeBandTable::band_for_count(32, c) == oracle::band(32, c), "threshold arithmetic");

  std::vector<SpreadHistory> runs;
  for (const auto& [key, sample] : scaling_runs())
    runs.insert(runs.end(), sample.histories.begin(), sample.histories.end());
  for (auto kind : {TopologyKind::grid, TopologyKind::ring, TopologyKind::star, TopologyKind::binary_tree})
    for (std::uint32_t k : {1u, 8u}) {
      auto extra = sync_sample(kind, 16, k, 10);
      runs.insert(runs.end(), extra.histories.begin(), extra.histories.end());
    }
  std::uint64_t bad_audit = 0, over = 0, snapshots = 0, max_upgrades = 0;
  for (const auto& h : runs) {
    const auto audit = audit_band_table(h);
    snapshots += audit.snapshots;
    bad_audit += audit.ok() ? 0 : 1;
    const auto rep = classify_phases(h);
    over += rep.within_bound() ? 0 : 1;
    max_upgrades = std::max(max_upgrades, rep.upgrades);
  }
  o.require(bad_audit == 0, std::to_string(bad_audit) + " runs break the table invariants");
  o.require(over == 0, std::to_string(over) + " runs exceed the upgrade bound");
  o.note(std::to_string(runs.size()) + " runs, " + std::to_string(snapshots) +
         " table snapshots, max upgrades " + std::to_string(max_upgrades));
  return o;
}

Outcome expansion_scaling() {
  Outcome o;
  auto& runs = scaling_runs();
  std::map<std::uint32_t, double> ratio;
  for (std::uint32_t n : {16u, 32u, 64u}) {
    const double line = median(runs[{TopologyKind::line, n}].rounds);
    const double clique = median(runs[{TopologyKind::clique, n}].rounds);
    ratio[n] = line / clique;
    o.require(line > clique, "line not slower than clique at n=" + std::to_string(n));
    o.note("n=" + std::to_string(n) + " median rounds line " + fmt(line) + " clique " + fmt(clique) +
           " ratio " + fmt(ratio[n]));
  }
  o.require(ratio[64] >= 1.5 * ratio[16], "ratio growth " + fmt(ratio[64] / ratio[16]) + " < 1.5");
  o.note("ratio(64)/ratio(16) = " + fmt(ratio[64] / ratio[16]));
  return o;
}

AsyncResult async_run(TopologyKind kind, std::uint32_t n, std::uint32_t k, std::uint64_t seed) {
  AsyncConfig c{generate({kind, n})};
  c.k = k;
  c.seed = seed;
  c.record_timeline = false;
  return run_async(c);
}

Outcome convergence_envelope() {
  Outcome o;
  const DeltaBounds delta;
  const double dmax = delta.max();

  double calibrated = 0;
  for (auto kind : {TopologyKind::line, TopologyKind::clique})
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto r = async_run(kind, 4, 1, seed);
      calibrated = std::max(calibrated, r.completion_time / (4 * 1 * dmax));
    }
  o.require(calibrated <= kPinnedEnvelope, "calibration " + fmt(calibrated) + " above the pinned C");
  o.require(kPinnedEnvelope <= kEnvelopeCeiling, "pinned C above 10");

  std::uint64_t runs = 0, outside = 0, incomplete = 0, gap_runs = 0, gaps = 0;
  double worst = 0;
  std::string example;
  for (auto kind : {TopologyKind::line, TopologyKind::clique}) {
    for (std::uint32_t n : {4u, 8u, 16u, 32u}) {
      for (std::uint32_t k : {1u, 2u, 4u, 8u}) {
        if (k > n) continue;
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
          const auto r = async_run(kind, n, k, seed);
          ++runs;
          if (!r.completed) ++incomplete;
          const double ratio = r.completion_time / (n * k * dmax);
          worst = std::max(worst, ratio);
          if (ratio > kPinnedEnvelope) ++outside;
          const auto g = check_progress(r, delta);
          if (!g.empty()) {
            ++gap_runs;
            gaps += g.size();
            if (example.empty())
              example = to_string(kind) + "(" + std::to_string(n) + ") k=" + std::to_string(k) +
                        " seed " + std::to_string(seed) + ": " + g.front();
          }
        }
      }
    }
  }
  o.require(incomplete == 0, std::to_string(incomplete) + " runs incomplete");
  o.require(outside == 0, std::to_string(outside) + " runs outside C n k delta_max");
  o.note("C calibrated " + fmt(calibrated) + ", pinned " + fmt(kPinnedEnvelope) + "; " +
         std::to_string(runs) + " runs, max T/(n k delta_max) = " + fmt(worst));
  o.require(gap_runs == 0, "progress window: " + std::to_string(gap_runs) + " of " +
                               std::to_string(runs) + " runs have " + std::to_string(gaps) +
                               " delta_max windows without a learn event");
  if (!example.empty()) o.note("first gap: " + example);
  return o;
}

Outcome byzantine_slowdown() {
  Outcome o;
  std::map<double, double> med;
  for (double b : {0.0, 0.25, 0.5}) {
    ExperimentConfig c;
    c.model = Model::async;
    c.topology = {TopologyKind::clique, 32, 0};
    c.k = 4;
    c.byzantine = b;
    c.seeds.clear();
    for (std::uint64_t s = 0; s < 100; ++s) c.seeds.push_back(s);
    std::vector<double> times;
    for (const auto& r : run_seeds(c)) {
      o.require(r.row.completed, "incomplete run at b=" + fmt(b));
      times.push_back(r.row.completion_time);
    }
    med[b] = median(times);
  }
  for (double b : {0.25, 0.5}) {
    const double normalized = med[b] / med[0.0] * (1 - b);
    o.require(normalized >= 0.6 && normalized <= 1.8, "b=" + fmt(b) + " normalized " + fmt(normalized));
    o.note("b=" + fmt(b) + " median T " + fmt(med[b]) + " vs " + fmt(med[0.0]) +
           ", (T(b)/T(0))(1-b) = " + fmt(normalized));
  }
  return o;
}

Outcome single_token_scaling() {
  Outcome o;
  std::map<std::uint32_t, double> med;
  for (std::uint32_t n : {16u, 64u, 256u}) {
    std::vector<double> times;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const auto r = async_run(TopologyKind::clique, n, 1, seed);
      o.require(r.completed, "incomplete run");
      times.push_back(r.completion_time);
    }
    med[n] = median(times);
  }
  const double growth = med[256] / med[16];
  o.require(growth <= 8, "T(256)/T(16) = " + fmt(growth));
  o.note("median T: 16 -> " + fmt(med[16]) + ", 64 -> " + fmt(med[64]) + ", 256 -> " + fmt(med[256]) +
         "; T(256)/T(16) = " + fmt(growth));
  return o;
}

Outcome synchronizer_correctness() {
  Outcome o;
  const std::vector<TopologySpec> specs{{TopologyKind::clique, 8},  {TopologyKind::line, 16},
                                        {TopologyKind::grid, 16},   {TopologyKind::ring, 12},
                                        {TopologyKind::star, 10},   {TopologyKind::binary_tree, 32},
                                        {TopologyKind::clique, 32}, {TopologyKind::barbell, 12}};
  const DelayMode modes[] = {DelayMode::fixed_max, DelayMode::uniform, DelayMode::adversarial};
  std::uint64_t violations = 0, legality = 0, errors = 0, reconstructions = 0, injected = 0, exact = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto& spec = specs[seed % specs.size()];
    const auto topo = generate(spec);
    SynchronizerConfig cfg{topo};
    cfg.rounds = 10 + seed % 41;
    cfg.seed = seed;
    cfg.delay.mode = modes[seed % 3];
    GossipAlgorithm gossip(topo, 1 + static_cast<std::uint32_t>(seed % 4), {}, seed);
    const auto out = run_synchronized(cfg, gossip);
    o.require(out.finished, "run did not finish");
    violations += validate_trace(out.trace, topo).size();
    legality += check_synced_gossip(gossip, topo.size(), 1 + static_cast<std::uint32_t>(seed % 4), {}).size();
    errors += out.protocol_errors.size();
    reconstructions += out.reconstructions;

    for (Round r : {Round{2}, cfg.rounds}) {
      for (auto bad : {corrupt::early_end_scan(out.trace, topo, r), corrupt::early_request(out.trace, topo, r)}) {
        if (!bad) continue;
        ++injected;
        const auto v = validate_trace(bad->trace, topo);
        exact += v.size() == 1 && v[0].node == bad->node && v[0].round == bad->round ? 1 : 0;
      }
    }
  }
  o.require(violations == 0, std::to_string(violations) + " Property-1 violations");
  o.require(legality == 0, std::to_string(legality) + " gossip legality problems");
  o.require(errors == 0, std::to_string(errors) + " protocol errors");
  o.require(injected >= 50 && exact == injected,
            std::to_string(exact) + " of " + std::to_string(injected) + " corruptions detected exactly");
  o.note("50 runs, " + std::to_string(reconstructions) + " reconstructed advertisements, " +
         std::to_string(injected) + " injected corruptions all detected exactly");
  return o;
}

Outcome synchronizer_time() {
  Outcome o;
  double worst = 0;
  for (auto kind : {TopologyKind::clique, TopologyKind::line}) {
    const auto topo = generate({kind, 8});
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      SynchronizerConfig cfg{topo};
      cfg.rounds = 50;
      cfg.seed = seed;
      GossipAlgorithm gossip(topo, 2, {}, seed);
      const auto out = run_synchronized(cfg, gossip);
      o.require(out.finished, "run did not finish");
      const auto rep = round_time_report(out.trace, cfg.delta);
      worst = std::max(worst, rep.ratio);
    }
  }
  o.require(worst <= kPinnedRoundFactor, "max (time/r)/t_hat = " + fmt(worst));
  o.note("max (time/r)/t_hat over 100 runs = " + fmt(worst) + " (bound " + fmt(kPinnedRoundFactor) + ")");
  return o;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

Outcome determinism() {
  Outcome o;
  const auto dir = std::filesystem::temp_directory_path() / "mtmgossip_acceptance";
  std::filesystem::create_directories(dir);
  const auto p = [&](const char* name) { return (dir / name).string(); };

  const std::vector<std::vector<std::string>> commands{
      {"topo", "--kind", "erdos_renyi", "--n", "12", "--p", "0.3", "--topology-seed", "5", "--analyze",
       "--out", p("graph.txt")},
      {"run-sync", "--kind", "grid", "--n", "16", "--k", "4", "--seeds", "0-5", "--threads", "3", "--log",
       p("sync.jsonl"), "--summary", p("sync.csv")},
      {"run-async", "--kind", "clique", "--n", "12", "--k", "3", "--seeds", "0-3", "--delay-mode", "uniform",
       "--byzantine", "0.25", "--timeline", "--log", p("async.jsonl"), "--summary", p("async.csv")},
      {"run-synced", "--kind", "line", "--n", "8", "--k", "2", "--rounds", "12", "--seeds", "0-2",
       "--delay-mode", "adversarial", "--log", p("synced.jsonl"), "--summary", p("synced.csv")},
      {"sweep", "--model", "sync", "--topologies", "line,clique", "--ns", "8,16", "--ks", "1,2", "--seeds",
       "0-4", "--threads", "2", "--log", p("sweep.jsonl"), "--summary", p("sweep.csv")},
      {"bands", p("sync.jsonl")},
      {"validate", p("synced.jsonl")},
  };
  const std::vector<std::string> files{"graph.txt", "sync.jsonl", "sync.csv",  "async.jsonl", "async.csv",
                                       "synced.jsonl", "synced.csv", "sweep.jsonl", "sweep.csv"};
  auto run_all = [&] {
    std::vector<std::string> captured;
    for (const auto& args : commands) {
      std::ostringstream out, err;
      const int code = cli_main(args, out, err);
      captured.push_back(args[0] + " exit " + std::to_string(code) + "\n" + out.str() + err.str());
      if (code != 0) o.require(false, args[0] + " exited " + std::to_string(code) + ": " + err.str());
    }
    for (const auto& f : files) captured.push_back(slurp(dir / f));
    return captured;
  };
  const auto first = run_all();
  const auto second = run_all();
  std::uint64_t bytes = 0;
  for (std::size_t i = 0; i < first.size(); ++i) {
    bytes += first[i].size();
    const std::string what = i < commands.size() ? commands[i][0] + " output" : files[i - commands.size()];
    o.require(first[i] == second[i], what + " differs between runs");
    o.require(!first[i].empty(), what + " is empty");
  }
  o.note(std::to_string(commands.size()) + " subcommands, " + std::to_string(files.size()) +
         " files, " + std::to_string(bytes) + " bytes compared");
  return o;
}

std::set<int> parse_ids(const std::string& s) {
  std::set<int> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ','))
    if (!part.empty()) out.insert(std::stoi(part));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only, expect_fail;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if ((a == "--only" || a == "--expect-fail") && i + 1 < argc) {
      (a == "--only" ? only : expect_fail) = parse_ids(argv[++i]);
    } else {
      std::cerr << "usage: acceptance [--only 1,2] [--expect-fail 5]\n";
      return 2;
    }
  }

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"matching lemma on suite and random graphs", matching_lemma},
      {"sync engine legality", sync_legality},
      {"size band table", band_table},
      {"expansion scaling (sync)", expansion_scaling},
      {"aMTM convergence envelope and progress", convergence_envelope},
      {"byzantine slowdown", byzantine_slowdown},
      {"single-token sublinear scaling", single_token_scaling},
      {"synchronizer correctness", synchronizer_correctness},
      {"synchronizer time bound", synchronizer_time},
      {"determinism", determinism},
  };

  std::set<int> failed;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.note(std::string("exception: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) failed.insert(id);
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << criteria[i].first << " ("
              << fmt(secs) << " s)\n";
    for (const auto& n : o.notes) std::cout << "    " << n << '\n';
    std::cout.flush();
  }

  std::set<int> expected;
  for (int id : expect_fail)
    if (only.empty() || only.count(id)) expected.insert(id);
  if (failed == expected) return 0;
  for (int id : failed)
    if (!expected.count(id)) std::cout << "unexpected failure: criterion " << id << '\n';
  for (int id : expected)
    if (!failed.count(id)) std::cout << "expected failure passed: criterion " << id << '\n';
  return 1;
}
