#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <bit>
#include <sstream>

#include "mtmgossip/amtm.hpp"
#include "mtmgossip/analysis.hpp"
#include "mtmgossip/errors.hpp"
#include "mtmgossip/harness.hpp"
#include "mtmgossip/synchronizer.hpp"
#include "mtmgossip/sync_engine.hpp"
#include "mtmgossip/topology.hpp"

namespace py = pybind11;
using namespace mtmgossip;

namespace {

py::tuple rational(const Rational& r) { return py::make_tuple(r.numerator(), r.denominator()); }

DeltaBounds deltas(double update, double old, double connect, double comm) {
  DeltaBounds d;
  d.update = update;
  d.old = old;
  d.connect = connect;
  d.comm = comm;
  return d;
}

}  // namespace

PYBIND11_MODULE(_mtmgossip, m) {
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<GenerationError>(m, "GenerationError", PyExc_RuntimeError);

  py::class_<Topology>(m, "Topology")
      .def(py::init<std::uint32_t, const std::vector<Edge>&, std::optional<std::uint32_t>>(),
           py::arg("n"), py::arg("edges"), py::arg("degree_bound") = py::none())
      .def_property_readonly("n", &Topology::size)
      .def_property_readonly("max_degree", &Topology::max_degree)
      .def_property_readonly("degree_bound", &Topology::degree_bound)
      .def("degree", &Topology::degree)
      .def("neighbors", [](const Topology& t, NodeId u) {
        const auto nb = t.neighbors(u);
        return std::vector<NodeId>(nb.begin(), nb.end());
      })
      .def("edges", &Topology::edges);

  m.def("generate",
        [](const std::string& kind, std::uint32_t n, std::uint64_t seed, std::uint32_t degree, double p) {
          return generate({parse_topology_kind(kind), n, seed, degree, p});
        },
        py::arg("kind"), py::arg("n"), py::arg("seed") = 0, py::arg("degree") = 3, py::arg("p") = 0.5);

  m.def("vertex_expansion", [](const Topology& t) { return rational(vertex_expansion(t)); });

  m.def("check_matching_lemma", [](const Topology& t) {
    const auto r = check_matching_lemma(t);
    py::dict d;
    d["alpha"] = rational(r.alpha);
    d["gamma"] = rational(r.gamma);
    d["subsets_checked"] = r.subsets_checked;
    d["violations"] = r.violations.size();
    return d;
  });

  m.def("band_for_count", &SizeBandTable::band_for_count, py::arg("n"), py::arg("count"));

  m.def("run_sync",
        [](const Topology& t, std::uint32_t k, std::uint64_t seed, const std::string& algorithm,
           const std::string& delivery, std::uint64_t round_cap) {
          SyncConfig c{t};
          c.k = k;
          c.seed = seed;
          c.algorithm = parse_sync_algorithm(algorithm);
          c.delivery = parse_delivery_policy(delivery);
          c.round_cap = round_cap;
          const auto res = run_sync(c);
          py::dict d;
          d["completed"] = res.completed;
          d["rounds"] = res.rounds_used;
          d["phase_length"] = res.phase_length;
          d["transfers"] = res.total_transfers;
          // Band analysis only applies when n is a power of two.
          if (res.n >= 4 && std::has_single_bit(res.n)) {
            const auto phases = classify_phases(spread_history(res));
            d["upgrades"] = phases.upgrades;
            d["upgrade_bound"] = phases.upgrade_bound;
          } else {
            d["upgrades"] = py::none();
            d["upgrade_bound"] = py::none();
          }
          std::vector<std::vector<std::uint32_t>> counts;
          for (const auto& r : res.rounds) counts.push_back(r.counts);
          d["counts"] = counts;
          return d;
        },
        py::arg("topology"), py::arg("k"), py::arg("seed") = 0, py::arg("algorithm") = "random_spread",
        py::arg("delivery") = "all", py::arg("round_cap") = 100000);

  m.def("run_async",
        [](const Topology& t, std::uint32_t k, std::uint64_t seed, const std::string& delay_mode,
           double byzantine, double update, double old, double connect, double comm) {
          AsyncConfig c{t};
          c.k = k;
          c.seed = seed;
          c.placement = default_placement(k);
          c.delta = deltas(update, old, connect, comm);
          c.delay.mode = parse_delay_mode(delay_mode);
          if (byzantine > 0) c.faults = byzantine_plan(t, byzantine, c.placement, seed);
          c.record_timeline = false;
          const auto res = run_async(c);
          py::dict d;
          d["completed"] = res.completed;
          d["completion_time"] = res.completion_time;
          d["transfers"] = res.transfers;
          d["attempts"] = res.attempts;
          d["failed_attempts"] = res.failed_attempts;
          d["contract_violations"] = res.contract_violations.size();
          d["progress_gaps"] = check_progress(res, c.delta).size();
          return d;
        },
        py::arg("topology"), py::arg("k"), py::arg("seed") = 0, py::arg("delay_mode") = "fixed_max",
        py::arg("byzantine") = 0.0, py::arg("delta_update") = 1.0, py::arg("delta_old") = 2.0,
        py::arg("delta_connect") = 1.0, py::arg("delta_comm") = 1.0);

  m.def("run_synchronized",
        [](const Topology& t, std::uint32_t k, std::uint64_t rounds, std::uint64_t seed,
           const std::string& delay_mode) {
          SynchronizerConfig c{t};
          c.rounds = rounds;
          c.seed = seed;
          c.delay.mode = parse_delay_mode(delay_mode);
          GossipAlgorithm gossip(t, k, {}, seed);
          const auto res = run_synchronized(c, gossip);
          const auto timing = round_time_report(res.trace, c.delta);
          py::dict d;
          d["finished"] = res.finished;
          d["violations"] = validate_trace(res.trace, t).size();
          d["legality_problems"] = check_synced_gossip(gossip, t.size(), k, {}).size();
          d["gossip_complete"] = gossip.complete();
          d["reconstructions"] = res.reconstructions;
          d["time_per_round"] = timing.time_per_round;
          d["ratio"] = timing.ratio;
          return d;
        },
        py::arg("topology"), py::arg("k"), py::arg("rounds"), py::arg("seed") = 0,
        py::arg("delay_mode") = "fixed_max");

  m.def("cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli_main(args, out, err);
    return py::make_tuple(code, out.str(), err.str());
  });
}
