#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mtmgossip/amtm.hpp"
#include "mtmgossip/sync_engine.hpp"
#include "mtmgossip/synchronizer.hpp"
#include "mtmgossip/topology.hpp"

namespace mtmgossip {

enum class Model { sync, async, synchronized };
std::string to_string(Model m);
Model parse_model(const std::string& s);

enum class SyncedAlgorithm { gossip, trivial };

/// Everything needed to reproduce an experiment. See README for the JSON schema.
struct ExperimentConfig {
  Model model = Model::sync;
  TopologySpec topology{TopologyKind::clique, 8, 0};
  std::optional<std::string> edge_list;
  std::uint32_t k = 1;
  std::vector<TokenPlacement> placement;

  SyncAlgorithm algorithm = SyncAlgorithm::random_spread;
  DeliveryPolicy delivery = DeliveryPolicy::all;
  HashMode hash_mode = HashMode::digest;
  std::uint32_t tokens_per_connection = 1;
  std::uint64_t round_cap = 100000;

  DeltaBounds delta;
  DelayPolicy delay;
  double byzantine = 0.0;
  std::vector<Crash> crashes;
  double time_cap = 1e6;
  bool log_timeline = false;

  std::uint64_t rounds = 10;
  SyncedAlgorithm synced_algorithm = SyncedAlgorithm::gossip;
  std::optional<double> neighbor_timeout;

  std::vector<std::uint64_t> seeds{0};
  std::uint32_t threads = 1;
  std::optional<std::string> log_path;
  std::optional<std::string> summary_path;

  // Sweep grid; empty lists fall back to the single values above.
  std::vector<TopologyKind> sweep_topologies;
  std::vector<std::uint32_t> sweep_n;
  std::vector<std::uint32_t> sweep_k;
  std::vector<double> sweep_byzantine;
};

/// Throws ConfigError on unknown keys, wrong types, or invalid values.
ExperimentConfig parse_config(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::string& path);

/// "0-29", "1,4,7", or a mix such as "0-3,10".
std::vector<std::uint64_t> parse_seed_list(const std::string& s);

struct SummaryRow {
  std::uint64_t seed = 0;
  Model model = Model::sync;
  std::string topology;
  std::uint32_t n = 0;
  std::uint32_t k = 0;
  double byzantine = 0.0;
  bool completed = false;
  std::uint64_t rounds = 0;
  double completion_time = 0.0;
  std::uint64_t transfers = 0;
  std::uint64_t failed_attempts = 0;
  /// async: time / (n k delta_max); synchronized: time per round / round length.
  double ratio = 0.0;
  std::uint64_t violations = 0;
};

struct RunOutput {
  SummaryRow row;
  /// JSON-lines records for this seed.
  std::vector<std::string> log;
  std::vector<std::string> diagnostics;
};

Topology build_topology(const ExperimentConfig& c);

RunOutput run_one(const ExperimentConfig& c, const Topology& topo, std::uint64_t seed);

/// Runs every seed on c.threads workers; output is ordered by seed.
std::vector<RunOutput> run_seeds(const ExperimentConfig& c);

std::string summary_csv_header();
std::string summary_csv_line(const SummaryRow& row);

double median(std::vector<double> values);

/// Entry point of the command-line tool; args exclude the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mtmgossip
