#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mtmgossip/matching.hpp"
#include "mtmgossip/rng.hpp"
#include "mtmgossip/sync_engine.hpp"
#include "mtmgossip/topology.hpp"

namespace mtmgossip {

/// Per-token threshold bits. Rows 1..L are growth rows (at least 2^i holders);
/// rows L+1..2L+1 are shrink rows (fewer than n / 2^(i-L) non-holders), with
/// L = log2(n/2). Only powers of two n >= 4 are accepted.
class SizeBandTable {
 public:
  SizeBandTable(std::uint32_t n, std::uint32_t k);

  std::uint32_t n() const { return n_; }
  std::uint32_t tokens() const { return k_; }
  std::uint32_t center() const { return center_; }
  std::uint32_t rows() const { return 2 * center_ + 1; }

  /// Recomputes every column; counts may not decrease between updates.
  void update(std::span<const std::uint32_t> counts);

  /// row is 1-based.
  bool bit(TokenId t, std::uint32_t row) const;
  /// Largest set row for the token, 0 when none.
  std::uint32_t current_band(TokenId t) const;
  const std::vector<std::uint32_t>& counts() const { return counts_; }

  /// Threshold predicate for a single cell.
  static bool row_set(std::uint32_t n, std::uint32_t center, std::uint32_t count,
                      std::uint32_t row);
  /// Band implied by a holder count.
  static std::uint32_t band_for_count(std::uint32_t n, std::uint32_t count);

 private:
  std::uint32_t n_;
  std::uint32_t k_;
  std::uint32_t center_;
  std::vector<std::uint32_t> counts_;
  // bits_[t * rows() + (row - 1)]
  std::vector<bool> bits_;
};

SizeBandTable update_table(SizeBandTable table, std::span<const std::uint32_t> counts);
std::uint32_t current_band(const SizeBandTable& table, TokenId t);

std::uint32_t n_star(std::uint32_t count, std::uint32_t n);
/// Token maximizing n_star, lowest id on ties.
TokenId t_star(std::span<const std::uint32_t> counts, std::uint32_t n);

/// Per-round token counts of a synchronous run, as needed by the phase analysis.
struct SpreadHistory {
  std::uint32_t n = 0;
  std::uint32_t k = 0;
  std::uint32_t phase_length = 1;
  std::vector<std::uint32_t> initial_counts;
  /// counts[r-1] = holder counts at the end of round r.
  std::vector<std::vector<std::uint32_t>> counts;
  std::vector<std::uint64_t> productive_connections;
};

SpreadHistory spread_history(const SyncResult& run);

enum class PhaseKind { upgrade, fill, terminal };
std::string to_string(PhaseKind kind);

struct PhaseRecord {
  std::uint64_t index = 0;
  Round first_round = 0;
  Round last_round = 0;
  TokenId t_star = 0;
  std::uint32_t n_star = 0;
  std::uint32_t band = 0;
  std::uint32_t distance = 0;
  std::uint64_t productive_connections = 0;
  PhaseKind kind = PhaseKind::fill;
  std::optional<bool> successful;
};

/// Threshold for calling a phase successful: at least
/// gamma * alpha * n_star / (log2 n * log2 max_degree) productive connections.
struct SuccessCalibration {
  double gamma = 1.0;
  double alpha = 1.0;
  std::uint32_t max_degree = 2;
};

struct PhaseReport {
  std::vector<PhaseRecord> phases;
  std::uint64_t upgrades = 0;
  std::uint64_t fills = 0;
  std::uint64_t terminals = 0;
  /// upgrades_per_band[b] for bands 0..2L+1.
  std::vector<std::uint64_t> upgrades_per_band;
  /// k * (2L + 1).
  std::uint64_t upgrade_bound = 0;
  bool within_bound() const { return upgrades <= upgrade_bound; }
};

PhaseReport classify_phases(const SpreadHistory& history,
                            std::optional<SuccessCalibration> calibration = std::nullopt);

struct TableAudit {
  bool prefix_ok = true;
  bool monotone_ok = true;
  bool completion_ok = true;
  std::uint64_t snapshots = 0;
  std::vector<std::string> problems;
  bool ok() const { return prefix_ok && monotone_ok && completion_ok; }
};

/// Replays the history through a table and checks the column prefix
/// property, monotonicity, and all-rows-set iff complete at every round.
TableAudit audit_band_table(const SpreadHistory& history);

/// w(v) = sum over edges (u, v) of 1/deg(u), for right vertices v.
std::vector<Rational> degree_weight(const BipartiteGraph& selection);

struct SqrtMatchingStats {
  std::uint32_t m = 0;
  double threshold = 0.0;
  std::uint64_t trials = 0;
  std::uint64_t passes = 0;
  double mean_distinct = 0.0;
  std::uint32_t min_distinct = 0;
  std::uint32_t max_distinct = 0;
  /// histogram[d] = trials selecting exactly d distinct receivers.
  std::vector<std::uint64_t> histogram;
  double pass_fraction() const {
    return trials ? static_cast<double>(passes) / static_cast<double>(trials) : 0.0;
  }
};

/// Every left vertex picks a uniform neighbor; counts distinct right vertices
/// picked per trial against sqrt(m)/log2(m). Requires a matching saturating
/// the left side.
SqrtMatchingStats sqrt_matching_trial(const BipartiteGraph& graph, Rng& rng, std::uint64_t trials);

}  // namespace mtmgossip
