#include "mtmgossip/analysis.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>

#include "mtmgossip/errors.hpp"

namespace mtmgossip {

SizeBandTable::SizeBandTable(std::uint32_t n, std::uint32_t k)
    : n_(n), k_(k), counts_(k, 0) {
  if (n < 4 || !std::has_single_bit(n)) {
    throw ArgumentError("size band table needs n a power of two >= 4 (got " + std::to_string(n) +
                        ")");
  }
  if (k == 0) throw ArgumentError("size band table needs at least one token");
  center_ = static_cast<std::uint32_t>(std::countr_zero(n)) - 1;
  bits_.assign(static_cast<std::size_t>(k) * rows(), false);
}

bool SizeBandTable::row_set(std::uint32_t n, std::uint32_t center, std::uint32_t count,
                            std::uint32_t row) {
  if (row <= center) return count >= (std::uint64_t{1} << row);
  const std::uint64_t bound = n >> (row - center);
  return static_cast<std::uint64_t>(n - count) < bound;
}

std::uint32_t SizeBandTable::band_for_count(std::uint32_t n, std::uint32_t count) {
  const std::uint32_t center = static_cast<std::uint32_t>(std::countr_zero(n)) - 1;
  std::uint32_t band = 0;
  for (std::uint32_t row = 1; row <= 2 * center + 1; ++row) {
    if (row_set(n, center, count, row)) band = row;
  }
  return band;
}

void SizeBandTable::update(std::span<const std::uint32_t> counts) {
  if (counts.size() != k_) throw ArgumentError("count vector size does not match token count");
  for (TokenId t = 0; t < k_; ++t) {
    if (counts[t] > n_) throw ArgumentError("token count exceeds n");
    if (counts[t] < counts_[t]) {
      throw ContractViolation("count for token " + std::to_string(t) + " decreased from " +
                              std::to_string(counts_[t]) + " to " + std::to_string(counts[t]));
    }
  }
  for (TokenId t = 0; t < k_; ++t) {
    counts_[t] = counts[t];
    for (std::uint32_t row = 1; row <= rows(); ++row) {
      bits_[static_cast<std::size_t>(t) * rows() + row - 1] = row_set(n_, center_, counts[t], row);
    }
  }
}

bool SizeBandTable::bit(TokenId t, std::uint32_t row) const {
  if (t >= k_ || row < 1 || row > rows()) throw ArgumentError("size band table cell out of range");
  return bits_[static_cast<std::size_t>(t) * rows() + row - 1];
}

std::uint32_t SizeBandTable::current_band(TokenId t) const {
  std::uint32_t band = 0;
  for (std::uint32_t row = 1; row <= rows(); ++row) {
    if (bit(t, row)) band = row;
  }
  return band;
}

SizeBandTable update_table(SizeBandTable table, std::span<const std::uint32_t> counts) {
  table.update(counts);
  return table;
}

std::uint32_t current_band(const SizeBandTable& table, TokenId t) { return table.current_band(t); }

std::uint32_t n_star(std::uint32_t count, std::uint32_t n) {
  if (count > n) throw ArgumentError("count exceeds n");
  return std::min(count, n - count);
}

TokenId t_star(std::span<const std::uint32_t> counts, std::uint32_t n) {
  if (counts.empty()) throw ArgumentError("t_star over an empty token set");
  TokenId best = 0;
  for (TokenId t = 1; t < counts.size(); ++t) {
    if (n_star(counts[t], n) > n_star(counts[best], n)) best = t;
  }
  return best;
}

SpreadHistory spread_history(const SyncResult& run) {
  SpreadHistory h;
  h.n = run.n;
  h.k = run.k;
  h.phase_length = run.phase_length;
  h.initial_counts = run.initial_counts;
  for (const auto& log : run.rounds) {
    h.counts.push_back(log.counts);
    std::uint64_t productive = 0;
    for (const auto& c : log.connections) {
      const bool moved = std::any_of(log.transfers.begin(), log.transfers.end(), [&](const auto& t) {
        return (t.from == c.sender && t.to == c.receiver) ||
               (t.from == c.receiver && t.to == c.sender);
      });
      if (moved) ++productive;
    }
    h.productive_connections.push_back(productive);
  }
  return h;
}

std::string to_string(PhaseKind kind) {
  switch (kind) {
    case PhaseKind::upgrade: return "upgrade";
    case PhaseKind::fill: return "fill";
    case PhaseKind::terminal: return "terminal";
  }
  return "unknown";
}

namespace {

std::uint32_t distance_to_center(std::uint32_t band, std::uint32_t center) {
  return band > center ? band - center : center - band;
}

}  // namespace

PhaseReport classify_phases(const SpreadHistory& history,
                            std::optional<SuccessCalibration> calibration) {
  const SizeBandTable shape(history.n, history.k);
  const auto n = history.n;
  const auto center = shape.center();
  PhaseReport report;
  report.upgrades_per_band.assign(shape.rows() + 1, 0);
  report.upgrade_bound = static_cast<std::uint64_t>(history.k) * (2ULL * center + 1);

  const auto rounds = history.counts.size();
  const auto plen = std::max<std::uint32_t>(history.phase_length, 1);
  auto counts_before = [&](std::size_t round_index) -> const std::vector<std::uint32_t>& {
    return round_index == 0 ? history.initial_counts : history.counts[round_index - 1];
  };

  for (std::size_t start = 0; start < rounds; start += plen) {
    const std::size_t end = std::min<std::size_t>(start + plen, rounds);
    const auto& at_start = counts_before(start);
    const auto& at_end = history.counts[end - 1];

    PhaseRecord rec;
    rec.index = start / plen + 1;
    rec.first_round = start + 1;
    rec.last_round = end;
    rec.t_star = t_star(at_start, n);
    rec.n_star = n_star(at_start[rec.t_star], n);
    rec.band = SizeBandTable::band_for_count(n, at_start[rec.t_star]);
    rec.distance = distance_to_center(rec.band, center);
    for (std::size_t r = start; r < end; ++r) {
      rec.productive_connections +=
          r < history.productive_connections.size() ? history.productive_connections[r] : 0;
    }

    const bool complete_at_start =
        std::all_of(at_start.begin(), at_start.end(), [n](auto c) { return c == n; });
    // Each learn event raises one count by one, so every intermediate count
    // between the phase endpoints is reached by some subset of connections.
    bool upgrade = false;
    for (TokenId t = 0; t < history.k && !upgrade; ++t) {
      for (std::uint32_t c = at_start[t] + 1; c <= at_end[t]; ++c) {
        if (distance_to_center(SizeBandTable::band_for_count(n, c), center) < rec.distance) {
          upgrade = true;
          break;
        }
      }
    }
    if (complete_at_start) {
      rec.kind = PhaseKind::terminal;
      ++report.terminals;
    } else if (upgrade) {
      rec.kind = PhaseKind::upgrade;
      ++report.upgrades;
      ++report.upgrades_per_band[rec.band];
    } else {
      rec.kind = PhaseKind::fill;
      ++report.fills;
    }

    if (calibration) {
      const double logs = std::log2(static_cast<double>(n)) *
                          std::max(1.0, std::log2(static_cast<double>(calibration->max_degree)));
      const double need = calibration->gamma * calibration->alpha * rec.n_star / logs;
      rec.successful = static_cast<double>(rec.productive_connections) >= need;
    }
    report.phases.push_back(rec);
  }
  return report;
}

TableAudit audit_band_table(const SpreadHistory& history) {
  TableAudit audit;
  SizeBandTable table(history.n, history.k);
  std::vector<bool> previous;
  auto check = [&](std::span<const std::uint32_t> counts, std::size_t round) {
    try {
      table.update(counts);
    } catch (const ContractViolation& e) {
      audit.monotone_ok = false;
      audit.problems.push_back("round " + std::to_string(round) + ": " + e.what());
      return;
    }
    ++audit.snapshots;
    std::vector<bool> current;
    for (TokenId t = 0; t < table.tokens(); ++t) {
      bool all = true;
      for (std::uint32_t row = 1; row <= table.rows(); ++row) {
        const bool b = table.bit(t, row);
        current.push_back(b);
        all = all && b;
        if (row > 1 && b && !table.bit(t, row - 1)) {
          audit.prefix_ok = false;
          audit.problems.push_back("round " + std::to_string(round) + ": token " +
                                   std::to_string(t) + " row " + std::to_string(row) +
                                   " set above a clear row");
        }
      }
      if (all != (counts[t] == table.n())) {
        audit.completion_ok = false;
        audit.problems.push_back("round " + std::to_string(round) + ": token " +
                                 std::to_string(t) + " all-rows-set disagrees with completion");
      }
    }
    for (std::size_t i = 0; i < previous.size(); ++i) {
      if (previous[i] && !current[i]) {
        audit.monotone_ok = false;
        audit.problems.push_back("round " + std::to_string(round) + ": a set bit cleared");
        break;
      }
    }
    previous = std::move(current);
  };
  check(history.initial_counts, 0);
  for (std::size_t r = 0; r < history.counts.size(); ++r) check(history.counts[r], r + 1);
  return audit;
}

std::vector<Rational> degree_weight(const BipartiteGraph& selection) {
  std::vector<Rational> w(selection.right, Rational(0));
  for (std::uint32_t u = 0; u < selection.left; ++u) {
    const auto& nbrs = selection.adjacency[u];
    if (nbrs.empty()) {
      throw ContractViolation("sender " + std::to_string(u) + " has no selection edges");
    }
    const Rational share(1, static_cast<std::int64_t>(nbrs.size()));
    for (auto v : nbrs) w[v] += share;
  }
  return w;
}

SqrtMatchingStats sqrt_matching_trial(const BipartiteGraph& graph, Rng& rng,
                                      std::uint64_t trials) {
  if (graph.left == 0) throw ArgumentError("selection graph has no senders");
  if (maximum_matching(graph).size != graph.left) {
    throw ArgumentError("selection graph has no matching saturating all senders");
  }
  SqrtMatchingStats stats;
  stats.m = graph.left;
  stats.trials = trials;
  const double m = graph.left;
  stats.threshold = graph.left >= 2 ? std::sqrt(m) / std::log2(m) : 1.0;
  stats.histogram.assign(graph.left + 1, 0);
  stats.min_distinct = graph.left;
  std::vector<std::uint64_t> stamp(graph.right, 0);
  double total = 0;
  for (std::uint64_t trial = 1; trial <= trials; ++trial) {
    std::uint32_t distinct = 0;
    for (std::uint32_t u = 0; u < graph.left; ++u) {
      const auto& nbrs = graph.adjacency[u];
      const auto v = nbrs[rng.below(nbrs.size())];
      if (stamp[v] != trial) {
        stamp[v] = trial;
        ++distinct;
      }
    }
    ++stats.histogram[distinct];
    total += distinct;
    stats.min_distinct = std::min(stats.min_distinct, distinct);
    stats.max_distinct = std::max(stats.max_distinct, distinct);
    if (static_cast<double>(distinct) >= stats.threshold) ++stats.passes;
  }
  stats.mean_distinct = trials ? total / static_cast<double>(trials) : 0.0;
  return stats;
}

}  // namespace mtmgossip
