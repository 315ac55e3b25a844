#include "mtmgossip/topology.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "mtmgossip/errors.hpp"
#include "mtmgossip/matching.hpp"
#include "mtmgossip/rng.hpp"

namespace mtmgossip {

namespace {

std::uint32_t next_power_of_two(std::uint32_t x) { return std::bit_ceil(std::max(x, 2U)); }

}  // namespace

Topology::Topology(std::uint32_t n, const std::vector<Edge>& edges,
                   std::optional<std::uint32_t> degree_bound)
    : adjacency_(n) {
  if (n == 0) throw ArgumentError("topology must have at least one node");
  std::set<Edge> seen;
  for (auto [u, v] : edges) {
    if (u >= n || v >= n) {
      throw ArgumentError("edge (" + std::to_string(u) + "," + std::to_string(v) +
                          ") references a node outside 0.." + std::to_string(n - 1));
    }
    if (u == v) throw ArgumentError("self-loop at node " + std::to_string(u));
    if (!seen.insert({std::min(u, v), std::max(u, v)}).second) {
      throw ArgumentError("duplicate edge (" + std::to_string(u) + "," + std::to_string(v) + ")");
    }
    adjacency_[u].push_back(v);
    adjacency_[v].push_back(u);
  }
  edge_count_ = seen.size();
  for (auto& nbrs : adjacency_) {
    std::sort(nbrs.begin(), nbrs.end());
    max_degree_ = std::max(max_degree_, static_cast<std::uint32_t>(nbrs.size()));
  }
  if (!is_connected(n, edges)) throw ArgumentError("topology is not connected");
  if (degree_bound) {
    if (*degree_bound < max_degree_ || *degree_bound < 2) {
      throw ArgumentError("degree bound " + std::to_string(*degree_bound) +
                          " is below max(2, max degree " + std::to_string(max_degree_) + ")");
    }
    degree_bound_ = *degree_bound;
  } else {
    degree_bound_ = next_power_of_two(max_degree_);
  }
}

bool Topology::adjacent(NodeId u, NodeId v) const {
  const auto& nbrs = adjacency_[u];
  return std::binary_search(nbrs.begin(), nbrs.end(), v);
}

std::vector<Edge> Topology::edges() const {
  std::vector<Edge> out;
  out.reserve(edge_count_);
  for (NodeId u = 0; u < size(); ++u) {
    for (auto v : adjacency_[u]) {
      if (u < v) out.emplace_back(u, v);
    }
  }
  return out;
}

NodeSet::NodeSet(std::initializer_list<NodeId> ids) : NodeSet(std::vector<NodeId>(ids)) {}

NodeSet::NodeSet(std::vector<NodeId> ids) : members_(std::move(ids)) {
  std::sort(members_.begin(), members_.end());
  members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
}

NodeSet NodeSet::from_mask(std::uint64_t mask) {
  std::vector<NodeId> ids;
  while (mask) {
    ids.push_back(static_cast<NodeId>(std::countr_zero(mask)));
    mask &= mask - 1;
  }
  NodeSet s;
  s.members_ = std::move(ids);
  return s;
}

bool NodeSet::contains(NodeId u) const {
  return std::binary_search(members_.begin(), members_.end(), u);
}

std::string to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::line: return "line";
    case TopologyKind::ring: return "ring";
    case TopologyKind::clique: return "clique";
    case TopologyKind::star: return "star";
    case TopologyKind::grid: return "grid";
    case TopologyKind::binary_tree: return "binary_tree";
    case TopologyKind::random_regular: return "random_regular";
    case TopologyKind::erdos_renyi: return "erdos_renyi";
    case TopologyKind::barbell: return "barbell";
  }
  return "unknown";
}

TopologyKind parse_topology_kind(const std::string& name) {
  for (auto kind : {TopologyKind::line, TopologyKind::ring, TopologyKind::clique,
                    TopologyKind::star, TopologyKind::grid, TopologyKind::binary_tree,
                    TopologyKind::random_regular, TopologyKind::erdos_renyi,
                    TopologyKind::barbell}) {
    if (to_string(kind) == name) return kind;
  }
  throw ArgumentError("unknown topology kind '" + name + "'");
}

bool is_connected(std::uint32_t n, const std::vector<Edge>& edges) {
  if (n == 0) return false;
  std::vector<std::vector<NodeId>> adj(n);
  for (auto [u, v] : edges) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  std::vector<bool> seen(n, false);
  std::vector<NodeId> stack{0};
  seen[0] = true;
  std::uint32_t reached = 1;
  while (!stack.empty()) {
    const auto u = stack.back();
    stack.pop_back();
    for (auto v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++reached;
        stack.push_back(v);
      }
    }
  }
  return reached == n;
}

namespace {

std::vector<Edge> clique_edges(NodeId first, std::uint32_t count) {
  std::vector<Edge> e;
  for (NodeId u = first; u < first + count; ++u) {
    for (NodeId v = u + 1; v < first + count; ++v) e.emplace_back(u, v);
  }
  return e;
}

// Pairs stubs one edge at a time, rejecting self-loops and multi-edges, and
// restarts from scratch when no admissible pair remains.
std::optional<std::vector<Edge>> sample_regular(std::uint32_t n, std::uint32_t d, Rng& rng) {
  for (int restart = 0; restart < 50; ++restart) {
    std::vector<NodeId> stubs;
    for (NodeId u = 0; u < n; ++u) stubs.insert(stubs.end(), d, u);
    std::set<Edge> chosen;
    bool stuck = false;
    while (!stubs.empty() && !stuck) {
      bool placed = false;
      for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
        const auto i = rng.below(stubs.size());
        const auto j = rng.below(stubs.size());
        const auto u = stubs[i];
        const auto v = stubs[j];
        if (i == j || u == v || chosen.count({std::min(u, v), std::max(u, v)})) continue;
        chosen.insert({std::min(u, v), std::max(u, v)});
        stubs.erase(stubs.begin() + static_cast<long>(std::max(i, j)));
        stubs.erase(stubs.begin() + static_cast<long>(std::min(i, j)));
        placed = true;
      }
      stuck = !placed;
    }
    if (!stuck) return std::vector<Edge>(chosen.begin(), chosen.end());
  }
  return std::nullopt;
}

void validate_spec(const TopologySpec& spec) {
  const auto n = spec.n;
  if (n < 2) throw ArgumentError("topology needs n >= 2");
  switch (spec.kind) {
    case TopologyKind::ring:
      if (n < 3) throw ArgumentError("ring needs n >= 3");
      break;
    case TopologyKind::barbell:
      if (n < 4) throw ArgumentError("barbell needs n >= 4");
      break;
    case TopologyKind::random_regular:
      if (spec.degree < 1 || spec.degree >= n) {
        throw ArgumentError("random_regular degree must lie in 1..n-1");
      }
      if ((static_cast<std::uint64_t>(spec.degree) * n) % 2 != 0) {
        throw ArgumentError("random_regular needs d*n even");
      }
      break;
    case TopologyKind::erdos_renyi:
      if (!(spec.p > 0.0 && spec.p <= 1.0)) throw ArgumentError("erdos_renyi needs 0 < p <= 1");
      break;
    default:
      break;
  }
}

}  // namespace

Topology generate(const TopologySpec& spec) {
  validate_spec(spec);
  const auto n = spec.n;
  std::vector<Edge> edges;
  switch (spec.kind) {
    case TopologyKind::line:
      for (NodeId u = 0; u + 1 < n; ++u) edges.emplace_back(u, u + 1);
      return Topology(n, edges);
    case TopologyKind::ring:
      for (NodeId u = 0; u < n; ++u) edges.emplace_back(u, (u + 1) % n);
      return Topology(n, edges);
    case TopologyKind::clique:
      return Topology(n, clique_edges(0, n));
    case TopologyKind::star:
      for (NodeId u = 1; u < n; ++u) edges.emplace_back(0, u);
      return Topology(n, edges);
    case TopologyKind::grid: {
      std::uint32_t rows = 1;
      for (std::uint32_t r = 1; r * r <= n; ++r) {
        if (n % r == 0) rows = r;
      }
      const std::uint32_t cols = n / rows;
      for (std::uint32_t r = 0; r < rows; ++r) {
        for (std::uint32_t c = 0; c < cols; ++c) {
          const NodeId u = r * cols + c;
          if (c + 1 < cols) edges.emplace_back(u, u + 1);
          if (r + 1 < rows) edges.emplace_back(u, u + cols);
        }
      }
      return Topology(n, edges);
    }
    case TopologyKind::binary_tree:
      for (NodeId u = 1; u < n; ++u) edges.emplace_back((u - 1) / 2, u);
      return Topology(n, edges);
    case TopologyKind::barbell: {
      const std::uint32_t left = n / 2;
      edges = clique_edges(0, left);
      auto right = clique_edges(left, n - left);
      edges.insert(edges.end(), right.begin(), right.end());
      edges.emplace_back(left - 1, left);
      return Topology(n, edges);
    }
    case TopologyKind::random_regular:
    case TopologyKind::erdos_renyi:
      break;
  }

  for (int attempt = 0; attempt < kGenerationRetries; ++attempt) {
    Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(attempt)));
    std::vector<Edge> sample;
    if (spec.kind == TopologyKind::erdos_renyi) {
      for (NodeId u = 0; u < n; ++u) {
        for (NodeId v = u + 1; v < n; ++v) {
          if (rng.unit() < spec.p) sample.emplace_back(u, v);
        }
      }
    } else {
      auto regular = sample_regular(n, spec.degree, rng);
      if (!regular) continue;
      sample = std::move(*regular);
    }
    if (is_connected(n, sample)) return Topology(n, sample);
  }
  throw GenerationError("could not generate a connected " + to_string(spec.kind) + " graph with n=" +
                        std::to_string(n) + " after " + std::to_string(kGenerationRetries) +
                        " sub-seeds");
}

namespace {

void check_proper_subset(const Topology& topo, const NodeSet& s) {
  if (s.empty()) throw ArgumentError("node set is empty");
  for (auto u : s.members()) {
    if (u >= topo.size()) throw ArgumentError("node " + std::to_string(u) + " outside topology");
  }
  if (s.size() >= topo.size()) throw ArgumentError("node set covers every node");
}

std::vector<std::uint64_t> neighbor_masks(const Topology& topo) {
  std::vector<std::uint64_t> masks(topo.size(), 0);
  for (NodeId u = 0; u < topo.size(); ++u) {
    for (auto v : topo.neighbors(u)) masks[u] |= std::uint64_t{1} << v;
  }
  return masks;
}

// Calls fn(mask) for every subset of {0..n-1} with 1 <= |S| <= n/2.
template <typename Fn>
void for_each_small_subset(std::uint32_t n, Fn&& fn) {
  const std::uint64_t universe = (n == 64) ? ~std::uint64_t{0} : ((std::uint64_t{1} << n) - 1);
  for (std::uint32_t size = 1; size <= n / 2; ++size) {
    std::uint64_t mask = (std::uint64_t{1} << size) - 1;
    while (mask <= universe) {
      fn(mask);
      // Gosper's hack: next mask with the same popcount.
      const std::uint64_t c = mask & (~mask + 1);
      const std::uint64_t r = mask + c;
      if (r == 0) break;
      mask = (((r ^ mask) >> 2) / c) | r;
    }
  }
}

std::uint32_t cut_matching_mask(const Topology& topo, std::uint64_t s_mask) {
  const auto s = NodeSet::from_mask(s_mask);
  std::vector<std::uint32_t> right_index(topo.size(), 0);
  std::uint32_t right = 0;
  for (NodeId v = 0; v < topo.size(); ++v) {
    if (!((s_mask >> v) & 1U)) right_index[v] = right++;
  }
  BipartiteGraph b(static_cast<std::uint32_t>(s.size()), right);
  for (std::uint32_t i = 0; i < s.size(); ++i) {
    for (auto v : topo.neighbors(s.members()[i])) {
      if (!((s_mask >> v) & 1U)) b.add_edge(i, right_index[v]);
    }
  }
  return maximum_matching(b).size;
}

void check_exhaustive_limit(const Topology& topo, std::uint32_t limit) {
  if (topo.size() > limit || topo.size() > 63) {
    throw UnsupportedError("exhaustive enumeration limited to n <= " + std::to_string(limit) +
                           " (got n=" + std::to_string(topo.size()) +
                           "); supply the expansion externally");
  }
}

}  // namespace

NodeSet boundary(const Topology& topo, const NodeSet& s) {
  check_proper_subset(topo, s);
  std::vector<NodeId> out;
  for (NodeId v = 0; v < topo.size(); ++v) {
    if (s.contains(v)) continue;
    for (auto w : topo.neighbors(v)) {
      if (s.contains(w)) {
        out.push_back(v);
        break;
      }
    }
  }
  return NodeSet(std::move(out));
}

Rational vertex_expansion(const Topology& topo, std::uint32_t limit) {
  check_exhaustive_limit(topo, limit);
  const auto masks = neighbor_masks(topo);
  const auto n = topo.size();
  if (n < 2) throw ArgumentError("vertex expansion needs n >= 2");
  Rational best(static_cast<std::int64_t>(n), 1);
  for_each_small_subset(n, [&](std::uint64_t s) {
    std::uint64_t reach = 0;
    for (std::uint64_t m = s; m; m &= m - 1) reach |= masks[std::countr_zero(m)];
    const Rational ratio(std::popcount(reach & ~s), std::popcount(s));
    if (ratio < best) best = ratio;
  });
  return best;
}

std::optional<Rational> known_expansion(TopologyKind kind, std::uint32_t n) {
  if (n < 2) return std::nullopt;
  const std::int64_t half = n / 2;
  switch (kind) {
    case TopologyKind::line:
    case TopologyKind::star:
      return Rational(1, half);
    case TopologyKind::ring:
      if (n < 3) return std::nullopt;
      return Rational(2, half);
    case TopologyKind::clique:
      return Rational(static_cast<std::int64_t>(n) - half, half);
    default:
      return std::nullopt;
  }
}

std::uint32_t cut_matching(const Topology& topo, const NodeSet& s) {
  check_proper_subset(topo, s);
  if (2 * s.size() > topo.size()) throw ArgumentError("cut side must satisfy |S| <= n/2");
  std::vector<std::uint32_t> right_index(topo.size(), 0);
  std::uint32_t right = 0;
  for (NodeId v = 0; v < topo.size(); ++v) {
    if (!s.contains(v)) right_index[v] = right++;
  }
  BipartiteGraph b(static_cast<std::uint32_t>(s.size()), right);
  for (std::uint32_t i = 0; i < s.size(); ++i) {
    for (auto v : topo.neighbors(s.members()[i])) {
      if (!s.contains(v)) b.add_edge(i, right_index[v]);
    }
  }
  return maximum_matching(b).size;
}

MatchingLemmaReport check_matching_lemma(const Topology& topo, std::uint32_t limit) {
  MatchingLemmaReport report;
  report.alpha = vertex_expansion(topo, limit);
  report.gamma = Rational(static_cast<std::int64_t>(topo.size()), 1);
  const Rational floor = report.alpha / 4;
  for_each_small_subset(topo.size(), [&](std::uint64_t s) {
    ++report.subsets_checked;
    const Rational ratio(cut_matching_mask(topo, s), std::popcount(s));
    if (ratio < report.gamma) {
      report.gamma = ratio;
      report.gamma_witness = NodeSet::from_mask(s);
    }
    if (ratio < floor) report.violations.push_back(NodeSet::from_mask(s));
  });
  return report;
}

Topology read_edge_list(std::istream& in) {
  std::string line;
  auto next_line = [&](std::string& out) {
    while (std::getline(in, out)) {
      const auto pos = out.find_first_not_of(" \t\r");
      if (pos != std::string::npos && out[pos] != '#') return true;
    }
    return false;
  };
  if (!next_line(line)) throw ConfigError("edge list: missing 'n m' header");
  std::istringstream header(line);
  std::int64_t n = -1, m = -1;
  if (!(header >> n >> m) || n <= 0 || m < 0) {
    throw ConfigError("edge list: malformed header '" + line + "'");
  }
  std::vector<Edge> edges;
  for (std::int64_t i = 0; i < m; ++i) {
    if (!next_line(line)) {
      throw ConfigError("edge list: expected " + std::to_string(m) + " edges, found " +
                        std::to_string(i));
    }
    std::istringstream row(line);
    std::int64_t u = -1, v = -1;
    if (!(row >> u >> v) || u < 0 || v < 0) {
      throw ConfigError("edge list: malformed edge line '" + line + "'");
    }
    edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
  }
  return Topology(static_cast<std::uint32_t>(n), edges);
}

void write_edge_list(std::ostream& out, const Topology& topo) {
  out << topo.size() << ' ' << topo.edge_count() << '\n';
  for (auto [u, v] : topo.edges()) out << u << ' ' << v << '\n';
}

std::string format_rational(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

}  // namespace mtmgossip
