#pragma once

#include <boost/rational.hpp>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mtmgossip/token_set.hpp"

namespace mtmgossip {

using Rational = boost::rational<std::int64_t>;
using Edge = std::pair<NodeId, NodeId>;

/// Undirected, connected, simple graph with a degree bound N >= max degree.
class Topology {
 public:
  /// Validates symmetry, simplicity and connectivity. When degree_bound is
  /// omitted it defaults to the smallest power of two >= max(2, max degree).
  Topology(std::uint32_t n, const std::vector<Edge>& edges,
           std::optional<std::uint32_t> degree_bound = std::nullopt);

  std::uint32_t size() const { return static_cast<std::uint32_t>(adjacency_.size()); }
  std::uint32_t max_degree() const { return max_degree_; }
  std::uint32_t degree_bound() const { return degree_bound_; }
  std::uint32_t degree(NodeId u) const { return static_cast<std::uint32_t>(adjacency_[u].size()); }
  std::size_t edge_count() const { return edge_count_; }

  /// Sorted neighbor ids.
  const std::vector<NodeId>& neighbors(NodeId u) const { return adjacency_[u]; }
  bool adjacent(NodeId u, NodeId v) const;
  /// Each undirected edge once, as (min, max), in ascending order.
  std::vector<Edge> edges() const;

 private:
  std::vector<std::vector<NodeId>> adjacency_;
  std::uint32_t max_degree_ = 0;
  std::uint32_t degree_bound_ = 2;
  std::size_t edge_count_ = 0;
};

/// Sorted, duplicate-free set of node ids.
class NodeSet {
 public:
  NodeSet() = default;
  NodeSet(std::initializer_list<NodeId> ids);
  explicit NodeSet(std::vector<NodeId> ids);

  static NodeSet from_mask(std::uint64_t mask);

  const std::vector<NodeId>& members() const { return members_; }
  std::size_t size() const { return members_.size(); }
  bool empty() const { return members_.empty(); }
  bool contains(NodeId u) const;

  friend bool operator==(const NodeSet&, const NodeSet&) = default;

 private:
  std::vector<NodeId> members_;
};

enum class TopologyKind {
  line,
  ring,
  clique,
  star,
  grid,
  binary_tree,
  random_regular,
  erdos_renyi,
  barbell,
};

std::string to_string(TopologyKind kind);
TopologyKind parse_topology_kind(const std::string& name);

struct TopologySpec {
  TopologyKind kind = TopologyKind::line;
  std::uint32_t n = 2;
  std::uint64_t seed = 0;
  std::uint32_t degree = 3;  // random_regular
  double p = 0.5;            // erdos_renyi
};

/// Random kinds retry on fresh sub-seeds until the sample is connected.
inline constexpr int kGenerationRetries = 100;
inline constexpr std::uint32_t kExhaustiveLimit = 20;

Topology generate(const TopologySpec& spec);

/// Nodes outside s with at least one neighbor in s.
NodeSet boundary(const Topology& topo, const NodeSet& s);

/// Exact vertex expansion by subset enumeration.
Rational vertex_expansion(const Topology& topo, std::uint32_t limit = kExhaustiveLimit);

/// Closed-form expansion for kinds that have one (line, ring, clique, star).
std::optional<Rational> known_expansion(TopologyKind kind, std::uint32_t n);

/// Maximum matching size of the cut graph between s and its complement.
std::uint32_t cut_matching(const Topology& topo, const NodeSet& s);

struct MatchingLemmaReport {
  Rational alpha;
  /// Minimum over cuts of matching size / |S|.
  Rational gamma;
  NodeSet gamma_witness;
  std::uint64_t subsets_checked = 0;
  std::vector<NodeSet> violations;
  bool passed() const { return violations.empty(); }
};

/// Checks nu(B(S)) >= (alpha/4)|S| for every S with 0 < |S| <= n/2.
MatchingLemmaReport check_matching_lemma(const Topology& topo,
                                         std::uint32_t limit = kExhaustiveLimit);

bool is_connected(std::uint32_t n, const std::vector<Edge>& edges);

/// Edge-list format: "n m" header, then m lines "u v".
Topology read_edge_list(std::istream& in);
void write_edge_list(std::ostream& out, const Topology& topo);

std::string format_rational(const Rational& r);

}  // namespace mtmgossip
