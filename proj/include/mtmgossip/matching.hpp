#pragma once

#include <cstdint>
#include <vector>

namespace mtmgossip {

/// Bipartite graph given as adjacency lists from left vertices 0..left-1 to
/// right vertices 0..right-1.
struct BipartiteGraph {
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  std::vector<std::vector<std::uint32_t>> adjacency;

  BipartiteGraph() = default;
  BipartiteGraph(std::uint32_t l, std::uint32_t r) : left(l), right(r), adjacency(l) {}

  void add_edge(std::uint32_t u, std::uint32_t v);
};

struct Matching {
  std::uint32_t size = 0;
  /// match_left[u] = matched right vertex, or kUnmatched.
  std::vector<std::uint32_t> match_left;
  static constexpr std::uint32_t kUnmatched = ~std::uint32_t{0};
};

/// Maximum cardinality matching (Hopcroft-Karp).
Matching maximum_matching(const BipartiteGraph& g);

}  // namespace mtmgossip
