#include "mtmgossip/matching.hpp"

#include <limits>
#include <queue>

#include "mtmgossip/errors.hpp"

namespace mtmgossip {

void BipartiteGraph::add_edge(std::uint32_t u, std::uint32_t v) {
  if (u >= left || v >= right) throw ArgumentError("bipartite edge out of range");
  adjacency[u].push_back(v);
}

namespace {

constexpr std::uint32_t kNil = Matching::kUnmatched;
constexpr std::uint32_t kInf = std::numeric_limits<std::uint32_t>::max();

class HopcroftKarp {
 public:
  explicit HopcroftKarp(const BipartiteGraph& g)
      : g_(g), pair_left_(g.left, kNil), pair_right_(g.right, kNil), dist_(g.left, kInf) {}

  Matching run() {
    std::uint32_t size = 0;
    while (bfs()) {
      for (std::uint32_t u = 0; u < g_.left; ++u) {
        if (pair_left_[u] == kNil && dfs(u)) ++size;
      }
    }
    return Matching{size, std::move(pair_left_)};
  }

 private:
  // Layers free left vertices; true if some augmenting path exists.
  bool bfs() {
    std::queue<std::uint32_t> q;
    for (std::uint32_t u = 0; u < g_.left; ++u) {
      if (pair_left_[u] == kNil) {
        dist_[u] = 0;
        q.push(u);
      } else {
        dist_[u] = kInf;
      }
    }
    bool found = false;
    while (!q.empty()) {
      const auto u = q.front();
      q.pop();
      for (auto v : g_.adjacency[u]) {
        const auto w = pair_right_[v];
        if (w == kNil) {
          found = true;
        } else if (dist_[w] == kInf) {
          dist_[w] = dist_[u] + 1;
          q.push(w);
        }
      }
    }
    return found;
  }

  bool dfs(std::uint32_t u) {
    for (auto v : g_.adjacency[u]) {
      const auto w = pair_right_[v];
      if (w == kNil || (dist_[w] == dist_[u] + 1 && dfs(w))) {
        pair_left_[u] = v;
        pair_right_[v] = u;
        return true;
      }
    }
    dist_[u] = kInf;
    return false;
  }

  const BipartiteGraph& g_;
  std::vector<std::uint32_t> pair_left_;
  std::vector<std::uint32_t> pair_right_;
  std::vector<std::uint32_t> dist_;
};

}  // namespace

Matching maximum_matching(const BipartiteGraph& g) { return HopcroftKarp(g).run(); }

}  // namespace mtmgossip
