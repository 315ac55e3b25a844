#pragma once

#include <cstdint>
#include <vector>

namespace mtmgossip {

using NodeId = std::uint32_t;
using TokenId = std::uint32_t;

/// Set of gossip tokens drawn from a universe 0..k-1, stored as a bitset.
class TokenSet {
 public:
  TokenSet() = default;
  explicit TokenSet(std::uint32_t universe);

  std::uint32_t universe() const { return universe_; }
  std::uint32_t size() const { return count_; }
  bool empty() const { return count_ == 0; }
  bool full() const { return count_ == universe_; }

  bool contains(TokenId t) const;
  /// Returns true if the token was newly added.
  bool insert(TokenId t);

  std::vector<TokenId> to_vector() const;
  /// Tokens present in exactly one of the two sets, ascending.
  std::vector<TokenId> symmetric_difference(const TokenSet& other) const;
  /// Tokens in this set that `other` lacks, ascending.
  std::vector<TokenId> missing_from(const TokenSet& other) const;
  bool subset_of(const TokenSet& other) const;

  const std::vector<std::uint64_t>& words() const { return words_; }

  friend bool operator==(const TokenSet& a, const TokenSet& b) {
    return a.universe_ == b.universe_ && a.words_ == b.words_;
  }

 private:
  std::uint32_t universe_ = 0;
  std::uint32_t count_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace mtmgossip
