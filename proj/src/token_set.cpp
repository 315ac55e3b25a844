#include "mtmgossip/token_set.hpp"

#include <bit>
#include <stdexcept>
#include <string>

namespace mtmgossip {

TokenSet::TokenSet(std::uint32_t universe)
    : universe_(universe), words_((universe + 63) / 64, 0) {}

bool TokenSet::contains(TokenId t) const {
  if (t >= universe_) return false;
  return (words_[t / 64] >> (t % 64)) & 1U;
}

bool TokenSet::insert(TokenId t) {
  if (t >= universe_) {
    throw std::out_of_range("token " + std::to_string(t) + " outside universe of " +
                            std::to_string(universe_));
  }
  auto& w = words_[t / 64];
  const std::uint64_t mask = std::uint64_t{1} << (t % 64);
  if (w & mask) return false;
  w |= mask;
  ++count_;
  return true;
}

namespace {

template <typename Op>
std::vector<TokenId> collect(const std::vector<std::uint64_t>& a,
                             const std::vector<std::uint64_t>& b, Op op) {
  std::vector<TokenId> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    std::uint64_t w = op(a[i], i < b.size() ? b[i] : 0);
    while (w) {
      const int bit = std::countr_zero(w);
      out.push_back(static_cast<TokenId>(i * 64 + bit));
      w &= w - 1;
    }
  }
  return out;
}

}  // namespace

std::vector<TokenId> TokenSet::to_vector() const {
  return collect(words_, words_, [](auto x, auto) { return x; });
}

std::vector<TokenId> TokenSet::symmetric_difference(const TokenSet& other) const {
  if (other.universe_ != universe_) throw std::invalid_argument("token universes differ");
  return collect(words_, other.words_, [](auto x, auto y) { return x ^ y; });
}

std::vector<TokenId> TokenSet::missing_from(const TokenSet& other) const {
  if (other.universe_ != universe_) throw std::invalid_argument("token universes differ");
  return collect(words_, other.words_, [](auto x, auto y) { return x & ~y; });
}

bool TokenSet::subset_of(const TokenSet& other) const {
  if (other.universe_ != universe_) return false;
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (words_[i] & ~other.words_[i]) return false;
  }
  return true;
}

}  // namespace mtmgossip
