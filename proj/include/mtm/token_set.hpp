#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

namespace mtm {

/// A set of gossip tokens, each labeled by its originator UID in [N].
/// Sorted vector: sets are small (<= N) and iterated in order constantly.
class TokenSet {
 public:
  TokenSet() = default;
  explicit TokenSet(std::vector<uint32_t> vals) : vals_(std::move(vals)) {
    std::sort(vals_.begin(), vals_.end());
    vals_.erase(std::unique(vals_.begin(), vals_.end()), vals_.end());
  }

  bool contains(uint32_t t) const {
    return std::binary_search(vals_.begin(), vals_.end(), t);
  }

  /// Returns true if the token was new.
  bool insert(uint32_t t) {
    auto it = std::lower_bound(vals_.begin(), vals_.end(), t);
    if (it != vals_.end() && *it == t) return false;
    vals_.insert(it, t);
    return true;
  }

  size_t size() const { return vals_.size(); }
  bool empty() const { return vals_.empty(); }

  auto begin() const { return vals_.begin(); }
  auto end() const { return vals_.end(); }

  /// Iterators over the sub-range with values in [lo, hi].
  auto lower(uint32_t lo) const { return std::lower_bound(vals_.begin(), vals_.end(), lo); }
  auto upper(uint32_t hi) const { return std::upper_bound(vals_.begin(), vals_.end(), hi); }

  bool operator==(const TokenSet& o) const { return vals_ == o.vals_; }
  bool operator<(const TokenSet& o) const { return vals_ < o.vals_; }

  const std::vector<uint32_t>& values() const { return vals_; }

 private:
  std::vector<uint32_t> vals_;
};

}  // namespace mtm
