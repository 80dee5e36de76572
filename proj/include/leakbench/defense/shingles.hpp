#pragma once

// Verbatim-span fingerprints: every k-byte window of the indexed texts,
// found again with a Rabin-Karp rolling hash and verified byte-for-byte.

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "leakbench/errors.hpp"

namespace leakbench::defense {

inline constexpr std::size_t kDefaultShingle = 12;

class ShingleIndex {
 public:
  explicit ShingleIndex(std::size_t k = kDefaultShingle) : k_(k) {
    if (k_ < 8) throw ValidationError("shingle length must be >= 8");
    pow_ = 1;
    for (std::size_t i = 1; i < k_; ++i) pow_ *= kBase;
  }

  std::size_t k() const noexcept { return k_; }
  bool empty() const noexcept { return texts_.empty(); }

  // Indexes one text under an owner id (e.g. a document index).
  void add(std::string text, std::size_t owner) {
    const std::size_t t = texts_.size();
    texts_.push_back({std::move(text), owner});
    const auto& s = texts_.back().text;
    if (s.size() < k_) return;
    std::uint64_t h = hash(std::string_view(s).substr(0, k_));
    for (std::size_t i = 0;; ++i) {
      table_[h].push_back({t, i});
      if (i + k_ >= s.size()) break;
      h = roll(h, s[i], s[i + k_]);
    }
  }

  struct Hit {
    std::size_t offset;  // in the scanned text
    std::size_t owner;
  };

  // Every window of `s` that occurs verbatim in an indexed text.
  std::vector<Hit> scan(std::string_view s) const {
    std::vector<Hit> out;
    if (s.size() < k_ || table_.empty()) return out;
    std::uint64_t h = hash(s.substr(0, k_));
    for (std::size_t i = 0;; ++i) {
      if (auto it = table_.find(h); it != table_.end()) {
        for (const auto& [t, off] : it->second) {
          if (std::string_view(texts_[t].text).substr(off, k_) == s.substr(i, k_)) {
            out.push_back({i, texts_[t].owner});
            break;
          }
        }
      }
      if (i + k_ >= s.size()) break;
      h = roll(h, s[i], s[i + k_]);
    }
    return out;
  }

  bool any_match(std::string_view s) const { return !scan(s).empty(); }

 private:
  static constexpr std::uint64_t kBase = 1099511628211ull;

  std::uint64_t hash(std::string_view w) const {
    std::uint64_t h = 0;
    for (unsigned char c : w) h = h * kBase + c + 1;
    return h;
  }
  std::uint64_t roll(std::uint64_t h, char out, char in) const {
    h -= (static_cast<unsigned char>(out) + 1ull) * pow_;
    return h * kBase + static_cast<unsigned char>(in) + 1;
  }

  struct Entry {
    std::string text;
    std::size_t owner;
  };
  std::size_t k_;
  std::uint64_t pow_ = 1;
  std::vector<Entry> texts_;
  std::unordered_map<std::uint64_t, std::vector<std::pair<std::size_t, std::size_t>>> table_;
};

}  // namespace leakbench::defense
