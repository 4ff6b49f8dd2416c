#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ntok {

using TokenId = std::int32_t;

constexpr int kMaxSpan = 8;  // upper bound on n_max; keeps span keys inline and hashable

enum class Provenance : std::uint8_t { Base, Decomposed, Patched };

// A token-id sequence for one document, tagged with how it was produced.
struct TokenSeq {
  std::vector<TokenId> ids;
  Provenance provenance = Provenance::Base;
};

// Inline id sequence of length 1..kMaxSpan. Used as hash key for n-gram
// candidates and for the patched-vocab longest-match lookup.
struct IdSpan {
  std::uint8_t len = 0;
  std::array<TokenId, kMaxSpan> ids{};

  static IdSpan of(std::span<const TokenId> s) {
    IdSpan k;
    k.len = static_cast<std::uint8_t>(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) k.ids[i] = s[i];
    return k;
  }
  std::span<const TokenId> span() const { return {ids.data(), len}; }
  bool operator==(const IdSpan& o) const {
    if (len != o.len) return false;
    for (int i = 0; i < len; ++i)
      if (ids[i] != o.ids[i]) return false;
    return true;
  }
  // Element-wise id order; a strict prefix sorts before its extensions.
  bool lex_less(const IdSpan& o) const {
    int n = len < o.len ? len : o.len;
    for (int i = 0; i < n; ++i)
      if (ids[i] != o.ids[i]) return ids[i] < o.ids[i];
    return len < o.len;
  }
};

struct IdSpanHash {
  std::size_t operator()(const IdSpan& k) const {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a
    auto mix = [&h](std::uint64_t v) {
      h ^= v;
      h *= 1099511628211ull;
    };
    mix(k.len);
    for (int i = 0; i < k.len; ++i) mix(static_cast<std::uint32_t>(k.ids[i]));
    return static_cast<std::size_t>(h);
  }
};

// A multi-token unit: contiguous base-token ids plus their concatenated surface.
struct NToken {
  std::vector<TokenId> base_ids;
  std::string surface;
};

enum class Split : std::uint8_t { Train, Test };

inline const char* split_name(Split s) { return s == Split::Train ? "train" : "test"; }

}  // namespace ntok
