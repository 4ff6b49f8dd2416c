#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ntok/tokenizer.hpp"
#include "ntok/types.hpp"

namespace ntok {

struct MinerOptions {
  int n_max = 3;               // window lengths 2..n_max (n_max in [2, kMaxSpan])
  std::uint64_t min_freq = 2;  // candidates below this count are dropped
  bool words_only = false;     // restrict candidates to spans inside one word
  int threads = 0;             // 0 = hardware concurrency
};

// Per-token-id flags used by the words_only restriction. A span stays inside
// one word when its first token may start a word (at most a leading marker)
// and every later token carries no marker and no whitespace.
struct TokenWordFlags {
  std::vector<char> start_ok;
  std::vector<char> internal_ok;
};
TokenWordFlags word_flags(const TokenizerDef& tok);

inline std::uint64_t pack_pair(std::uint32_t a, std::uint32_t b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

// Frequency and pairwise-overlap tables over a token-id corpus. Candidate
// order is canonical (element-wise id order, prefixes first), so equal inputs
// produce byte-identical serializations regardless of thread count.
struct CandidateTable {
  int n_max = 3;
  std::uint64_t min_freq = 2;
  bool words_only = false;
  std::uint64_t total_tokens = 0;
  std::uint64_t doc_count = 0;
  std::string tokenizer_sha256;  // hex; empty when mined from raw id sequences
  std::string corpus_sha256;

  std::vector<IdSpan> candidates;
  std::unordered_map<IdSpan, std::uint32_t, IdSpanHash> index;
  std::vector<std::uint64_t> freq;  // by candidate position
  // Unordered candidate pairs (packed low/high position) -> number of
  // occurrence pairs whose token-index intervals intersect. Only co-occurring
  // pairs are stored; every stored pair is containment or a proper
  // suffix-prefix match, including a candidate against itself.
  std::unordered_map<std::uint64_t, std::uint64_t> overlaps;
  std::unordered_map<TokenId, std::uint64_t> old_token_freq;  // base-token counts

  std::optional<std::uint32_t> find(std::span<const TokenId> ids) const;
  std::uint64_t freq_of(std::span<const TokenId> ids) const;
  std::uint64_t overlap_count(std::uint32_t a, std::uint32_t b) const;

  void save(const std::string& path) const;
  static CandidateTable load(const std::string& path);
};

using IdDocs = std::vector<std::vector<TokenId>>;

// All contiguous windows of length 2..n_max that never include a special id,
// occur at least min_freq times, and (with words_only) sit inside one word.
// Windows never cross document boundaries. Result is in canonical order.
std::vector<IdSpan> prepare_n_tokens(const IdDocs& docs, const MinerOptions& opt,
                                     const std::unordered_set<TokenId>& specials,
                                     const TokenWordFlags* flags = nullptr);

// Occurrence counts for exactly the given candidates (overlapping occurrences
// all count). Counting shards merge by addition, so any document partition
// sums to the single-pass result.
std::unordered_map<IdSpan, std::uint64_t, IdSpanHash> count_freqs(
    const IdDocs& docs, const std::vector<IdSpan>& candidates,
    const std::unordered_set<TokenId>& specials, int threads = 0);

// Pairwise intersecting-occurrence counts between the given candidates, keyed
// by packed positions into `candidates` (pack_pair). Symmetric by key choice.
std::unordered_map<std::uint64_t, std::uint64_t> count_overlaps(
    const IdDocs& docs, const std::vector<IdSpan>& candidates,
    const std::unordered_set<TokenId>& specials, int threads = 0);

// One fused pass: prepare + count_freqs + count_overlaps + old-token counts.
CandidateTable build_candidate_table(const IdDocs& docs, const MinerOptions& opt,
                                     const std::unordered_set<TokenId>& specials,
                                     const TokenWordFlags* flags = nullptr);

}  // namespace ntok
