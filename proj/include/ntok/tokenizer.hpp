#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ntok/types.hpp"

namespace ntok {

struct MergeRule {
  TokenId left = -1;
  TokenId right = -1;
  TokenId out = -1;
};

// Immutable subword tokenizer definition: vocab bijection, ordered merge
// rules (rank = position), word-boundary marker, special ids. All operations
// on a loaded instance are pure and thread-safe.
class TokenizerDef {
 public:
  static constexpr const char* kDefaultMarker = "\xC4\xA0";  // U+0120

  // Load from the toolkit's tokenizer JSON file:
  //   {"vocab": {surface: id, ...}, "merges": [[left, right], ...],
  //    "word_boundary_marker": str, "specials": [id, ...]}
  // Rejects duplicate surfaces/ids, merges whose parts or concatenated output
  // are missing from the vocab, and two merges producing the same surface.
  static TokenizerDef load(const std::string& path);
  static TokenizerDef from_json_text(std::string_view json_text, const std::string& origin);

  // Assemble programmatically (fixtures, tests). Same integrity checks as load.
  static TokenizerDef assemble(const std::vector<std::pair<std::string, TokenId>>& vocab,
                               const std::vector<std::pair<std::string, std::string>>& merges,
                               const std::string& marker,
                               const std::vector<TokenId>& specials);

  std::string to_json_text() const;  // canonical serialization (sorted vocab, ranked merges)
  void save(const std::string& path) const;

  std::size_t vocab_size() const { return surface_by_id_.size(); }
  TokenId max_id() const { return max_id_; }
  bool has_id(TokenId id) const;
  const std::string& surface(TokenId id) const;  // Data error if unknown
  std::optional<TokenId> id_of(std::string_view surface) const;
  bool is_special(TokenId id) const { return specials_.count(id) > 0; }
  // Atomic = no producing merge rule; never removable, terminates decomposition.
  bool is_atomic(TokenId id) const { return producing_.find(id) == producing_.end(); }
  const MergeRule* producing_rule(TokenId id) const;
  const std::vector<MergeRule>& merges() const { return merges_; }
  const std::string& marker() const { return marker_; }
  const std::unordered_set<TokenId>& specials() const { return specials_; }
  // SHA-256 of the source file bytes (or of the canonical serialization when
  // assembled in memory). Used for provenance checks.
  const std::string& fingerprint() const { return fingerprint_; }

  // Internal fast path for encoding: packed (left,right) -> (rank, out).
  struct PairInfo {
    std::int32_t rank;
    TokenId out;
  };
  const PairInfo* pair_info(TokenId a, TokenId b) const;

 private:
  TokenizerDef() = default;
  void index_and_check(const std::string& origin,
                       const std::vector<std::pair<std::string, std::string>>& merge_surfaces);

  std::unordered_map<std::string, TokenId> id_by_surface_;
  std::vector<std::string> surface_by_id_;  // dense by id; gaps flagged in present_
  std::vector<char> present_;
  TokenId max_id_ = -1;
  std::vector<MergeRule> merges_;
  std::unordered_map<std::uint64_t, PairInfo> pair_rank_;
  std::unordered_map<TokenId, MergeRule> producing_;
  std::unordered_set<TokenId> specials_;
  std::string marker_ = kDefaultMarker;
  std::string fingerprint_;
};

// Memoizes pre-token -> ids. Owned by one caller/thread; TokenizerDef itself
// holds no mutable state.
struct EncodeCache {
  std::unordered_map<std::string, std::vector<TokenId>> word_ids;
};

// Deterministic base encoding: whitespace pre-tokenization with each space
// folded into a word-boundary-marker prefix, then lowest-rank-first merges
// (leftmost wins rank ties). Unknown characters are a hard Data error naming
// the character and byte offset; no byte fallback.
TokenSeq encode_base(std::string_view text, const TokenizerDef& tok);
TokenSeq encode_base(std::string_view text, const TokenizerDef& tok, EncodeCache& cache);

// Exact inverse of encode_base over its admissible inputs:
// decode_base(encode_base(t)) == t byte-for-byte.
std::string decode_base(std::span<const TokenId> ids, const TokenizerDef& tok);
inline std::string decode_base(const TokenSeq& seq, const TokenizerDef& tok) {
  return decode_base(std::span<const TokenId>(seq.ids.data(), seq.ids.size()), tok);
}

// Recursively undo producing merges until every id is in `keep`. Surface is
// preserved exactly. Data error if an id outside `keep` has no producing rule.
std::vector<TokenId> decompose(TokenId id, const std::unordered_set<TokenId>& keep,
                               const TokenizerDef& tok);

}  // namespace ntok
