#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ntok/selector.hpp"
#include "ntok/tokenizer.hpp"
#include "ntok/types.hpp"

namespace ntok {

// A base tokenizer with a patch applied: each removed base id is reassigned
// to an added multi-token unit, every other id is kept as-is. Construction
// validates the pairing against the tokenizer and precomputes kept-id
// decompositions for the removed ids.
class PatchedVocab {
 public:
  PatchedVocab(std::shared_ptr<const TokenizerDef> base, VocabPatch patch);

  const TokenizerDef& base() const { return *base_; }
  const VocabPatch& patch() const { return patch_; }
  int n_max() const { return patch_.n_max; }
  std::size_t vocab_size() const { return base_->vocab_size(); }  // removals == additions

  bool is_kept(TokenId id) const;  // base id that survived the patch
  bool is_unit(TokenId id) const;  // reassigned id hosting an added unit
  const std::vector<TokenId>& unit_ids() const { return unit_ids_; }
  const std::vector<TokenId>& unit_base_ids(TokenId id) const;  // Data error if not a unit
  const std::string& unit_surface(TokenId id) const;            // Data error if not a unit

  // Kept-id expansion of a removed base id; Data error for other ids.
  const std::vector<TokenId>& decomposition(TokenId removed_id) const;

  // Unit id for a window of kept ids, if one was added.
  std::optional<TokenId> unit_for(std::span<const TokenId> kept_ids) const;

 private:
  std::shared_ptr<const TokenizerDef> base_;
  VocabPatch patch_;
  std::vector<char> kept_;  // by id; false for removed ids
  std::vector<TokenId> unit_ids_;
  std::unordered_map<TokenId, std::uint32_t> unit_pos_;  // id -> index into patch_.added
  std::unordered_map<IdSpan, TokenId, IdSpanHash> unit_by_span_;
  std::unordered_map<TokenId, std::vector<TokenId>> decomp_;
};

// Rewrite a base-encoded sequence: expand removed ids into kept ids, then
// fold windows into added units. Greedy takes the longest unit at each
// position left to right; optimal minimizes the token count (ties resolved
// toward the longest window, scanning left to right). Special ids are never
// folded and pass through unchanged.
std::vector<TokenId> patch_token_ids(std::span<const TokenId> base_ids, const PatchedVocab& pv,
                                     bool optimal = false);

TokenSeq encode_patched(std::string_view text, const PatchedVocab& pv);
TokenSeq encode_patched(std::string_view text, const PatchedVocab& pv, EncodeCache& cache);
TokenSeq encode_patched_optimal(std::string_view text, const PatchedVocab& pv);

// Inverse of encode_patched for kept/unit ids; Data error on any other id.
std::string decode_patched(std::span<const TokenId> ids, const PatchedVocab& pv);
std::string decode_patched(const TokenSeq& seq, const PatchedVocab& pv);

struct SavingsRow {
  std::uint64_t base = 0;
  std::uint64_t greedy = 0;
  std::uint64_t optimal = 0;
};

struct SavingsTotals {
  std::uint64_t docs = 0;
  std::uint64_t base_tokens = 0;
  std::uint64_t greedy_tokens = 0;
  std::uint64_t optimal_tokens = 0;

  void add(const SavingsRow& r);
  double greedy_pct() const;   // percent of base tokens eliminated
  double optimal_pct() const;
};

SavingsRow measure_doc(std::span<const TokenId> base_ids, const PatchedVocab& pv);
// Per-doc rows, sharded across threads (0 = hardware concurrency).
std::vector<SavingsRow> measure_docs(const IdDocs& docs, const PatchedVocab& pv, int threads = 0);
SavingsTotals measure_savings(const IdDocs& docs, const PatchedVocab& pv, int threads = 0);

}  // namespace ntok
