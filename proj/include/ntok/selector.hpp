#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ntok/miner.hpp"
#include "ntok/tokenizer.hpp"

namespace ntok {

// Savings weight per candidate: occurrences * len, or * (len-1) which counts
// only the tokens actually eliminated by a merge.
enum class ScoringMode { Algorithm1, Footnote };
enum class SelectionMode { OverlapAware, NaiveGreedy };
// Which length feeds the overlap debit: the affected candidate's own length
// (default) or the just-selected candidate's. The latter is an intentionally
// undocumented variant, reachable only through the config file.
enum class UpdateWeight { Affected, Selected };

const char* to_string(ScoringMode m);
const char* to_string(SelectionMode m);
ScoringMode scoring_mode_from(const std::string& s);      // Usage error on junk
SelectionMode selection_mode_from(const std::string& s);  // Usage error on junk

struct SelectOptions {
  std::size_t m = 10000;
  SelectionMode selection = SelectionMode::OverlapAware;
  ScoringMode scoring = ScoringMode::Algorithm1;
  UpdateWeight update_weight = UpdateWeight::Affected;
  bool record_trace = false;
};

struct ScoreUpdate {
  std::uint32_t picked;    // candidate position that was just selected
  std::uint32_t affected;  // neighbour whose score was debited
  std::int64_t before;
  std::int64_t after;
};

struct SelectionResult {
  std::vector<std::uint32_t> picked;  // candidate positions in selection order
  bool truncated = false;             // fewer than m positive-score candidates
  std::string warning;                // human-readable reason when truncated
  std::vector<ScoreUpdate> trace;     // filled only when record_trace
};

// Iterative highest-savings-first selection. Overlap-aware mode debits every
// stored overlapping neighbour after each pick; naive mode never updates.
// Candidates whose current score is not positive are never selected. Ties:
// higher raw frequency, then shorter length, then ascending id order.
SelectionResult select_n_tokens(const CandidateTable& table, const SelectOptions& opt);

// Removal preference over non-special, non-atomic ids: lowest corpus
// frequency first (absent = 0), ties to the higher id, so later-merged rare
// tokens go first.
std::vector<TokenId> removal_order(const TokenizerDef& tok,
                                   const std::unordered_map<TokenId, std::uint64_t>& old_freq);

// First m of removal_order; Data error naming the maximum feasible m if the
// pool is smaller.
std::vector<TokenId> pick_removable(const TokenizerDef& tok,
                                    const std::unordered_map<TokenId, std::uint64_t>& old_freq,
                                    std::size_t m);

// A reversible vocabulary edit: removed base ids are reassigned, in order, to
// the added multi-token units.
struct VocabPatch {
  struct Added {
    TokenId id = -1;  // reassigned id (== removed[i] for the i-th entry)
    std::vector<TokenId> base_ids;
    std::string surface;
  };
  int n_max = 3;
  std::string scoring_mode = "algorithm1";
  std::string selection_mode = "overlap_aware";
  std::vector<TokenId> removed;
  std::vector<Added> added;
  std::string tokenizer_sha256;
  std::string corpus_sha256;

  std::string to_json_text() const;  // fixed field order; byte-stable
  static VocabPatch from_json_text(std::string_view text, const std::string& origin);
  void save(const std::string& path) const;
  static VocabPatch load(const std::string& path);
};

struct BuildPatchResult {
  VocabPatch patch;
  bool truncated = false;
  std::size_t vetoed = 0;  // removals skipped because the id joined an added unit
  std::vector<std::string> warnings;
};

// Selection + removal + id reassignment. If a would-be-removed id is a
// constituent of an added unit, that removal is vetoed (with a warning) and
// the next id in removal order is used instead.
BuildPatchResult build_patch(const TokenizerDef& tok, const CandidateTable& table,
                             const SelectOptions& opt);

}  // namespace ntok
