#include "ntok/patched.hpp"

#include <algorithm>
#include <thread>
#include <unordered_set>

#include "ntok/errors.hpp"

namespace ntok {

PatchedVocab::PatchedVocab(std::shared_ptr<const TokenizerDef> base, VocabPatch patch)
    : base_(std::move(base)), patch_(std::move(patch)) {
  if (!base_) usage_error("patched vocab needs a base tokenizer");
  const TokenizerDef& tok = *base_;
  if (patch_.n_max < 2 || patch_.n_max > kMaxSpan) {
    data_error("patch n_max " + std::to_string(patch_.n_max) + " out of range [2, " +
               std::to_string(kMaxSpan) + "]");
  }
  if (patch_.removed.size() != patch_.added.size()) {
    data_error("patch removes " + std::to_string(patch_.removed.size()) + " ids but adds " +
               std::to_string(patch_.added.size()) + " units");
  }
  if (!patch_.tokenizer_sha256.empty() && patch_.tokenizer_sha256 != tok.fingerprint()) {
    data_error("patch was built for tokenizer " + patch_.tokenizer_sha256 +
               " but this tokenizer is " + tok.fingerprint());
  }

  kept_.assign(static_cast<std::size_t>(tok.max_id()) + 1, 0);
  for (TokenId id = 0; id <= tok.max_id(); ++id) kept_[id] = tok.has_id(id) ? 1 : 0;
  std::unordered_set<TokenId> keep_set;
  for (TokenId id = 0; id <= tok.max_id(); ++id) {
    if (kept_[id]) keep_set.insert(id);
  }
  for (const TokenId id : patch_.removed) {
    if (!tok.has_id(id)) data_error("patch removes id " + std::to_string(id) + " which does not exist");
    if (tok.is_special(id)) data_error("patch removes special id " + std::to_string(id));
    if (!kept_[id]) data_error("patch removes id " + std::to_string(id) + " twice");
    kept_[id] = 0;
    keep_set.erase(id);
  }

  for (std::size_t i = 0; i < patch_.added.size(); ++i) {
    auto& a = patch_.added[i];
    if (a.id != patch_.removed[i]) {
      data_error("added unit " + std::to_string(i) + " carries id " + std::to_string(a.id) +
                 " but the removed id at that position is " + std::to_string(patch_.removed[i]));
    }
    if (a.base_ids.size() < 2 || a.base_ids.size() > static_cast<std::size_t>(patch_.n_max)) {
      data_error("added unit for id " + std::to_string(a.id) + " has " +
                 std::to_string(a.base_ids.size()) + " base ids (expected 2.." +
                 std::to_string(patch_.n_max) + ")");
    }
    std::string surface;
    for (const TokenId c : a.base_ids) {
      if (!tok.has_id(c)) {
        data_error("unit id " + std::to_string(a.id) + " uses constituent " + std::to_string(c) +
                   " which is not in the vocab");
      }
      if (!kept_[c]) {
        data_error("unit id " + std::to_string(a.id) + " uses constituent " + std::to_string(c) +
                   " which the patch removed");
      }
      if (tok.is_special(c)) {
        data_error("unit id " + std::to_string(a.id) + " uses special constituent " +
                   std::to_string(c));
      }
      surface += tok.surface(c);
    }
    if (!a.surface.empty() && a.surface != surface) {
      data_error("unit id " + std::to_string(a.id) + " lists surface \"" + a.surface +
                 "\" but its constituents spell \"" + surface + "\"");
    }
    a.surface = std::move(surface);
    if (!unit_by_span_.emplace(IdSpan::of(a.base_ids), a.id).second) {
      data_error("two added units share the same base-id sequence (second is id " +
                 std::to_string(a.id) + ")");
    }
    unit_pos_[a.id] = static_cast<std::uint32_t>(i);
    unit_ids_.push_back(a.id);
  }

  for (const TokenId id : patch_.removed) {
    decomp_[id] = decompose(id, keep_set, tok);
  }
}

bool PatchedVocab::is_kept(TokenId id) const {
  return id >= 0 && static_cast<std::size_t>(id) < kept_.size() && kept_[id];
}

bool PatchedVocab::is_unit(TokenId id) const { return unit_pos_.count(id) > 0; }

const std::vector<TokenId>& PatchedVocab::unit_base_ids(TokenId id) const {
  auto it = unit_pos_.find(id);
  if (it == unit_pos_.end()) data_error("id " + std::to_string(id) + " is not an added unit");
  return patch_.added[it->second].base_ids;
}

const std::string& PatchedVocab::unit_surface(TokenId id) const {
  auto it = unit_pos_.find(id);
  if (it == unit_pos_.end()) data_error("id " + std::to_string(id) + " is not an added unit");
  return patch_.added[it->second].surface;
}

const std::vector<TokenId>& PatchedVocab::decomposition(TokenId removed_id) const {
  auto it = decomp_.find(removed_id);
  if (it == decomp_.end()) {
    data_error("id " + std::to_string(removed_id) + " was not removed by the patch");
  }
  return it->second;
}

std::optional<TokenId> PatchedVocab::unit_for(std::span<const TokenId> kept_ids) const {
  if (kept_ids.size() < 2 || kept_ids.size() > static_cast<std::size_t>(kMaxSpan)) return {};
  auto it = unit_by_span_.find(IdSpan::of(kept_ids));
  if (it == unit_by_span_.end()) return {};
  return it->second;
}

namespace {

// Fold one special-free run of kept ids into units, appending to out.
void fold_greedy(std::span<const TokenId> run, const PatchedVocab& pv,
                 std::vector<TokenId>& out) {
  const std::size_t n_max = static_cast<std::size_t>(pv.n_max());
  std::size_t i = 0;
  while (i < run.size()) {
    bool matched = false;
    for (std::size_t k = std::min(n_max, run.size() - i); k >= 2; --k) {
      if (auto unit = pv.unit_for(run.subspan(i, k))) {
        out.push_back(*unit);
        i += k;
        matched = true;
        break;
      }
    }
    if (!matched) {
      out.push_back(run[i]);
      ++i;
    }
  }
}

// Minimum-token cover of the run; among optima, the longest window wins at
// each position scanning left to right.
void fold_optimal(std::span<const TokenId> run, const PatchedVocab& pv,
                  std::vector<TokenId>& out) {
  const std::size_t L = run.size();
  if (L == 0) return;
  const std::size_t n_max = static_cast<std::size_t>(pv.n_max());
  std::vector<std::uint32_t> cost(L + 1, 0);
  std::vector<std::uint8_t> step(L + 1, 1);
  for (std::size_t i = L; i-- > 0;) {
    cost[i] = 1 + cost[i + 1];  // singleton always available
    step[i] = 1;
    for (std::size_t k = 2; k <= std::min(n_max, L - i); ++k) {
      if (!pv.unit_for(run.subspan(i, k))) continue;
      const std::uint32_t c = 1 + cost[i + k];
      if (c < cost[i] || (c == cost[i] && k > step[i])) {
        cost[i] = c;
        step[i] = static_cast<std::uint8_t>(k);
      }
    }
  }
  std::size_t i = 0;
  while (i < L) {
    const std::size_t k = step[i];
    if (k == 1) {
      out.push_back(run[i]);
    } else {
      out.push_back(*pv.unit_for(run.subspan(i, k)));
    }
    i += k;
  }
}

}  // namespace

std::vector<TokenId> patch_token_ids(std::span<const TokenId> base_ids, const PatchedVocab& pv,
                                     bool optimal) {
  const TokenizerDef& tok = pv.base();

  // Expand removed ids into kept ids; specials and kept ids pass through.
  std::vector<TokenId> flat;
  flat.reserve(base_ids.size());
  std::vector<std::size_t> special_at;  // indices into flat
  for (std::size_t i = 0; i < base_ids.size(); ++i) {
    const TokenId id = base_ids[i];
    if (pv.is_kept(id)) {
      if (tok.is_special(id)) special_at.push_back(flat.size());
      flat.push_back(id);
    } else if (id >= 0 && id <= tok.max_id() && tok.has_id(id)) {
      const auto& expansion = pv.decomposition(id);
      flat.insert(flat.end(), expansion.begin(), expansion.end());
    } else {
      data_error("unknown token id " + std::to_string(id) + " at index " + std::to_string(i));
    }
  }

  std::vector<TokenId> out;
  out.reserve(flat.size());
  std::size_t start = 0;
  auto fold = [&](std::span<const TokenId> run) {
    if (optimal) {
      fold_optimal(run, pv, out);
    } else {
      fold_greedy(run, pv, out);
    }
  };
  for (const std::size_t s : special_at) {
    fold(std::span<const TokenId>(flat).subspan(start, s - start));
    out.push_back(flat[s]);
    start = s + 1;
  }
  fold(std::span<const TokenId>(flat).subspan(start));
  return out;
}

TokenSeq encode_patched(std::string_view text, const PatchedVocab& pv, EncodeCache& cache) {
  TokenSeq base = encode_base(text, pv.base(), cache);
  return {patch_token_ids(base.ids, pv, false), Provenance::Patched};
}

TokenSeq encode_patched(std::string_view text, const PatchedVocab& pv) {
  EncodeCache cache;
  return encode_patched(text, pv, cache);
}

TokenSeq encode_patched_optimal(std::string_view text, const PatchedVocab& pv) {
  TokenSeq base = encode_base(text, pv.base());
  return {patch_token_ids(base.ids, pv, true), Provenance::Patched};
}

std::string decode_patched(std::span<const TokenId> ids, const PatchedVocab& pv) {
  const TokenizerDef& tok = pv.base();
  std::string joined;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const TokenId id = ids[i];
    if (pv.is_unit(id)) {
      joined += pv.unit_surface(id);
    } else if (pv.is_kept(id)) {
      joined += tok.surface(id);
    } else {
      data_error("unknown token id " + std::to_string(id) + " at index " + std::to_string(i));
    }
  }
  const std::string& marker = tok.marker();
  std::string out;
  out.reserve(joined.size());
  std::size_t pos = 0;
  while (pos < joined.size()) {
    if (joined.compare(pos, marker.size(), marker) == 0) {
      out += ' ';
      pos += marker.size();
    } else {
      out += joined[pos];
      ++pos;
    }
  }
  return out;
}

std::string decode_patched(const TokenSeq& seq, const PatchedVocab& pv) {
  return decode_patched(std::span<const TokenId>(seq.ids), pv);
}

void SavingsTotals::add(const SavingsRow& r) {
  ++docs;
  base_tokens += r.base;
  greedy_tokens += r.greedy;
  optimal_tokens += r.optimal;
}

double SavingsTotals::greedy_pct() const {
  if (base_tokens == 0) return 0.0;
  return 100.0 * (1.0 - static_cast<double>(greedy_tokens) / static_cast<double>(base_tokens));
}

double SavingsTotals::optimal_pct() const {
  if (base_tokens == 0) return 0.0;
  return 100.0 * (1.0 - static_cast<double>(optimal_tokens) / static_cast<double>(base_tokens));
}

SavingsRow measure_doc(std::span<const TokenId> base_ids, const PatchedVocab& pv) {
  SavingsRow row;
  row.base = base_ids.size();
  row.greedy = patch_token_ids(base_ids, pv, false).size();
  row.optimal = patch_token_ids(base_ids, pv, true).size();
  return row;
}

std::vector<SavingsRow> measure_docs(const IdDocs& docs, const PatchedVocab& pv, int threads) {
  std::vector<SavingsRow> rows(docs.size());
  unsigned n = threads > 0 ? static_cast<unsigned>(threads) : std::thread::hardware_concurrency();
  if (n == 0) n = 1;
  n = std::min<unsigned>(n, docs.size() == 0 ? 1 : static_cast<unsigned>(docs.size()));
  if (n <= 1) {
    for (std::size_t i = 0; i < docs.size(); ++i) rows[i] = measure_doc(docs[i], pv);
    return rows;
  }
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < n; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < docs.size(); i += n) rows[i] = measure_doc(docs[i], pv);
    });
  }
  for (auto& th : pool) th.join();
  return rows;
}

SavingsTotals measure_savings(const IdDocs& docs, const PatchedVocab& pv, int threads) {
  SavingsTotals totals;
  for (const auto& row : measure_docs(docs, pv, threads)) totals.add(row);
  return totals;
}

}  // namespace ntok
