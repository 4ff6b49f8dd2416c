#include "ntok/selector.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <unordered_set>

#include <json.hpp>

#include "ntok/errors.hpp"

namespace ntok {

namespace {

std::int64_t weight_of(std::uint8_t len, ScoringMode mode) {
  return mode == ScoringMode::Algorithm1 ? len : len - 1;
}

// Worse-first so that priority_queue::top is the best candidate.
struct EntryWorse {
  const CandidateTable* table;

  struct Entry {
    std::int64_t score;
    std::uint32_t idx;
  };

  bool operator()(const Entry& a, const Entry& b) const {
    if (a.score != b.score) return a.score < b.score;
    const std::uint64_t fa = table->freq[a.idx];
    const std::uint64_t fb = table->freq[b.idx];
    if (fa != fb) return fa < fb;
    const std::uint8_t la = table->candidates[a.idx].len;
    const std::uint8_t lb = table->candidates[b.idx].len;
    if (la != lb) return la > lb;
    return a.idx > b.idx;  // canonical order doubles as id order within a length
  }
};

std::string truncation_warning(std::size_t got, std::size_t wanted, bool exhausted) {
  std::string why = exhausted ? "no further candidates were mined"
                              : "no remaining candidate has a positive score";
  return "selected " + std::to_string(got) + " of " + std::to_string(wanted) +
         " requested units: " + why;
}

}  // namespace

const char* to_string(ScoringMode m) {
  return m == ScoringMode::Algorithm1 ? "algorithm1" : "footnote";
}

const char* to_string(SelectionMode m) {
  return m == SelectionMode::OverlapAware ? "overlap_aware" : "naive_greedy";
}

ScoringMode scoring_mode_from(const std::string& s) {
  if (s == "algorithm1") return ScoringMode::Algorithm1;
  if (s == "footnote") return ScoringMode::Footnote;
  usage_error("unknown scoring mode \"" + s + "\" (expected algorithm1 or footnote)");
}

SelectionMode selection_mode_from(const std::string& s) {
  if (s == "overlap_aware") return SelectionMode::OverlapAware;
  if (s == "naive_greedy") return SelectionMode::NaiveGreedy;
  usage_error("unknown selection mode \"" + s + "\" (expected overlap_aware or naive_greedy)");
}

SelectionResult select_n_tokens(const CandidateTable& table, const SelectOptions& opt) {
  if (opt.m == 0) usage_error("unit budget m must be positive");
  const std::size_t n = table.candidates.size();

  std::vector<std::int64_t> score(n);
  for (std::size_t i = 0; i < n; ++i) {
    score[i] = static_cast<std::int64_t>(table.freq[i]) *
               weight_of(table.candidates[i].len, opt.scoring);
  }

  SelectionResult res;

  if (opt.selection == SelectionMode::NaiveGreedy) {
    // Initial scores only, no updates. Every mined candidate scores > 0.
    std::vector<std::uint32_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);
    EntryWorse worse{&table};
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      return worse(EntryWorse::Entry{score[b], b}, EntryWorse::Entry{score[a], a});
    });
    const std::size_t take = std::min(opt.m, n);
    res.picked.assign(order.begin(), order.begin() + take);
    if (take < opt.m) {
      res.truncated = true;
      res.warning = truncation_warning(take, opt.m, true);
    }
    return res;
  }

  // Overlap-aware: lazy max-heap; stale entries (score changed since push)
  // are discarded on pop.
  std::vector<std::vector<std::pair<std::uint32_t, std::uint64_t>>> adj(n);
  for (const auto& [key, cnt] : table.overlaps) {
    const auto a = static_cast<std::uint32_t>(key >> 32);
    const auto b = static_cast<std::uint32_t>(key & 0xffffffffu);
    adj[a].push_back({b, cnt});
    if (a != b) adj[b].push_back({a, cnt});
  }
  for (auto& lst : adj) std::sort(lst.begin(), lst.end());  // deterministic trace order

  EntryWorse worse{&table};
  std::priority_queue<EntryWorse::Entry, std::vector<EntryWorse::Entry>, EntryWorse> pq(worse);
  for (std::size_t i = 0; i < n; ++i) pq.push({score[i], static_cast<std::uint32_t>(i)});

  std::vector<char> taken(n, 0);
  bool exhausted_scores = false;
  while (res.picked.size() < opt.m && !pq.empty()) {
    const auto e = pq.top();
    pq.pop();
    if (taken[e.idx] || e.score != score[e.idx]) continue;
    if (e.score <= 0) {  // heap top is the global max, so nothing positive remains
      exhausted_scores = true;
      break;
    }
    taken[e.idx] = 1;
    res.picked.push_back(e.idx);

    const std::int64_t picked_weight = weight_of(table.candidates[e.idx].len, opt.scoring);
    for (const auto& [j, cnt] : adj[e.idx]) {
      if (taken[j]) continue;
      const std::int64_t w = opt.update_weight == UpdateWeight::Affected
                                 ? weight_of(table.candidates[j].len, opt.scoring)
                                 : picked_weight;
      const std::int64_t before = score[j];
      score[j] -= static_cast<std::int64_t>(cnt) * w;
      pq.push({score[j], j});
      if (opt.record_trace) res.trace.push_back({e.idx, j, before, score[j]});
    }
  }

  if (res.picked.size() < opt.m) {
    res.truncated = true;
    res.warning = truncation_warning(res.picked.size(), opt.m, !exhausted_scores);
  }
  return res;
}

std::vector<TokenId> removal_order(const TokenizerDef& tok,
                                   const std::unordered_map<TokenId, std::uint64_t>& old_freq) {
  std::vector<TokenId> pool;
  for (TokenId id = 0; id <= tok.max_id(); ++id) {
    if (tok.has_id(id) && !tok.is_special(id) && !tok.is_atomic(id)) pool.push_back(id);
  }
  auto freq = [&](TokenId id) -> std::uint64_t {
    auto it = old_freq.find(id);
    return it == old_freq.end() ? 0 : it->second;
  };
  std::sort(pool.begin(), pool.end(), [&](TokenId a, TokenId b) {
    const std::uint64_t fa = freq(a);
    const std::uint64_t fb = freq(b);
    if (fa != fb) return fa < fb;
    return a > b;
  });
  return pool;
}

std::vector<TokenId> pick_removable(const TokenizerDef& tok,
                                    const std::unordered_map<TokenId, std::uint64_t>& old_freq,
                                    std::size_t m) {
  if (m == 0) usage_error("removal count m must be positive");
  std::vector<TokenId> order = removal_order(tok, old_freq);
  if (order.size() < m) {
    data_error("cannot remove " + std::to_string(m) + " tokens: only " +
               std::to_string(order.size()) +
               " are removable; maximum feasible m is " + std::to_string(order.size()));
  }
  order.resize(m);
  return order;
}

std::string VocabPatch::to_json_text() const {
  nlohmann::ordered_json j;
  j["n_max"] = n_max;
  j["scoring_mode"] = scoring_mode;
  j["selection_mode"] = selection_mode;
  j["removed"] = removed;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& a : added) {
    nlohmann::ordered_json e;
    e["id"] = a.id;
    e["base_ids"] = a.base_ids;
    e["surface"] = a.surface;
    arr.push_back(std::move(e));
  }
  j["added"] = std::move(arr);
  j["source"] = {{"tokenizer_sha256", tokenizer_sha256}, {"corpus_sha256", corpus_sha256}};
  return j.dump(2) + "\n";
}

namespace {

void require_keys(const nlohmann::json& obj, const std::vector<std::string>& allowed,
                  const std::string& origin, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      data_error(origin + ": unknown key \"" + key + "\" in " + where);
    }
  }
  for (const auto& key : allowed) {
    if (!obj.contains(key)) data_error(origin + ": missing key \"" + key + "\" in " + where);
  }
}

}  // namespace

VocabPatch VocabPatch::from_json_text(std::string_view text, const std::string& origin) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    data_error(origin + ": " + e.what());
  }
  if (!j.is_object()) data_error(origin + ": patch must be a JSON object");
  require_keys(j, {"n_max", "scoring_mode", "selection_mode", "removed", "added", "source"},
               origin, "patch");

  VocabPatch p;
  if (!j["n_max"].is_number_integer()) data_error(origin + ": n_max must be an integer");
  p.n_max = j["n_max"].get<int>();
  if (p.n_max < 2 || p.n_max > kMaxSpan) {
    data_error(origin + ": n_max " + std::to_string(p.n_max) + " out of range [2, " +
               std::to_string(kMaxSpan) + "]");
  }
  if (!j["scoring_mode"].is_string() || !j["selection_mode"].is_string()) {
    data_error(origin + ": scoring_mode and selection_mode must be strings");
  }
  p.scoring_mode = j["scoring_mode"].get<std::string>();
  if (p.scoring_mode != "algorithm1" && p.scoring_mode != "footnote") {
    data_error(origin + ": unknown scoring_mode \"" + p.scoring_mode + "\"");
  }
  p.selection_mode = j["selection_mode"].get<std::string>();
  if (p.selection_mode != "overlap_aware" && p.selection_mode != "naive_greedy") {
    data_error(origin + ": unknown selection_mode \"" + p.selection_mode + "\"");
  }

  if (!j["removed"].is_array()) data_error(origin + ": removed must be an array");
  std::unordered_set<TokenId> seen_removed;
  for (const auto& r : j["removed"]) {
    if (!r.is_number_integer() || r.get<std::int64_t>() < 0) {
      data_error(origin + ": removed ids must be non-negative integers");
    }
    const TokenId id = r.get<TokenId>();
    if (!seen_removed.insert(id).second) {
      data_error(origin + ": removed id " + std::to_string(id) + " listed twice");
    }
    p.removed.push_back(id);
  }

  if (!j["added"].is_array()) data_error(origin + ": added must be an array");
  std::unordered_set<IdSpan, IdSpanHash> seen_spans;
  for (const auto& e : j["added"]) {
    if (!e.is_object()) data_error(origin + ": added entries must be objects");
    require_keys(e, {"id", "base_ids", "surface"}, origin, "added entry");
    Added a;
    if (!e["id"].is_number_integer() || e["id"].get<std::int64_t>() < 0) {
      data_error(origin + ": added ids must be non-negative integers");
    }
    a.id = e["id"].get<TokenId>();
    if (!e["base_ids"].is_array()) data_error(origin + ": base_ids must be an array");
    for (const auto& b : e["base_ids"]) {
      if (!b.is_number_integer() || b.get<std::int64_t>() < 0) {
        data_error(origin + ": base_ids must be non-negative integers");
      }
      a.base_ids.push_back(b.get<TokenId>());
    }
    if (a.base_ids.size() < 2 || a.base_ids.size() > static_cast<std::size_t>(p.n_max)) {
      data_error(origin + ": added unit for id " + std::to_string(a.id) + " has " +
                 std::to_string(a.base_ids.size()) + " base ids (expected 2.." +
                 std::to_string(p.n_max) + ")");
    }
    if (!seen_spans.insert(IdSpan::of(a.base_ids)).second) {
      data_error(origin + ": duplicate added unit for id " + std::to_string(a.id));
    }
    if (!e["surface"].is_string()) data_error(origin + ": surface must be a string");
    a.surface = e["surface"].get<std::string>();
    p.added.push_back(std::move(a));
  }

  if (p.removed.size() != p.added.size()) {
    data_error(origin + ": removed lists " + std::to_string(p.removed.size()) +
               " ids but added lists " + std::to_string(p.added.size()) +
               " units; they must pair up one-to-one");
  }
  for (std::size_t i = 0; i < p.added.size(); ++i) {
    if (p.added[i].id != p.removed[i]) {
      data_error(origin + ": added unit " + std::to_string(i) + " carries id " +
                 std::to_string(p.added[i].id) + " but position " + std::to_string(i) +
                 " of removed is " + std::to_string(p.removed[i]));
    }
  }

  if (!j["source"].is_object()) data_error(origin + ": source must be an object");
  require_keys(j["source"], {"tokenizer_sha256", "corpus_sha256"}, origin, "source");
  if (!j["source"]["tokenizer_sha256"].is_string() || !j["source"]["corpus_sha256"].is_string()) {
    data_error(origin + ": source fingerprints must be strings");
  }
  p.tokenizer_sha256 = j["source"]["tokenizer_sha256"].get<std::string>();
  p.corpus_sha256 = j["source"]["corpus_sha256"].get<std::string>();
  return p;
}

void VocabPatch::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) io_error("cannot open " + path + " for writing");
  out << to_json_text();
  if (!out.flush()) io_error("failed writing " + path);
}

VocabPatch VocabPatch::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_error("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json_text(text, path);
}

BuildPatchResult build_patch(const TokenizerDef& tok, const CandidateTable& table,
                             const SelectOptions& opt) {
  SelectionResult sel = select_n_tokens(table, opt);

  BuildPatchResult out;
  out.truncated = sel.truncated;
  if (sel.truncated) out.warnings.push_back(sel.warning);

  std::unordered_set<TokenId> constituents;
  for (const std::uint32_t pos : sel.picked) {
    const IdSpan& span = table.candidates[pos];
    VocabPatch::Added a;
    a.base_ids.assign(span.ids.begin(), span.ids.begin() + span.len);
    for (const TokenId id : a.base_ids) {
      if (!tok.has_id(id)) {
        data_error("candidate table references id " + std::to_string(id) +
                   " which is not in the tokenizer vocab; table and tokenizer do not match");
      }
      a.surface += tok.surface(id);
      constituents.insert(id);
    }
    out.patch.added.push_back(std::move(a));
  }

  const std::size_t need = out.patch.added.size();
  for (const TokenId id : removal_order(tok, table.old_token_freq)) {
    if (out.patch.removed.size() == need) break;
    if (constituents.count(id)) {
      ++out.vetoed;
      out.warnings.push_back("removal of id " + std::to_string(id) + " (\"" + tok.surface(id) +
                             "\") vetoed: it is a constituent of an added unit");
      continue;
    }
    out.patch.removed.push_back(id);
  }
  if (out.patch.removed.size() < need) {
    data_error("removable pool exhausted: needed " + std::to_string(need) + " ids but only " +
               std::to_string(out.patch.removed.size()) + " usable (" +
               std::to_string(out.vetoed) + " vetoed); maximum feasible m is " +
               std::to_string(out.patch.removed.size()));
  }
  for (std::size_t i = 0; i < need; ++i) out.patch.added[i].id = out.patch.removed[i];

  out.patch.n_max = table.n_max;
  out.patch.scoring_mode = to_string(opt.scoring);
  out.patch.selection_mode = to_string(opt.selection);
  out.patch.tokenizer_sha256 = table.tokenizer_sha256;
  out.patch.corpus_sha256 = table.corpus_sha256;
  return out;
}

}  // namespace ntok
