#include "ntok/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "ntok/errors.hpp"
#include "ntok/sha256.hpp"

namespace ntok {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

inline std::uint64_t pair_key(TokenId a, TokenId b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

inline bool is_ascii_ws(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Decodes one UTF-8 codepoint starting at `i`; returns its byte length.
// Data error on malformed sequences.
std::size_t utf8_char_len(std::string_view s, std::size_t i) {
  unsigned char c = static_cast<unsigned char>(s[i]);
  std::size_t n;
  if (c < 0x80) n = 1;
  else if ((c >> 5) == 0x6) n = 2;
  else if ((c >> 4) == 0xe) n = 3;
  else if ((c >> 3) == 0x1e) n = 4;
  else data_error("malformed UTF-8 at byte offset " + std::to_string(i));
  if (i + n > s.size()) data_error("truncated UTF-8 sequence at byte offset " + std::to_string(i));
  for (std::size_t k = 1; k < n; ++k)
    if ((static_cast<unsigned char>(s[i + k]) >> 6) != 0x2)
      data_error("malformed UTF-8 at byte offset " + std::to_string(i + k));
  return n;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) io_error("read failed: " + path);
  return ss.str();
}

// One pre-token plus, lazily on the error path, the original byte offset of
// each of its characters (markers map back to the space they encode).
struct PreToken {
  std::string text;
  std::vector<std::size_t> offsets;
};

std::vector<PreToken> pre_tokenize(std::string_view text, const std::string& marker) {
  std::vector<PreToken> out;
  PreToken cur;
  bool cur_is_ws_run = false;
  auto flush = [&] {
    if (!cur.text.empty()) out.push_back(std::move(cur));
    cur = PreToken{};
  };
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t n = utf8_char_len(text, i);
    if (n == 1 && text[i] == ' ') {
      flush();
      cur_is_ws_run = false;
      cur.text += marker;
      for (std::size_t k = marker.size(); k > 0; --k) cur.offsets.push_back(i);
    } else if (n == 1 && is_ascii_ws(static_cast<unsigned char>(text[i]))) {
      if (!cur_is_ws_run) {
        flush();
        cur_is_ws_run = true;
      }
      cur.text += text[i];
      cur.offsets.push_back(i);
    } else {
      if (cur_is_ws_run) {
        flush();
        cur_is_ws_run = false;
      }
      cur.text.append(text.substr(i, n));
      for (std::size_t k = 0; k < n; ++k) cur.offsets.push_back(i);
    }
    i += n;
  }
  flush();
  return out;
}

std::vector<TokenId> encode_pre_token(const PreToken& pt, const TokenizerDef& tok) {
  std::vector<TokenId> ids;
  std::size_t i = 0;
  while (i < pt.text.size()) {
    std::size_t n = utf8_char_len(pt.text, i);
    auto id = tok.id_of(std::string_view(pt.text).substr(i, n));
    if (!id) {
      std::size_t off = i < pt.offsets.size() ? pt.offsets[i] : 0;
      data_error("unrepresentable character '" + pt.text.substr(i, n) + "' at byte offset " +
                 std::to_string(off));
    }
    ids.push_back(*id);
    i += n;
  }
  // Lowest-rank merge first; among equal ranks the leftmost pair wins.
  while (ids.size() > 1) {
    int best_rank = -1;
    std::size_t best_at = 0;
    TokenId best_out = -1;
    for (std::size_t k = 0; k + 1 < ids.size(); ++k) {
      const auto* info = tok.pair_info(ids[k], ids[k + 1]);
      if (info && (best_rank < 0 || info->rank < best_rank)) {
        best_rank = info->rank;
        best_at = k;
        best_out = info->out;
      }
    }
    if (best_rank < 0) break;
    ids[best_at] = best_out;
    ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(best_at) + 1);
  }
  return ids;
}

}  // namespace

// ---- TokenizerDef ----

bool TokenizerDef::has_id(TokenId id) const {
  return id >= 0 && static_cast<std::size_t>(id) < present_.size() && present_[id];
}

const std::string& TokenizerDef::surface(TokenId id) const {
  if (!has_id(id)) data_error("unknown token id " + std::to_string(id));
  return surface_by_id_[static_cast<std::size_t>(id)];
}

std::optional<TokenId> TokenizerDef::id_of(std::string_view surface) const {
  auto it = id_by_surface_.find(std::string(surface));
  if (it == id_by_surface_.end()) return std::nullopt;
  return it->second;
}

const MergeRule* TokenizerDef::producing_rule(TokenId id) const {
  auto it = producing_.find(id);
  return it == producing_.end() ? nullptr : &it->second;
}

const TokenizerDef::PairInfo* TokenizerDef::pair_info(TokenId a, TokenId b) const {
  auto it = pair_rank_.find(pair_key(a, b));
  return it == pair_rank_.end() ? nullptr : &it->second;
}

TokenizerDef TokenizerDef::load(const std::string& path) {
  std::string text = read_file(path);
  TokenizerDef t = from_json_text(text, path);
  return t;
}

TokenizerDef TokenizerDef::from_json_text(std::string_view json_text, const std::string& origin) {
  // nlohmann silently collapses duplicate object keys, so duplicate vocab
  // surfaces are caught with a parse callback before they disappear.
  std::vector<std::string> key_stack;
  std::unordered_set<std::string> vocab_keys;
  std::string dup_surface;
  auto cb = [&](int depth, json::parse_event_t event, json& parsed) -> bool {
    if (event == json::parse_event_t::key && depth >= 1) {
      std::string k = parsed.get<std::string>();
      if (depth == 2 && !key_stack.empty() && key_stack[0] == "vocab") {
        if (!vocab_keys.insert(k).second && dup_surface.empty()) dup_surface = k;
      }
      key_stack.resize(static_cast<std::size_t>(depth));
      key_stack[static_cast<std::size_t>(depth) - 1] = std::move(k);
    }
    return true;
  };

  json j;
  try {
    j = json::parse(json_text, cb);
  } catch (const json::exception& e) {
    data_error(origin + ": JSON parse error: " + e.what());
  }
  if (!dup_surface.empty())
    data_error(origin + ": duplicate surface in vocab: \"" + dup_surface + "\"");
  if (!j.is_object()) data_error(origin + ": top level must be a JSON object");
  if (!j.contains("vocab") || !j["vocab"].is_object())
    data_error(origin + ": missing or non-object field \"vocab\"");
  if (!j.contains("merges") || !j["merges"].is_array())
    data_error(origin + ": missing or non-array field \"merges\"");

  TokenizerDef t;
  std::unordered_map<TokenId, std::string> seen_ids;
  for (auto it = j["vocab"].begin(); it != j["vocab"].end(); ++it) {
    if (!it.value().is_number_integer())
      data_error(origin + ": vocab id for \"" + it.key() + "\" must be an integer");
    auto id = it.value().get<std::int64_t>();
    if (id < 0) data_error(origin + ": negative token id for \"" + it.key() + "\"");
    if (id > 16'000'000) data_error(origin + ": token id out of range for \"" + it.key() + "\"");
    auto tid = static_cast<TokenId>(id);
    auto [pos, fresh] = seen_ids.emplace(tid, it.key());
    if (!fresh)
      data_error(origin + ": duplicate token id " + std::to_string(tid) + " (\"" + pos->second +
                 "\" and \"" + it.key() + "\")");
    t.id_by_surface_.emplace(it.key(), tid);
  }

  std::vector<std::pair<std::string, std::string>> merge_surfaces;
  for (const auto& m : j["merges"]) {
    if (!m.is_array() || m.size() != 2 || !m[0].is_string() || !m[1].is_string())
      data_error(origin + ": each merge must be a [left, right] pair of strings");
    merge_surfaces.emplace_back(m[0].get<std::string>(), m[1].get<std::string>());
  }

  if (j.contains("word_boundary_marker")) {
    if (!j["word_boundary_marker"].is_string())
      data_error(origin + ": \"word_boundary_marker\" must be a string");
    t.marker_ = j["word_boundary_marker"].get<std::string>();
  }
  if (j.contains("specials")) {
    if (!j["specials"].is_array()) data_error(origin + ": \"specials\" must be an array of ids");
    for (const auto& s : j["specials"]) {
      if (!s.is_number_integer()) data_error(origin + ": specials entries must be integers");
      t.specials_.insert(s.get<TokenId>());
    }
  }

  t.index_and_check(origin, merge_surfaces);
  // Hash the canonical form so identity survives reformatting.
  t.fingerprint_ = Sha256::hex(t.to_json_text());
  return t;
}

TokenizerDef TokenizerDef::assemble(const std::vector<std::pair<std::string, TokenId>>& vocab,
                                    const std::vector<std::pair<std::string, std::string>>& merges,
                                    const std::string& marker,
                                    const std::vector<TokenId>& specials) {
  TokenizerDef t;
  for (const auto& [s, id] : vocab) {
    if (id < 0 || id > 16'000'000) data_error("assemble: token id out of range for \"" + s + "\"");
    if (!t.id_by_surface_.emplace(s, id).second)
      data_error("assemble: duplicate surface \"" + s + "\"");
  }
  t.marker_ = marker;
  for (TokenId s : specials) t.specials_.insert(s);
  t.index_and_check("assemble", merges);
  t.fingerprint_ = Sha256::hex(t.to_json_text());
  return t;
}

void TokenizerDef::index_and_check(
    const std::string& origin,
    const std::vector<std::pair<std::string, std::string>>& merge_surfaces) {
  if (id_by_surface_.empty()) data_error(origin + ": vocab is empty");
  max_id_ = -1;
  std::unordered_map<TokenId, const std::string*> by_id;
  for (const auto& [s, id] : id_by_surface_) {
    if (s.empty()) data_error(origin + ": empty surface string in vocab");
    auto [pos, fresh] = by_id.emplace(id, &s);
    if (!fresh)
      data_error(origin + ": duplicate token id " + std::to_string(id) + " (\"" + *pos->second +
                 "\" and \"" + s + "\")");
    max_id_ = std::max(max_id_, id);
  }
  surface_by_id_.assign(static_cast<std::size_t>(max_id_) + 1, {});
  present_.assign(static_cast<std::size_t>(max_id_) + 1, 0);
  for (const auto& [s, id] : id_by_surface_) {
    surface_by_id_[static_cast<std::size_t>(id)] = s;
    present_[static_cast<std::size_t>(id)] = 1;
  }

  if (marker_.empty()) data_error(origin + ": word_boundary_marker must be non-empty");
  for (unsigned char c : marker_)
    if (is_ascii_ws(c)) data_error(origin + ": word_boundary_marker must not contain whitespace");

  for (TokenId s : specials_)
    if (!has_id(s)) data_error(origin + ": special id " + std::to_string(s) + " not in vocab");

  merges_.clear();
  merges_.reserve(merge_surfaces.size());
  pair_rank_.clear();
  producing_.clear();
  std::int32_t rank = 0;
  for (const auto& [l, r] : merge_surfaces) {
    auto li = id_of(l), ri = id_of(r);
    if (!li) data_error(origin + ": merge " + std::to_string(rank) + " left part \"" + l +
                        "\" not in vocab");
    if (!ri) data_error(origin + ": merge " + std::to_string(rank) + " right part \"" + r +
                        "\" not in vocab");
    auto oi = id_of(l + r);
    if (!oi) data_error(origin + ": merge " + std::to_string(rank) + " output \"" + l + r +
                        "\" not in vocab");
    MergeRule rule{*li, *ri, *oi};
    if (!pair_rank_.emplace(pair_key(rule.left, rule.right), PairInfo{rank, rule.out}).second)
      data_error(origin + ": duplicate merge rule (\"" + l + "\", \"" + r + "\")");
    if (!producing_.emplace(rule.out, rule).second)
      data_error(origin + ": two merge rules produce surface \"" + l + r + "\"");
    merges_.push_back(rule);
    ++rank;
  }
}

std::string TokenizerDef::to_json_text() const {
  ojson j;
  ojson vocab = ojson::object();
  std::vector<TokenId> ids;
  ids.reserve(id_by_surface_.size());
  for (std::size_t i = 0; i < present_.size(); ++i)
    if (present_[i]) ids.push_back(static_cast<TokenId>(i));
  for (TokenId id : ids) vocab[surface_by_id_[static_cast<std::size_t>(id)]] = id;
  j["vocab"] = std::move(vocab);
  ojson merges = ojson::array();
  for (const auto& m : merges_)
    merges.push_back({surface_by_id_[static_cast<std::size_t>(m.left)],
                      surface_by_id_[static_cast<std::size_t>(m.right)]});
  j["merges"] = std::move(merges);
  j["word_boundary_marker"] = marker_;
  std::vector<TokenId> sp(specials_.begin(), specials_.end());
  std::sort(sp.begin(), sp.end());
  j["specials"] = sp;
  return j.dump(2) + "\n";
}

void TokenizerDef::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) io_error("cannot write file: " + path);
  out << to_json_text();
  if (!out) io_error("write failed: " + path);
}

// ---- Operations ----

TokenSeq encode_base(std::string_view text, const TokenizerDef& tok) {
  EncodeCache cache;
  return encode_base(text, tok, cache);
}

TokenSeq encode_base(std::string_view text, const TokenizerDef& tok, EncodeCache& cache) {
  if (auto at = text.find(tok.marker()); at != std::string_view::npos)
    data_error("literal word-boundary marker in input at byte offset " + std::to_string(at));
  TokenSeq seq;
  seq.provenance = Provenance::Base;
  for (const auto& pt : pre_tokenize(text, tok.marker())) {
    auto it = cache.word_ids.find(pt.text);
    if (it == cache.word_ids.end())
      it = cache.word_ids.emplace(pt.text, encode_pre_token(pt, tok)).first;
    seq.ids.insert(seq.ids.end(), it->second.begin(), it->second.end());
  }
  return seq;
}

std::string decode_base(std::span<const TokenId> ids, const TokenizerDef& tok) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!tok.has_id(ids[i]))
      data_error("unknown token id " + std::to_string(ids[i]) + " at index " + std::to_string(i));
    out += tok.surface(ids[i]);
  }
  // Re-expand word-boundary markers to spaces.
  const std::string& m = tok.marker();
  std::string text;
  text.reserve(out.size());
  std::size_t i = 0;
  while (i < out.size()) {
    if (out.compare(i, m.size(), m) == 0) {
      text += ' ';
      i += m.size();
    } else {
      text += out[i];
      ++i;
    }
  }
  return text;
}

std::vector<TokenId> decompose(TokenId id, const std::unordered_set<TokenId>& keep,
                               const TokenizerDef& tok) {
  if (!tok.has_id(id)) data_error("decompose: unknown token id " + std::to_string(id));
  std::vector<TokenId> out;
  std::vector<TokenId> stack{id};
  while (!stack.empty()) {
    TokenId t = stack.back();
    stack.pop_back();
    if (keep.count(t)) {
      out.push_back(t);
      continue;
    }
    const MergeRule* rule = tok.producing_rule(t);
    if (!rule)
      data_error("decompose: token " + std::to_string(t) +
                 " (\"" + tok.surface(t) + "\") is outside the kept set and has no producing rule");
    stack.push_back(rule->right);
    stack.push_back(rule->left);
  }
  return out;
}

}  // namespace ntok
