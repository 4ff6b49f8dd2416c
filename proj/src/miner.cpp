#include "ntok/miner.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <thread>

#include "ntok/errors.hpp"

namespace ntok {

namespace {

bool contains_ascii_ws(const std::string& s) {
  for (unsigned char c : s)
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') return true;
  return false;
}

bool contains(const std::string& s, const std::string& needle) {
  return s.find(needle) != std::string::npos;
}

int resolve_threads(int t) {
  if (t > 0) return t;
  unsigned hc = std::thread::hardware_concurrency();
  return hc ? static_cast<int>(hc) : 1;
}

std::vector<std::pair<std::size_t, std::size_t>> doc_chunks(std::size_t n, int threads) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t per = (n + threads - 1) / static_cast<std::size_t>(threads);
  if (per == 0) per = 1;
  for (std::size_t b = 0; b < n; b += per) out.emplace_back(b, std::min(n, b + per));
  if (out.empty()) out.emplace_back(0, 0);
  return out;
}

void check_options(const MinerOptions& opt, const TokenWordFlags* flags) {
  if (opt.n_max < 2 || opt.n_max > kMaxSpan)
    usage_error("n_max must be in [2, " + std::to_string(kMaxSpan) + "], got " +
                std::to_string(opt.n_max));
  if (opt.min_freq < 1) usage_error("min_freq must be >= 1");
  if (opt.words_only && flags == nullptr)
    usage_error("words_only mining needs a tokenizer to classify word boundaries");
}

// Calls f(i, k) for every window [i, i+k), k in 2..n_max, that stays inside
// the document, includes no special token, and satisfies words_only flags.
template <typename F>
void for_each_window(const std::vector<TokenId>& doc, int n_max,
                     const std::unordered_set<TokenId>& specials, const TokenWordFlags* flags,
                     F&& f) {
  const std::size_t n = doc.size();
  auto ok_flag = [&](const std::vector<char>& v, TokenId id, const char* what) -> bool {
    if (id < 0 || static_cast<std::size_t>(id) >= v.size())
      data_error(std::string("token id ") + std::to_string(id) + " outside tokenizer vocab (" +
                 what + " check)");
    return v[static_cast<std::size_t>(id)] != 0;
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (specials.count(doc[i])) continue;
    if (flags && !ok_flag(flags->start_ok, doc[i], "word start")) continue;
    std::size_t k_hi = std::min<std::size_t>(static_cast<std::size_t>(n_max), n - i);
    for (std::size_t k = 2; k <= k_hi; ++k) {
      TokenId last = doc[i + k - 1];
      if (specials.count(last)) break;
      if (flags && !ok_flag(flags->internal_ok, last, "word interior")) break;
      f(i, k);
    }
  }
}

using WindowCounts = std::unordered_map<IdSpan, std::uint64_t, IdSpanHash>;

void count_all_windows(const IdDocs& docs, std::size_t lo, std::size_t hi,
                       const MinerOptions& opt, const std::unordered_set<TokenId>& specials,
                       const TokenWordFlags* flags, WindowCounts& counts,
                       std::unordered_map<TokenId, std::uint64_t>* old_freq) {
  for (std::size_t d = lo; d < hi; ++d) {
    const auto& doc = docs[d];
    if (old_freq)
      for (TokenId id : doc) ++(*old_freq)[id];
    for_each_window(doc, opt.n_max, specials, flags, [&](std::size_t i, std::size_t k) {
      ++counts[IdSpan::of({doc.data() + i, k})];
    });
  }
}

std::vector<IdSpan> sorted_candidates(WindowCounts&& counts, std::uint64_t min_freq) {
  std::vector<IdSpan> out;
  out.reserve(counts.size());
  for (const auto& [span, c] : counts)
    if (c >= min_freq) out.push_back(span);
  std::sort(out.begin(), out.end(), [](const IdSpan& a, const IdSpan& b) { return a.lex_less(b); });
  return out;
}

// Occurrence matrix for one document: candidate position per (start, len) or -1.
void fill_occurrences(const std::vector<TokenId>& doc, int n_max,
                      const std::unordered_set<TokenId>& specials, const TokenWordFlags* flags,
                      const std::unordered_map<IdSpan, std::uint32_t, IdSpanHash>& index,
                      std::vector<std::int32_t>& occ) {
  const std::size_t width = static_cast<std::size_t>(n_max) - 1;
  occ.assign(doc.size() * width, -1);
  for_each_window(doc, n_max, specials, flags, [&](std::size_t i, std::size_t k) {
    auto it = index.find(IdSpan::of({doc.data() + i, k}));
    if (it != index.end()) occ[i * width + (k - 2)] = static_cast<std::int32_t>(it->second);
  });
}

// Every unordered pair of intersecting candidate occurrences, each counted
// once: pairs starting at distinct positions are claimed by the earlier start,
// pairs sharing a start by the shorter member.
void count_overlaps_range(const IdDocs& docs, std::size_t lo, std::size_t hi, int n_max,
                          const std::unordered_set<TokenId>& specials, const TokenWordFlags* flags,
                          const std::unordered_map<IdSpan, std::uint32_t, IdSpanHash>& index,
                          std::unordered_map<std::uint64_t, std::uint64_t>& out) {
  const std::size_t width = static_cast<std::size_t>(n_max) - 1;
  std::vector<std::int32_t> occ;
  for (std::size_t d = lo; d < hi; ++d) {
    const auto& doc = docs[d];
    fill_occurrences(doc, n_max, specials, flags, index, occ);
    for (std::size_t i = 0; i < doc.size(); ++i) {
      for (std::size_t a = 2; a <= width + 1; ++a) {
        std::int32_t A = occ[i * width + (a - 2)];
        if (A < 0) continue;
        for (std::size_t b = a + 1; b <= width + 1; ++b) {
          std::int32_t B = occ[i * width + (b - 2)];
          if (B >= 0) ++out[pack_pair(static_cast<std::uint32_t>(A), static_cast<std::uint32_t>(B))];
        }
        std::size_t j_hi = std::min(i + a - 1, doc.size() - 1);
        for (std::size_t j = i + 1; j <= j_hi; ++j) {
          for (std::size_t b = 2; b <= width + 1; ++b) {
            std::int32_t B = occ[j * width + (b - 2)];
            if (B >= 0)
              ++out[pack_pair(static_cast<std::uint32_t>(A), static_cast<std::uint32_t>(B))];
          }
        }
      }
    }
  }
}

template <typename MakeLocal, typename Work, typename MergeLocal>
void run_sharded(std::size_t n_docs, int threads, MakeLocal make_local, Work work,
                 MergeLocal merge) {
  auto chunks = doc_chunks(n_docs, threads);
  using Local = decltype(make_local());
  std::vector<Local> locals(chunks.size());
  for (auto& l : locals) l = make_local();
  if (chunks.size() == 1) {
    work(chunks[0].first, chunks[0].second, locals[0]);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(chunks.size());
    for (std::size_t c = 0; c < chunks.size(); ++c)
      pool.emplace_back([&, c] { work(chunks[c].first, chunks[c].second, locals[c]); });
    for (auto& t : pool) t.join();
  }
  for (auto& l : locals) merge(l);
}

}  // namespace

TokenWordFlags word_flags(const TokenizerDef& tok) {
  TokenWordFlags f;
  const std::size_t n = static_cast<std::size_t>(tok.max_id()) + 1;
  f.start_ok.assign(n, 0);
  f.internal_ok.assign(n, 0);
  const std::string& m = tok.marker();
  for (TokenId id = 0; static_cast<std::size_t>(id) < n; ++id) {
    if (!tok.has_id(id)) continue;
    const std::string& s = tok.surface(id);
    bool internal = !contains_ascii_ws(s) && !contains(s, m);
    f.internal_ok[static_cast<std::size_t>(id)] = internal ? 1 : 0;
    std::string body = s;
    if (body.compare(0, m.size(), m) == 0) body = body.substr(m.size());
    f.start_ok[static_cast<std::size_t>(id)] =
        (!contains_ascii_ws(body) && !contains(body, m)) ? 1 : 0;
  }
  return f;
}

std::optional<std::uint32_t> CandidateTable::find(std::span<const TokenId> ids) const {
  if (ids.size() < 1 || ids.size() > kMaxSpan) return std::nullopt;
  auto it = index.find(IdSpan::of(ids));
  if (it == index.end()) return std::nullopt;
  return it->second;
}

std::uint64_t CandidateTable::freq_of(std::span<const TokenId> ids) const {
  auto pos = find(ids);
  return pos ? freq[*pos] : 0;
}

std::uint64_t CandidateTable::overlap_count(std::uint32_t a, std::uint32_t b) const {
  auto it = overlaps.find(pack_pair(a, b));
  return it == overlaps.end() ? 0 : it->second;
}

std::vector<IdSpan> prepare_n_tokens(const IdDocs& docs, const MinerOptions& opt,
                                     const std::unordered_set<TokenId>& specials,
                                     const TokenWordFlags* flags) {
  check_options(opt, flags);
  if (!opt.words_only) flags = nullptr;
  WindowCounts counts;
  run_sharded(
      docs.size(), resolve_threads(opt.threads), [] { return WindowCounts{}; },
      [&](std::size_t lo, std::size_t hi, WindowCounts& local) {
        count_all_windows(docs, lo, hi, opt, specials, flags, local, nullptr);
      },
      [&](WindowCounts& local) {
        for (const auto& [k, v] : local) counts[k] += v;
      });
  return sorted_candidates(std::move(counts), opt.min_freq);
}

std::unordered_map<IdSpan, std::uint64_t, IdSpanHash> count_freqs(
    const IdDocs& docs, const std::vector<IdSpan>& candidates,
    const std::unordered_set<TokenId>& specials, int threads) {
  int n_max = 2;
  std::unordered_map<IdSpan, std::uint32_t, IdSpanHash> index;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].len < 2) usage_error("candidates must have length >= 2");
    n_max = std::max(n_max, static_cast<int>(candidates[i].len));
    index.emplace(candidates[i], static_cast<std::uint32_t>(i));
  }
  std::vector<std::uint64_t> totals(candidates.size(), 0);
  run_sharded(
      docs.size(), resolve_threads(threads),
      [&] { return std::vector<std::uint64_t>(candidates.size(), 0); },
      [&](std::size_t lo, std::size_t hi, std::vector<std::uint64_t>& local) {
        for (std::size_t d = lo; d < hi; ++d)
          for_each_window(docs[d], n_max, specials, nullptr, [&](std::size_t i, std::size_t k) {
            auto it = index.find(IdSpan::of({docs[d].data() + i, k}));
            if (it != index.end()) ++local[it->second];
          });
      },
      [&](std::vector<std::uint64_t>& local) {
        for (std::size_t i = 0; i < totals.size(); ++i) totals[i] += local[i];
      });
  std::unordered_map<IdSpan, std::uint64_t, IdSpanHash> out;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (totals[i] > 0) out.emplace(candidates[i], totals[i]);
  return out;
}

std::unordered_map<std::uint64_t, std::uint64_t> count_overlaps(
    const IdDocs& docs, const std::vector<IdSpan>& candidates,
    const std::unordered_set<TokenId>& specials, int threads) {
  int n_max = 2;
  std::unordered_map<IdSpan, std::uint32_t, IdSpanHash> index;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    n_max = std::max(n_max, static_cast<int>(candidates[i].len));
    index.emplace(candidates[i], static_cast<std::uint32_t>(i));
  }
  std::unordered_map<std::uint64_t, std::uint64_t> out;
  run_sharded(
      docs.size(), resolve_threads(threads),
      [] { return std::unordered_map<std::uint64_t, std::uint64_t>{}; },
      [&](std::size_t lo, std::size_t hi, std::unordered_map<std::uint64_t, std::uint64_t>& local) {
        count_overlaps_range(docs, lo, hi, n_max, specials, nullptr, index, local);
      },
      [&](std::unordered_map<std::uint64_t, std::uint64_t>& local) {
        for (const auto& [k, v] : local) out[k] += v;
      });
  return out;
}

CandidateTable build_candidate_table(const IdDocs& docs, const MinerOptions& opt,
                                     const std::unordered_set<TokenId>& specials,
                                     const TokenWordFlags* flags) {
  check_options(opt, flags);
  if (!opt.words_only) flags = nullptr;
  const int threads = resolve_threads(opt.threads);

  CandidateTable t;
  t.n_max = opt.n_max;
  t.min_freq = opt.min_freq;
  t.words_only = opt.words_only;
  t.doc_count = docs.size();

  struct Pass1 {
    WindowCounts counts;
    std::unordered_map<TokenId, std::uint64_t> old_freq;
  };
  WindowCounts counts;
  run_sharded(
      docs.size(), threads, [] { return Pass1{}; },
      [&](std::size_t lo, std::size_t hi, Pass1& local) {
        count_all_windows(docs, lo, hi, opt, specials, flags, local.counts, &local.old_freq);
      },
      [&](Pass1& local) {
        for (const auto& [k, v] : local.counts) counts[k] += v;
        for (const auto& [k, v] : local.old_freq) t.old_token_freq[k] += v;
      });
  for (const auto& doc : docs) t.total_tokens += doc.size();

  t.candidates = sorted_candidates(std::move(counts), opt.min_freq);
  t.freq.assign(t.candidates.size(), 0);
  for (std::size_t i = 0; i < t.candidates.size(); ++i)
    t.index.emplace(t.candidates[i], static_cast<std::uint32_t>(i));

  run_sharded(
      docs.size(), threads, [] { return std::vector<std::uint64_t>{}; },
      [&](std::size_t lo, std::size_t hi, std::vector<std::uint64_t>& local) {
        local.assign(t.candidates.size(), 0);
        for (std::size_t d = lo; d < hi; ++d)
          for_each_window(docs[d], opt.n_max, specials, flags, [&](std::size_t i, std::size_t k) {
            auto it = t.index.find(IdSpan::of({docs[d].data() + i, k}));
            if (it != t.index.end()) ++local[it->second];
          });
      },
      [&](std::vector<std::uint64_t>& local) {
        if (local.empty()) return;
        for (std::size_t i = 0; i < t.freq.size(); ++i) t.freq[i] += local[i];
      });

  run_sharded(
      docs.size(), threads, [] { return std::unordered_map<std::uint64_t, std::uint64_t>{}; },
      [&](std::size_t lo, std::size_t hi, std::unordered_map<std::uint64_t, std::uint64_t>& local) {
        count_overlaps_range(docs, lo, hi, opt.n_max, specials, flags, t.index, local);
      },
      [&](std::unordered_map<std::uint64_t, std::uint64_t>& local) {
        for (const auto& [k, v] : local) t.overlaps[k] += v;
      });
  return t;
}

// ---- AVCT cache serialization ----

namespace {

constexpr char kMagic[4] = {'A', 'V', 'C', 'T'};
constexpr std::uint32_t kVersion = 1;

struct Writer {
  std::ofstream out;
  explicit Writer(const std::string& path) : out(path, std::ios::binary) {
    if (!out) io_error("cannot write file: " + path);
  }
  void bytes(const void* p, std::size_t n) { out.write(static_cast<const char*>(p), n); }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) {
    std::uint8_t b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
    bytes(b, 4);
  }
  void u64(std::uint64_t v) {
    std::uint8_t b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
    bytes(b, 8);
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
};

struct Reader {
  std::ifstream in;
  std::string path;
  explicit Reader(const std::string& p) : in(p, std::ios::binary), path(p) {
    if (!in) io_error("cannot open file: " + p);
  }
  void bytes(void* p, std::size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) data_error(path + ": truncated cache file");
  }
  std::uint8_t u8() {
    std::uint8_t v;
    bytes(&v, 1);
    return v;
  }
  std::uint32_t u32() {
    std::uint8_t b[4];
    bytes(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint8_t b[8];
    bytes(b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::string str(std::size_t max = 1 << 20) {
    std::uint32_t n = u32();
    if (n > max) data_error(path + ": oversized string in cache file");
    std::string s(n, '\0');
    if (n) bytes(s.data(), n);
    return s;
  }
};

}  // namespace

void CandidateTable::save(const std::string& path) const {
  Writer w(path);
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(n_max));
  w.u64(min_freq);
  w.u8(words_only ? 1 : 0);
  w.u64(total_tokens);
  w.u64(doc_count);
  w.str(tokenizer_sha256);
  w.str(corpus_sha256);

  w.u64(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    w.u8(candidates[i].len);
    for (int k = 0; k < candidates[i].len; ++k) w.i32(candidates[i].ids[k]);
    w.u64(freq[i]);
  }

  std::vector<std::pair<std::uint64_t, std::uint64_t>> ov(overlaps.begin(), overlaps.end());
  std::sort(ov.begin(), ov.end());
  w.u64(ov.size());
  for (const auto& [key, count] : ov) {
    w.u32(static_cast<std::uint32_t>(key >> 32));
    w.u32(static_cast<std::uint32_t>(key & 0xffffffffu));
    w.u64(count);
  }

  std::vector<std::pair<TokenId, std::uint64_t>> of(old_token_freq.begin(), old_token_freq.end());
  std::sort(of.begin(), of.end());
  w.u64(of.size());
  for (const auto& [id, count] : of) {
    w.i32(id);
    w.u64(count);
  }
  w.out.flush();
  if (!w.out) io_error("write failed: " + path);
}

CandidateTable CandidateTable::load(const std::string& path) {
  Reader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) data_error(path + ": not a candidate cache (bad magic)");
  std::uint32_t version = r.u32();
  if (version != kVersion)
    data_error(path + ": unsupported cache version " + std::to_string(version));

  CandidateTable t;
  t.n_max = static_cast<int>(r.u32());
  if (t.n_max < 2 || t.n_max > kMaxSpan) data_error(path + ": corrupt cache (n_max out of range)");
  t.min_freq = r.u64();
  t.words_only = r.u8() != 0;
  t.total_tokens = r.u64();
  t.doc_count = r.u64();
  t.tokenizer_sha256 = r.str(128);
  t.corpus_sha256 = r.str(128);

  std::uint64_t n_cand = r.u64();
  t.candidates.reserve(n_cand);
  t.freq.reserve(n_cand);
  for (std::uint64_t i = 0; i < n_cand; ++i) {
    IdSpan s;
    s.len = r.u8();
    if (s.len < 2 || s.len > t.n_max) data_error(path + ": corrupt cache (candidate length)");
    for (int k = 0; k < s.len; ++k) s.ids[k] = r.i32();
    t.candidates.push_back(s);
    t.freq.push_back(r.u64());
    t.index.emplace(s, static_cast<std::uint32_t>(i));
  }
  if (t.index.size() != t.candidates.size())
    data_error(path + ": corrupt cache (duplicate candidates)");

  std::uint64_t n_ov = r.u64();
  for (std::uint64_t i = 0; i < n_ov; ++i) {
    std::uint32_t a = r.u32(), b = r.u32();
    if (a > b || b >= t.candidates.size()) data_error(path + ": corrupt cache (overlap pair)");
    t.overlaps.emplace(pack_pair(a, b), r.u64());
  }

  std::uint64_t n_of = r.u64();
  for (std::uint64_t i = 0; i < n_of; ++i) {
    TokenId id = r.i32();
    t.old_token_freq.emplace(id, r.u64());
  }
  return t;
}

}  // namespace ntok
