#include "support/fixtures.hpp"

#include <unistd.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace ntok::fix {
namespace {

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// 53-bit uniform in [0, 1); keeps draws identical across standard libraries.
double unit_draw(std::mt19937_64& rng) { return (rng() >> 11) * 0x1.0p-53; }

// Incremental vocabulary builder: atoms must be registered before chains.
struct VocabBuilder {
  std::vector<std::pair<std::string, TokenId>> vocab;
  std::vector<std::pair<std::string, std::string>> merges;
  std::unordered_map<std::string, TokenId> ids;
  std::string marker;

  TokenId add(const std::string& s) {
    auto id = static_cast<TokenId>(vocab.size());
    if (!ids.emplace(s, id).second) throw std::logic_error("fixture vocab collision: " + s);
    vocab.emplace_back(s, id);
    return id;
  }
  bool has(const std::string& s) const { return ids.count(s) != 0; }

  // Token for `w` built by merging one character at a time from the left.
  TokenId chain(const std::string& w) {
    std::string prefix(1, w[0]);
    for (std::size_t i = 1; i < w.size(); ++i) {
      std::string ext = prefix + w[i];
      if (!has(ext)) {
        merges.emplace_back(prefix, std::string(1, w[i]));
        add(ext);
      }
      prefix = ext;
    }
    return ids.at(w);
  }
  TokenId marked(const std::string& w) {
    chain(w);
    std::string mw = marker + w;
    if (!has(mw)) {
      merges.emplace_back(marker, w);
      add(mw);
    }
    return ids.at(mw);
  }
};

// Glue words: drawn from everyday English; their letters never appear in the
// synthetic inventory below, so the two merge families cannot interact.
const std::vector<std::string> kGlue = {
    "the", "of",   "and",  "to",   "in",  "is",   "on",  "for",  "as",  "with",
    "by",  "at",   "from", "or",   "an",  "be",   "this", "that", "it", "are",
    "was", "but",  "not",  "have", "has", "had",  "they", "we",  "you", "his",
    "her", "its",  "one",  "all",  "can", "will", "so",   "if",  "out", "up"};

// Synthetic words: one of {g, j}, then three of {k, q, x, z}. g/j never occur
// mid-word except at compound syllable starts, so no merge for one word can
// fire early inside another.
std::vector<std::string> synth_pool() {
  const std::string first = "gj", rest = "kqxz";
  std::vector<std::string> pool;
  for (char f : first)
    for (char a : rest)
      for (char b : rest)
        for (char c : rest) pool.push_back({f, a, b, c});
  return pool;
}

}  // namespace

TokenizerDef train_bpe(const std::vector<std::string>& texts, std::size_t num_merges,
                       const std::string& marker, std::size_t num_specials) {
  // Word types as symbol sequences, weighted by count. Words after the first
  // carry the boundary marker, matching the encoder's pre-tokenization.
  std::map<std::vector<std::string>, std::uint64_t> words;
  std::map<std::string, bool> symbols;
  for (const auto& text : texts) {
    auto ws = split_words(text);
    for (std::size_t i = 0; i < ws.size(); ++i) {
      std::vector<std::string> sym;
      if (i > 0) sym.push_back(marker);
      for (char c : ws[i]) sym.emplace_back(1, c);
      for (const auto& s : sym) symbols[s] = true;
      ++words[sym];
    }
  }

  std::vector<std::pair<std::string, TokenId>> vocab;
  std::vector<TokenId> specials;
  std::unordered_set<std::string> have;
  auto add = [&](const std::string& s) {
    vocab.emplace_back(s, static_cast<TokenId>(vocab.size()));
    have.insert(s);
  };
  for (std::size_t i = 0; i < num_specials; ++i) {
    specials.push_back(static_cast<TokenId>(vocab.size()));
    add("<s" + std::to_string(i) + ">");
  }
  for (const auto& [s, _] : symbols) add(s);

  std::vector<std::pair<std::string, std::string>> merges;
  for (std::size_t round = 0; round < num_merges; ++round) {
    std::map<std::pair<std::string, std::string>, std::uint64_t> pairs;
    for (const auto& [sym, count] : words)
      for (std::size_t i = 0; i + 1 < sym.size(); ++i)
        if (!have.count(sym[i] + sym[i + 1])) pairs[{sym[i], sym[i + 1]}] += count;
    const std::pair<std::string, std::string>* best = nullptr;
    std::uint64_t best_count = 1;  // a pair must occur at least twice
    for (const auto& [p, c] : pairs) {
      if (c > best_count) {
        best = &p;
        best_count = c;
      }
    }
    if (!best) break;
    auto [l, r] = *best;
    merges.emplace_back(l, r);
    add(l + r);
    std::map<std::vector<std::string>, std::uint64_t> next;
    for (const auto& [sym, count] : words) {
      std::vector<std::string> out;
      for (std::size_t i = 0; i < sym.size(); ++i) {
        if (i + 1 < sym.size() && sym[i] == l && sym[i + 1] == r) {
          out.push_back(l + r);
          ++i;
        } else {
          out.push_back(sym[i]);
        }
      }
      next[out] += count;
    }
    words = std::move(next);
  }
  return TokenizerDef::assemble(vocab, merges, marker, specials);
}

DomainCorpus make_domain_corpus(std::size_t n_docs, std::size_t draws_per_doc,
                                std::uint64_t seed) {
  const auto pool = synth_pool();
  // Inventory: 36 collocations (12 frequent, 24 mid-band), 3 phrases,
  // 4 compounds of 6 syllables each.
  const std::size_t n_colloc = 36, n_phrase = 3, n_compound = 4;
  std::vector<std::array<std::string, 2>> collocs;
  for (std::size_t i = 0; i < n_colloc; ++i) collocs.push_back({pool[2 * i], pool[2 * i + 1]});
  std::vector<std::array<std::string, 3>> phrases;
  for (std::size_t i = 0; i < n_phrase; ++i) {
    std::size_t b = 2 * n_colloc + 3 * i;
    phrases.push_back({pool[b], pool[b + 1], pool[b + 2]});
  }
  std::vector<std::vector<std::string>> compounds;
  for (std::size_t i = 0; i < n_compound; ++i) {
    std::size_t b = 2 * n_colloc + 3 * n_phrase + 6 * i;
    compounds.emplace_back(pool.begin() + b, pool.begin() + b + 6);
  }

  VocabBuilder vb;
  vb.marker = "\xC4\xA0";
  vb.add("<pad>");
  vb.add("<eos>");
  for (char c = 'a'; c <= 'z'; ++c) vb.add(std::string(1, c));
  vb.add(vb.marker);
  for (const auto& w : kGlue) vb.marked(w);
  for (const auto& c : collocs)
    for (const auto& w : c) vb.marked(w);
  for (const auto& p : phrases)
    for (const auto& w : p) vb.marked(w);
  // Per compound: the head syllable and its marked form first, then the tail
  // syllables, so every span's id sequence ascends with its offset.
  for (const auto& comp : compounds) {
    vb.marked(comp[0]);
    for (std::size_t i = 1; i < comp.size(); ++i) vb.chain(comp[i]);
  }

  DomainCorpus out;
  out.tokenizer = std::make_shared<TokenizerDef>(
      TokenizerDef::assemble(vb.vocab, vb.merges, vb.marker, {0, 1}));

  std::mt19937_64 rng(seed);
  auto pick = [&rng](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  std::string doc, compound_word;
  for (std::size_t d = 0; d < n_docs; ++d) {
    doc = kGlue[pick(kGlue.size())];  // documents open with a bare glue word
    for (std::size_t i = 0; i < draws_per_doc; ++i) {
      const double r = unit_draw(rng);
      if (r < 0.033) {
        const auto& comp = compounds[pick(n_compound)];
        compound_word.clear();
        for (const auto& s : comp) compound_word += s;
        doc += ' ';
        doc += compound_word;
      } else if (r < 0.063) {
        const auto& p = phrases[pick(n_phrase)];
        for (const auto& w : p) {
          doc += ' ';
          doc += w;
        }
      } else if (r < 0.207) {
        const auto& c = collocs[pick(12)];
        doc += ' ';
        doc += c[0];
        doc += ' ';
        doc += c[1];
      } else if (r < 0.303) {
        const auto& c = collocs[12 + pick(24)];
        doc += ' ';
        doc += c[0];
        doc += ' ';
        doc += c[1];
      } else {
        doc += ' ';
        doc += kGlue[pick(kGlue.size())];
      }
    }
    out.docs.push_back(doc);
  }
  return out;
}

std::vector<std::vector<TokenId>> random_id_docs(std::mt19937_64& rng, std::size_t n_docs,
                                                 std::size_t max_len, TokenId alphabet) {
  std::vector<std::vector<TokenId>> docs(n_docs);
  for (auto& doc : docs) {
    const std::size_t len = 2 + static_cast<std::size_t>(rng() % (max_len - 1));
    doc.resize(len);
    for (auto& id : doc) id = static_cast<TokenId>(rng() % alphabet);
  }
  return docs;
}

void write_corpus_dir(const std::filesystem::path& dir, const std::vector<std::string>& docs) {
  std::filesystem::create_directories(dir);
  char name[32];
  for (std::size_t i = 0; i < docs.size(); ++i) {
    std::snprintf(name, sizeof name, "doc%05zu.txt", i);
    std::ofstream out(dir / name, std::ios::binary);
    out << docs[i];
  }
}

TempDir::TempDir() {
  static std::atomic<unsigned> counter{0};
  const auto base = std::filesystem::temp_directory_path();
  std::mt19937_64 rng(static_cast<std::uint64_t>(::getpid()) * 0x9e3779b97f4a7c15ull +
                      counter.fetch_add(1));
  for (int attempt = 0; attempt < 64; ++attempt) {
    char name[32];
    std::snprintf(name, sizeof name, "ntok-test-%016llx",
                  static_cast<unsigned long long>(rng()));
    auto candidate = base / name;
    if (std::filesystem::create_directory(candidate)) {
      path = candidate;
      return;
    }
  }
  throw std::runtime_error("could not create a temp directory");
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path, ec);
}

}  // namespace ntok::fix
