#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "ntok/tokenizer.hpp"

// Deterministic corpora and tokenizers for tests: a mini byte-pair trainer
// and a synthetic domain generator with controlled collocation structure.
namespace ntok::fix {

// Train a byte-pair vocabulary on whitespace-separated words: specials first,
// then every symbol seen in `texts`, then one token per merge. The most
// frequent adjacent pair wins each round (ties break lexicographically);
// pairs whose concatenation already has a token are skipped.
TokenizerDef train_bpe(const std::vector<std::string>& texts, std::size_t num_merges,
                       const std::string& marker = "\xC4\xA0", std::size_t num_specials = 0);

struct DomainCorpus {
  std::shared_ptr<TokenizerDef> tokenizer;
  std::vector<std::string> docs;
};

// Synthetic domain text over a fixed word inventory: common glue words,
// two-word collocations in two frequency bands, three-word phrases, and
// six-syllable compound terms the tokenizer splits into six tokens. Mixture
// weights are fixed, so candidate frequencies land in known bands; only the
// draw order depends on `seed`.
DomainCorpus make_domain_corpus(std::size_t n_docs, std::size_t draws_per_doc,
                                std::uint64_t seed);

// Random id documents over ids [0, alphabet), lengths 2..max_len.
std::vector<std::vector<TokenId>> random_id_docs(std::mt19937_64& rng, std::size_t n_docs,
                                                 std::size_t max_len, TokenId alphabet);

// One .txt file per document; the directory is created (and may pre-exist).
void write_corpus_dir(const std::filesystem::path& dir, const std::vector<std::string>& docs);

// Unique directory under the system temp root, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  std::string str() const { return path.string(); }
};

}  // namespace ntok::fix
