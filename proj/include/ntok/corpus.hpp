#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ntok/types.hpp"

namespace ntok {

struct Doc {
  std::string id;  // relative path, or "<filename>#<lineno>" for line corpora
  std::string text;
  Split split = Split::Train;
};

struct Corpus {
  std::vector<Doc> docs;
  std::string fingerprint;  // sha256 over sorted (id, content-hash) pairs

  std::size_t count(Split s) const;
};

// A directory of UTF-8 .txt files (one document per file, id = relative
// path) or a single file (one document per line, blank lines skipped,
// id = "<filename>#<lineno>"). Documents come back sorted by id with the
// default split applied.
Corpus load_corpus(const std::string& path);

// Manifest lines are "<train|test> <doc-id>". Every corpus document must be
// assigned exactly once and every line must name a known document.
void apply_manifest(Corpus& corpus, const std::string& manifest_path);

// Deterministic 1-in-20 holdout by document id hash.
void apply_default_split(Corpus& corpus);

std::uint64_t fnv1a(std::string_view s);

}  // namespace ntok
