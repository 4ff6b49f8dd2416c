#include "ntok/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "ntok/errors.hpp"
#include "ntok/sha256.hpp"

namespace fs = std::filesystem;

namespace ntok {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::string corpus_fingerprint(std::vector<Doc>& docs) {
  Sha256 h;
  for (const auto& d : docs) {  // docs already sorted by id
    h.update(d.id);
    h.update("\t");
    h.update(Sha256::hex(d.text));
    h.update("\n");
  }
  return h.finish_hex();
}

}  // namespace

std::size_t Corpus::count(Split s) const {
  std::size_t n = 0;
  for (const auto& d : docs) {
    if (d.split == s) ++n;
  }
  return n;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

void apply_default_split(Corpus& corpus) {
  for (auto& d : corpus.docs) {
    d.split = fnv1a(d.id) % 20 == 0 ? Split::Test : Split::Train;
  }
}

Corpus load_corpus(const std::string& path) {
  std::error_code ec;
  const fs::path root(path);
  Corpus corpus;

  if (fs::is_directory(root, ec)) {
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
      if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
      Doc d;
      d.id = entry.path().lexically_relative(root).generic_string();
      d.text = read_file(entry.path().string());
      corpus.docs.push_back(std::move(d));
    }
    if (corpus.docs.empty()) data_error(path + ": no .txt documents found");
  } else if (fs::is_regular_file(root, ec)) {
    std::ifstream in(path, std::ios::binary);
    if (!in) io_error("cannot open " + path);
    const std::string name = root.filename().string();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      strip_cr(line);
      if (line.empty()) continue;
      Doc d;
      d.id = name + "#" + std::to_string(lineno);
      d.text = std::move(line);
      corpus.docs.push_back(std::move(d));
      line.clear();
    }
    if (corpus.docs.empty()) data_error(path + ": no non-empty lines");
  } else {
    io_error(path + ": not a file or directory");
  }

  std::sort(corpus.docs.begin(), corpus.docs.end(),
            [](const Doc& a, const Doc& b) { return a.id < b.id; });
  corpus.fingerprint = corpus_fingerprint(corpus.docs);
  apply_default_split(corpus);
  return corpus;
}

void apply_manifest(Corpus& corpus, const std::string& manifest_path) {
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) io_error("cannot open " + manifest_path);

  std::unordered_map<std::string, Split> assignment;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty() || line[0] == '#') continue;
    const auto where = manifest_path + ":" + std::to_string(lineno);
    const std::size_t sp = line.find(' ');
    if (sp == std::string::npos || sp + 1 >= line.size()) {
      data_error(where + ": expected \"<train|test> <doc-id>\"");
    }
    const std::string split_name = line.substr(0, sp);
    const std::string id = line.substr(sp + 1);
    Split split;
    if (split_name == "train") {
      split = Split::Train;
    } else if (split_name == "test") {
      split = Split::Test;
    } else {
      data_error(where + ": unknown split \"" + split_name + "\"");
    }
    if (!assignment.emplace(id, split).second) {
      data_error(where + ": document \"" + id + "\" assigned twice");
    }
  }

  std::unordered_map<std::string, Doc*> by_id;
  for (auto& d : corpus.docs) by_id[d.id] = &d;
  for (const auto& [id, split] : assignment) {
    (void)split;
    if (!by_id.count(id)) {
      data_error(manifest_path + ": document \"" + id + "\" is not in the corpus");
    }
  }
  for (auto& d : corpus.docs) {
    auto it = assignment.find(d.id);
    if (it == assignment.end()) {
      data_error(manifest_path + ": document \"" + d.id + "\" has no split assignment");
    }
    d.split = it->second;
  }
}

}  // namespace ntok
