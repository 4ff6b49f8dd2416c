#include "ntok/pipeline.hpp"

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ntok/embedding.hpp"
#include "ntok/errors.hpp"
#include "ntok/selector.hpp"
#include "ntok/sha256.hpp"

namespace fs = std::filesystem;

namespace ntok {

namespace {

// Staging directory that becomes cfg.output_dir atomically on commit.
class OutputDir {
 public:
  OutputDir(const std::string& dir, bool force) : final_(dir) {
    std::error_code ec;
    if (fs::exists(final_, ec) && !force) {
      io_error("output directory " + dir + " already exists; rerun with --force to replace it");
    }
    tmp_ = final_;
    tmp_ += ".tmp-" + std::to_string(::getpid());
    fs::remove_all(tmp_, ec);
    std::error_code mk;
    fs::create_directories(tmp_, mk);
    if (mk) io_error("cannot create " + tmp_.string() + ": " + mk.message());
  }

  OutputDir(const OutputDir&) = delete;
  OutputDir& operator=(const OutputDir&) = delete;

  ~OutputDir() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(tmp_, ec);
    }
  }

  std::string file(const std::string& name) const { return (tmp_ / name).string(); }

  void commit() {
    std::error_code ec;
    if (fs::exists(final_, ec)) {
      fs::remove_all(final_, ec);
      if (ec) io_error("cannot replace " + final_.string() + ": " + ec.message());
    }
    fs::rename(tmp_, final_, ec);
    if (ec) io_error("cannot move " + tmp_.string() + " into place: " + ec.message());
    committed_ = true;
  }

 private:
  fs::path final_;
  fs::path tmp_;
  bool committed_ = false;
};

// Writes and returns the content hash for the manifest.
std::string write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) io_error("cannot open " + path + " for writing");
  out << content;
  if (!out.flush()) io_error("failed writing " + path);
  return Sha256::hex(content);
}

TokenizerDef load_tokenizer(const PipelineConfig& cfg) {
  if (cfg.tokenizer_path.empty()) usage_error("config is missing [tokenizer] path");
  return TokenizerDef::load(cfg.tokenizer_path);
}

Corpus load_configured_corpus(const PipelineConfig& cfg) {
  if (cfg.corpus_path.empty()) usage_error("config is missing [corpus] path");
  Corpus corpus = load_corpus(cfg.corpus_path);
  if (!cfg.manifest_path.empty()) apply_manifest(corpus, cfg.manifest_path);
  return corpus;
}

IdDocs encode_texts(const std::vector<const std::string*>& texts, const TokenizerDef& tok,
                    int threads) {
  IdDocs out(texts.size());
  unsigned n = threads > 0 ? static_cast<unsigned>(threads) : std::thread::hardware_concurrency();
  if (n == 0) n = 1;
  if (!texts.empty()) n = std::min<unsigned>(n, static_cast<unsigned>(texts.size()));

  std::mutex err_mu;
  std::exception_ptr first_error;
  auto worker = [&](unsigned w) {
    EncodeCache cache;
    try {
      for (std::size_t i = w; i < texts.size(); i += n) {
        out[i] = encode_base(*texts[i], tok, cache).ids;
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(err_mu);
      if (!first_error) first_error = std::current_exception();
    }
  };
  if (n <= 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < n; ++w) pool.emplace_back(worker, w);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

IdDocs split_docs(const Corpus& corpus, const IdDocs& encoded, Split split) {
  IdDocs out;
  for (std::size_t i = 0; i < corpus.docs.size(); ++i) {
    if (corpus.docs[i].split == split) out.push_back(encoded[i]);
  }
  return out;
}

SelectOptions select_options(const PipelineConfig& cfg, std::uint64_t m,
                             const std::string& selection) {
  SelectOptions opt;
  opt.m = m;
  opt.selection = selection_mode_from(selection);
  opt.scoring = scoring_mode_from(cfg.scoring_mode);
  opt.update_weight =
      cfg.update_weight == "selected" ? UpdateWeight::Selected : UpdateWeight::Affected;
  return opt;
}

nlohmann::ordered_json savings_report(const char* split_name, const SavingsTotals& totals,
                                      const std::vector<SavingsRow>* rows,
                                      const std::vector<const Doc*>* row_docs) {
  nlohmann::ordered_json j;
  j["split"] = split_name;
  j["docs"] = totals.docs;
  j["base_tokens"] = totals.base_tokens;
  j["greedy_tokens"] = totals.greedy_tokens;
  j["optimal_tokens"] = totals.optimal_tokens;
  j["greedy_savings_pct"] = totals.greedy_pct();
  j["optimal_savings_pct"] = totals.optimal_pct();
  if (rows && row_docs) {
    auto arr = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < rows->size(); ++i) {
      nlohmann::ordered_json e;
      e["doc"] = (*row_docs)[i]->id;
      e["base"] = (*rows)[i].base;
      e["greedy"] = (*rows)[i].greedy;
      e["optimal"] = (*rows)[i].optimal;
      arr.push_back(std::move(e));
    }
    j["per_doc"] = std::move(arr);
  }
  return j;
}

void print_savings_table(std::ostream& os, const char* split_name, const SavingsTotals& t) {
  os << std::left << std::setw(8) << split_name << std::right << std::setw(8) << t.docs
     << std::setw(14) << t.base_tokens << std::setw(14) << t.greedy_tokens << std::setw(14)
     << t.optimal_tokens << std::setw(10) << std::fixed << std::setprecision(2) << t.greedy_pct()
     << std::setw(10) << t.optimal_pct() << "\n";
}

void print_savings_header(std::ostream& os) {
  os << std::left << std::setw(8) << "split" << std::right << std::setw(8) << "docs"
     << std::setw(14) << "base" << std::setw(14) << "greedy" << std::setw(14) << "optimal"
     << std::setw(10) << "greedy%" << std::setw(10) << "optimal%" << "\n";
}

struct MeasuredSplit {
  SavingsTotals totals;
  std::vector<SavingsRow> rows;
  std::vector<const Doc*> docs;
};

MeasuredSplit measure_split(const Corpus& corpus, const IdDocs& encoded, Split split,
                            const PatchedVocab& pv, int threads) {
  MeasuredSplit out;
  IdDocs docs = split_docs(corpus, encoded, split);
  for (const auto& d : corpus.docs) {
    if (d.split == split) out.docs.push_back(&d);
  }
  out.rows = measure_docs(docs, pv, threads);
  for (const auto& r : out.rows) out.totals.add(r);
  return out;
}

}  // namespace

IdDocs encode_corpus(const Corpus& corpus, const TokenizerDef& tok, int threads) {
  std::vector<const std::string*> texts;
  texts.reserve(corpus.docs.size());
  for (const auto& d : corpus.docs) texts.push_back(&d.text);
  return encode_texts(texts, tok, threads);
}

CandidateTable mine_table(const Corpus& corpus, const IdDocs& encoded, const TokenizerDef& tok,
                          const PipelineConfig& cfg) {
  MinerOptions opt;
  opt.n_max = cfg.n_max;
  opt.min_freq = cfg.min_freq;
  opt.words_only = cfg.words_only;
  opt.threads = cfg.threads;

  IdDocs train = split_docs(corpus, encoded, Split::Train);
  CandidateTable table;
  if (cfg.words_only) {
    TokenWordFlags flags = word_flags(tok);
    table = build_candidate_table(train, opt, tok.specials(), &flags);
  } else {
    table = build_candidate_table(train, opt, tok.specials(), nullptr);
  }
  table.tokenizer_sha256 = tok.fingerprint();
  table.corpus_sha256 = corpus.fingerprint;
  return table;
}

void run_mine(const PipelineConfig& cfg, bool force) {
  cfg.validate();
  OutputDir out(cfg.output_dir, force);  // fail on an occupied target before mining
  const TokenizerDef tok = load_tokenizer(cfg);
  Corpus corpus = load_configured_corpus(cfg);
  const IdDocs encoded = encode_corpus(corpus, tok, cfg.threads);
  const CandidateTable table = mine_table(corpus, encoded, tok, cfg);

  table.save(out.file("candidates.avct"));
  write_text(out.file("config.resolved.ini"), cfg.to_ini());
  out.commit();

  std::cout << "documents: " << corpus.docs.size() << " (train " << corpus.count(Split::Train)
            << ", test " << corpus.count(Split::Test) << ")\n"
            << "train tokens: " << table.total_tokens << "\n"
            << "candidates: " << table.candidates.size() << "\n"
            << "wrote " << cfg.output_dir << "/candidates.avct\n";
}

void run_adapt(const PipelineConfig& cfg, bool force, const std::string& table_path) {
  cfg.validate();
  OutputDir out(cfg.output_dir, force);
  auto tok = std::make_shared<TokenizerDef>(load_tokenizer(cfg));
  Corpus corpus = load_configured_corpus(cfg);
  const IdDocs encoded = encode_corpus(corpus, *tok, cfg.threads);

  CandidateTable table;
  if (!table_path.empty()) {
    table = CandidateTable::load(table_path);
    const bool tok_ok = table.tokenizer_sha256 == tok->fingerprint();
    const bool corpus_ok = table.corpus_sha256 == corpus.fingerprint;
    if (!tok_ok || !corpus_ok) {
      const std::string what = std::string(!tok_ok ? "tokenizer" : "corpus");
      if (!force) {
        data_error(table_path + ": cached " + what +
                   " fingerprint does not match the configured inputs (rerun mine, or pass "
                   "--force to use the cache anyway)");
      }
      std::cerr << "warning: using " << table_path << " despite a stale " << what
                << " fingerprint\n";
    }
  } else {
    table = mine_table(corpus, encoded, *tok, cfg);
  }

  BuildPatchResult built = build_patch(*tok, table, select_options(cfg, cfg.m, cfg.selection_mode));
  for (const auto& w : built.warnings) std::cerr << "warning: " << w << "\n";
  PatchedVocab pv(tok, built.patch);

  MeasuredSplit train = measure_split(corpus, encoded, Split::Train, pv, cfg.threads);
  MeasuredSplit test = measure_split(corpus, encoded, Split::Test, pv, cfg.threads);

  nlohmann::ordered_json artifacts;

  const std::string tok_text = tok->to_json_text();
  artifacts["tokenizer"] = {{"path", "tokenizer.json"},
                            {"sha256", write_text(out.file("tokenizer.json"), tok_text)}};

  const std::string patch_text = built.patch.to_json_text();
  artifacts["patch"] = {{"path", "patch.json"},
                        {"sha256", write_text(out.file("patch.json"), patch_text)}};

  nlohmann::ordered_json savings;
  savings["config_ini"] = cfg.to_ini();
  savings["reports"] = nlohmann::ordered_json::array();
  savings["reports"].push_back(savings_report("train", train.totals,
                                              cfg.per_doc ? &train.rows : nullptr,
                                              cfg.per_doc ? &train.docs : nullptr));
  savings["reports"].push_back(savings_report("test", test.totals,
                                              cfg.per_doc ? &test.rows : nullptr,
                                              cfg.per_doc ? &test.docs : nullptr));
  artifacts["savings"] = {{"path", "savings.json"},
                          {"sha256", write_text(out.file("savings.json"),
                                                savings.dump(2) + "\n")}};

  const InitMode mode = init_mode_from(cfg.strategy);
  bool any_matrix = false;
  auto patch_matrix_file = [&](const std::string& src, const char* name, const char* key) {
    if (src.empty()) return;
    any_matrix = true;
    patch_embeddings_file(src, out.file(name), pv, mode, cfg.exponent_scale, cfg.rng_seed);
    artifacts[key] = {{"path", name}, {"sha256", Sha256::file_hex(out.file(name))}};
  };
  patch_matrix_file(cfg.input_matrix, "embeddings_input.avem", "input_embeddings");
  patch_matrix_file(cfg.output_matrix, "embeddings_output.avem", "output_embeddings");
  if (!any_matrix) {
    std::cerr << "warning: no embedding matrices supplied; writing patch and manifest only\n";
  }

  nlohmann::ordered_json manifest;
  manifest["trainable"] = trainable_components();
  manifest["artifacts"] = std::move(artifacts);
  manifest["source"] = {{"tokenizer_sha256", tok->fingerprint()},
                        {"corpus_sha256", corpus.fingerprint}};
  manifest["config_ini"] = cfg.to_ini();
  write_text(out.file("manifest.json"), manifest.dump(2) + "\n");
  write_text(out.file("config.resolved.ini"), cfg.to_ini());
  out.commit();

  std::cout << "added units: " << built.patch.added.size() << "\n"
            << "removed ids: " << built.patch.removed.size() << "\n";
  std::cout << std::fixed << std::setprecision(2)
            << "train savings: " << train.totals.greedy_pct() << "% greedy, "
            << train.totals.optimal_pct() << "% optimal\n"
            << "test savings: " << test.totals.greedy_pct() << "% greedy, "
            << test.totals.optimal_pct() << "% optimal\n"
            << "wrote " << cfg.output_dir << "/manifest.json\n";
}

void run_stats(const PipelineConfig& cfg, const std::string& patch_path,
               const std::string& split_name) {
  cfg.validate();
  if (patch_path.empty()) usage_error("stats needs --patch <patch.json>");
  Split split;
  if (split_name == "train") {
    split = Split::Train;
  } else if (split_name == "test") {
    split = Split::Test;
  } else {
    usage_error("unknown split \"" + split_name + "\" (expected train or test)");
  }

  auto tok = std::make_shared<TokenizerDef>(load_tokenizer(cfg));
  Corpus corpus = load_configured_corpus(cfg);
  if (corpus.count(split) == 0) {
    usage_error("split \"" + split_name + "\" has no documents under the configured manifest");
  }

  VocabPatch patch = VocabPatch::load(patch_path);
  if (!patch.corpus_sha256.empty() && patch.corpus_sha256 != corpus.fingerprint) {
    std::cerr << "note: patch was mined from a different corpus; savings are out-of-domain\n";
  }
  PatchedVocab pv(tok, std::move(patch));

  std::vector<const std::string*> texts;
  std::vector<const Doc*> row_docs;
  for (const auto& d : corpus.docs) {
    if (d.split == split) {
      texts.push_back(&d.text);
      row_docs.push_back(&d);
    }
  }
  IdDocs docs = encode_texts(texts, *tok, cfg.threads);
  std::vector<SavingsRow> rows = measure_docs(docs, pv, cfg.threads);
  SavingsTotals totals;
  for (const auto& r : rows) totals.add(r);

  print_savings_header(std::cerr);
  print_savings_table(std::cerr, split_name.c_str(), totals);
  std::cout << savings_report(split_name.c_str(), totals, cfg.per_doc ? &rows : nullptr,
                              cfg.per_doc ? &row_docs : nullptr)
                   .dump(2)
            << "\n";
}

void run_ablate(const PipelineConfig& cfg, bool force) {
  cfg.validate();
  OutputDir out(cfg.output_dir, force);  // fail on an occupied target before the grid runs
  auto tok = std::make_shared<TokenizerDef>(load_tokenizer(cfg));
  Corpus corpus = load_configured_corpus(cfg);
  const IdDocs encoded = encode_corpus(corpus, *tok, cfg.threads);
  if (corpus.count(Split::Test) == 0) {
    usage_error("ablate measures the test split, but it has no documents");
  }

  const std::vector<std::uint64_t> m_values = cfg.ablate_m.empty()
                                                  ? std::vector<std::uint64_t>{cfg.m}
                                                  : cfg.ablate_m;
  auto rows_json = nlohmann::ordered_json::array();
  std::cerr << std::left << std::setw(6) << "n" << std::setw(10) << "m" << std::setw(16)
            << "selection" << std::setw(9) << "encoder" << std::setw(12) << "words_only"
            << std::setw(10) << "savings%" << "\n";

  for (const bool wo : cfg.ablate_words_only) {
    for (const int n : cfg.ablate_n) {
      PipelineConfig mine_cfg = cfg;
      mine_cfg.n_max = n;
      mine_cfg.words_only = wo;
      const CandidateTable table = mine_table(corpus, encoded, *tok, mine_cfg);

      for (const std::uint64_t m : m_values) {
        for (const auto& selection : cfg.ablate_selections) {
          BuildPatchResult built = build_patch(*tok, table, select_options(cfg, m, selection));
          for (const auto& w : built.warnings) std::cerr << "warning: " << w << "\n";
          PatchedVocab pv(tok, built.patch);
          MeasuredSplit test = measure_split(corpus, encoded, Split::Test, pv, cfg.threads);

          for (const auto& encoder : cfg.ablate_encoders) {
            const bool greedy = encoder == "greedy";
            const double pct = greedy ? test.totals.greedy_pct() : test.totals.optimal_pct();
            nlohmann::ordered_json row;
            row["n"] = n;
            row["m"] = m;
            row["selection"] = selection;
            row["encoder"] = encoder;
            row["words_only"] = wo;
            row["docs"] = test.totals.docs;
            row["base_tokens"] = test.totals.base_tokens;
            row["patched_tokens"] = greedy ? test.totals.greedy_tokens
                                           : test.totals.optimal_tokens;
            row["savings_pct"] = pct;
            rows_json.push_back(std::move(row));
            std::cerr << std::left << std::setw(6) << n << std::setw(10) << m << std::setw(16)
                      << selection << std::setw(9) << encoder << std::setw(12)
                      << (wo ? "true" : "false") << std::fixed << std::setprecision(2)
                      << std::setw(10) << pct << "\n";
          }
        }
      }
    }
  }

  nlohmann::ordered_json doc;
  doc["config_ini"] = cfg.to_ini();
  doc["rows"] = std::move(rows_json);

  write_text(out.file("ablate.json"), doc.dump(2) + "\n");
  write_text(out.file("config.resolved.ini"), cfg.to_ini());
  out.commit();
  std::cout << "wrote " << cfg.output_dir << "/ablate.json (" << doc["rows"].size() << " rows)\n";
}

}  // namespace ntok
