#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ntok/embedding.hpp"
#include "ntok/errors.hpp"
#include "ntok/pipeline.hpp"
#include "ntok/sha256.hpp"
#include "support/fixtures.hpp"

using namespace ntok;

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ErrKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  REQUIRE(false);
  return ErrKind::Io;
}

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  REQUIRE(false);
  return {};
}

// Small domain fixture on disk: corpus dir, tokenizer json, ready config.
struct Workspace {
  fix::TempDir tmp;
  fix::DomainCorpus dc;
  PipelineConfig cfg;

  explicit Workspace(std::size_t docs = 80, std::size_t draws = 40, std::uint64_t seed = 5) {
    dc = fix::make_domain_corpus(docs, draws, seed);
    fix::write_corpus_dir(tmp.path / "corpus", dc.docs);
    write_file(tmp.path / "tok.json", dc.tokenizer->to_json_text());
    cfg.corpus_path = (tmp.path / "corpus").string();
    cfg.tokenizer_path = (tmp.path / "tok.json").string();
    cfg.output_dir = (tmp.path / "out").string();
    cfg.m = 12;
    cfg.threads = 2;
  }
};

}  // namespace

TEST_CASE("directory corpora load recursively with relative ids, sorted") {
  fix::TempDir tmp;
  std::filesystem::create_directories(tmp.path / "c" / "sub");
  write_file(tmp.path / "c" / "b.txt", "beta");
  write_file(tmp.path / "c" / "a.txt", "alpha");
  write_file(tmp.path / "c" / "sub" / "z.txt", "zeta");
  write_file(tmp.path / "c" / "notes.md", "ignored");

  auto corpus = load_corpus((tmp.path / "c").string());
  REQUIRE(corpus.docs.size() == 3);
  CHECK(corpus.docs[0].id == "a.txt");
  CHECK(corpus.docs[1].id == "b.txt");
  CHECK(corpus.docs[2].id == "sub/z.txt");
  CHECK(corpus.docs[0].text == "alpha");
  CHECK(corpus.docs[2].text == "zeta");
}

TEST_CASE("line corpora keep original line numbers and skip blanks") {
  fix::TempDir tmp;
  write_file(tmp.path / "docs.txt", "first\n\nsecond\r\n  \nthird");

  auto corpus = load_corpus((tmp.path / "docs.txt").string());
  REQUIRE(corpus.docs.size() == 4);  // "  " is not blank
  CHECK(corpus.docs[0].id == "docs.txt#1");
  CHECK(corpus.docs[0].text == "first");
  CHECK(corpus.docs[1].id == "docs.txt#3");
  CHECK(corpus.docs[1].text == "second");  // CR stripped
  CHECK(corpus.docs[2].id == "docs.txt#4");
  CHECK(corpus.docs[2].text == "  ");
  CHECK(corpus.docs[3].id == "docs.txt#5");
  CHECK(corpus.docs[3].text == "third");
}

TEST_CASE("corpus fingerprint tracks content, not layout") {
  fix::TempDir tmp;
  std::filesystem::create_directories(tmp.path / "one");
  std::filesystem::create_directories(tmp.path / "two");
  write_file(tmp.path / "one" / "a.txt", "same text");
  write_file(tmp.path / "one" / "b.txt", "other text");
  write_file(tmp.path / "two" / "a.txt", "same text");
  write_file(tmp.path / "two" / "b.txt", "other text");

  auto c1 = load_corpus((tmp.path / "one").string());
  auto c2 = load_corpus((tmp.path / "two").string());
  CHECK(c1.fingerprint == c2.fingerprint);

  write_file(tmp.path / "two" / "b.txt", "other text!");
  auto c3 = load_corpus((tmp.path / "two").string());
  CHECK(c3.fingerprint != c1.fingerprint);

  // A rename changes ids, and ids are part of identity.
  std::filesystem::rename(tmp.path / "one" / "b.txt", tmp.path / "one" / "c.txt");
  auto c4 = load_corpus((tmp.path / "one").string());
  CHECK(c4.fingerprint != c1.fingerprint);
}

TEST_CASE("default split is the deterministic 1-in-20 id-hash holdout") {
  fix::TempDir tmp;
  std::vector<std::string> docs;
  for (int i = 0; i < 400; ++i) docs.push_back("doc " + std::to_string(i));
  fix::write_corpus_dir(tmp.path / "c", docs);
  auto corpus = load_corpus((tmp.path / "c").string());

  std::size_t test_count = 0;
  for (const auto& d : corpus.docs) {
    const Split expect = fnv1a(d.id) % 20 == 0 ? Split::Test : Split::Train;
    CHECK(d.split == expect);
    if (d.split == Split::Test) ++test_count;
  }
  CHECK(test_count == corpus.count(Split::Test));
  CHECK(test_count + corpus.count(Split::Train) == corpus.docs.size());
  CHECK(test_count > 0);          // ~5% of 400
  CHECK(test_count < 80);

  // Reloading reproduces the same assignment.
  auto again = load_corpus((tmp.path / "c").string());
  for (std::size_t i = 0; i < corpus.docs.size(); ++i)
    CHECK(corpus.docs[i].split == again.docs[i].split);
}

TEST_CASE("manifests assign every document exactly once") {
  fix::TempDir tmp;
  fix::write_corpus_dir(tmp.path / "c", {"alpha", "beta", "gamma"});
  auto corpus = load_corpus((tmp.path / "c").string());
  REQUIRE(corpus.docs.size() == 3);

  auto manifest = tmp.path / "split.txt";
  write_file(manifest, "test doc00000.txt\ntrain doc00001.txt\ntrain doc00002.txt\n");
  apply_manifest(corpus, manifest.string());
  CHECK(corpus.docs[0].split == Split::Test);
  CHECK(corpus.docs[1].split == Split::Train);
  CHECK(corpus.docs[2].split == Split::Train);

  SUBCASE("duplicate assignment") {
    write_file(manifest, "train doc00000.txt\ntest doc00000.txt\n");
    auto msg = message_of([&] { apply_manifest(corpus, manifest.string()); });
    CHECK(msg.find("assigned twice") != std::string::npos);
    CHECK(msg.find(":2") != std::string::npos);
  }
  SUBCASE("unknown document") {
    write_file(manifest,
               "train doc00000.txt\ntrain doc00001.txt\ntrain doc00002.txt\ntest ghost.txt\n");
    auto msg = message_of([&] { apply_manifest(corpus, manifest.string()); });
    CHECK(msg.find("ghost.txt") != std::string::npos);
    CHECK(msg.find("not in the corpus") != std::string::npos);
  }
  SUBCASE("uncovered document") {
    write_file(manifest, "train doc00000.txt\ntrain doc00001.txt\n");
    auto msg = message_of([&] { apply_manifest(corpus, manifest.string()); });
    CHECK(msg.find("doc00002.txt") != std::string::npos);
    CHECK(msg.find("no split assignment") != std::string::npos);
  }
  SUBCASE("bad split word") {
    write_file(manifest, "dev doc00000.txt\n");
    CHECK(kind_of([&] { apply_manifest(corpus, manifest.string()); }) == ErrKind::Data);
  }
  SUBCASE("missing manifest file") {
    CHECK(kind_of([&] { apply_manifest(corpus, (tmp.path / "nope.txt").string()); }) ==
          ErrKind::Io);
  }
}

TEST_CASE("config defaults, full parse, and strictness") {
  auto cfg = PipelineConfig::from_text("", "mem");
  CHECK(cfg.n_max == 3);
  CHECK(cfg.min_freq == 2);
  CHECK(cfg.m == 10000);
  CHECK(cfg.scoring_mode == "algorithm1");
  CHECK(cfg.selection_mode == "overlap_aware");
  CHECK(cfg.update_weight == "affected");
  CHECK(cfg.strategy == "exponential");
  CHECK(cfg.exponent_scale == doctest::Approx(2.0));
  CHECK(cfg.output_dir == "out");
  CHECK(cfg.ablate_n == std::vector<int>{2, 3, 4});
  CHECK(cfg.ablate_m.empty());

  const char* full = R"ini(
; comment line
[corpus]
path = /data/corpus
manifest = /data/split.txt

[tokenizer]
path = /data/tok.json

[miner]
n_max = 4
min_freq = 3
words_only = true

[selector]
m = 500
scoring_mode = footnote
selection_mode = naive_greedy
update_weight = selected

[embeddings]
strategy = random
exponent_scale = 1.25
rng_seed = 99
input_matrix = /data/in.avem
output_matrix = /data/out.avem

[output]
dir = /data/out
per_doc = true
threads = 4

[ablate]
n_values = 2,3
m_values = 100, 200
selections = overlap_aware
encoders = optimal
words_only_values = false,true
)ini";
  auto f = PipelineConfig::from_text(full, "mem");
  CHECK(f.corpus_path == "/data/corpus");
  CHECK(f.manifest_path == "/data/split.txt");
  CHECK(f.tokenizer_path == "/data/tok.json");
  CHECK(f.n_max == 4);
  CHECK(f.min_freq == 3);
  CHECK(f.words_only);
  CHECK(f.m == 500);
  CHECK(f.scoring_mode == "footnote");
  CHECK(f.selection_mode == "naive_greedy");
  CHECK(f.update_weight == "selected");
  CHECK(f.strategy == "random");
  CHECK(f.exponent_scale == doctest::Approx(1.25));
  CHECK(f.rng_seed == 99);
  CHECK(f.input_matrix == "/data/in.avem");
  CHECK(f.per_doc);
  CHECK(f.threads == 4);
  CHECK(f.ablate_n == std::vector<int>{2, 3});
  CHECK(f.ablate_m == std::vector<std::uint64_t>{100, 200});
  CHECK(f.ablate_selections == std::vector<std::string>{"overlap_aware"});
  CHECK(f.ablate_encoders == std::vector<std::string>{"optimal"});
  CHECK(f.ablate_words_only == std::vector<bool>{false, true});
  f.validate();

  // Resolved text reparses to the identical resolved text.
  auto ini = f.to_ini();
  CHECK(PipelineConfig::from_text(ini, "mem").to_ini() == ini);
  CHECK(PipelineConfig::from_text(cfg.to_ini(), "mem").to_ini() == cfg.to_ini());

  SUBCASE("unknown section and key carry file:line") {
    auto msg = message_of([&] { PipelineConfig::from_text("[corpus]\npath = x\n[extra]\n", "c.ini"); });
    CHECK(msg.find("c.ini:3") != std::string::npos);
    CHECK(msg.find("unknown section") != std::string::npos);

    msg = message_of([&] { PipelineConfig::from_text("[miner]\nn_min = 1\n", "c.ini"); });
    CHECK(msg.find("c.ini:2") != std::string::npos);
    CHECK(msg.find("unknown key") != std::string::npos);

    CHECK(kind_of([&] { PipelineConfig::from_text("[miner]\nn_max = soon\n", "c.ini"); }) ==
          ErrKind::Data);
    CHECK(kind_of([&] { PipelineConfig::from_text("[miner]\nwords_only = yep\n", "c.ini"); }) ==
          ErrKind::Data);
    CHECK(kind_of([&] { PipelineConfig::from_text("stray line\n", "c.ini"); }) == ErrKind::Data);
  }
  SUBCASE("validation rejects out-of-range and unknown modes") {
    auto bad = cfg;
    bad.n_max = 1;
    CHECK(kind_of([&] { bad.validate(); }) == ErrKind::Usage);
    bad = cfg;
    bad.scoring_mode = "fancy";
    CHECK(kind_of([&] { bad.validate(); }) == ErrKind::Usage);
    bad = cfg;
    bad.update_weight = "both";
    CHECK(kind_of([&] { bad.validate(); }) == ErrKind::Usage);
    bad = cfg;
    bad.ablate_encoders = {"greedy", "perfect"};
    CHECK(kind_of([&] { bad.validate(); }) == ErrKind::Usage);
    bad = cfg;
    bad.min_freq = 0;
    CHECK(kind_of([&] { bad.validate(); }) == ErrKind::Usage);
  }
}

TEST_CASE("encode_corpus matches per-document base encoding") {
  Workspace ws(12, 20, 11);
  auto corpus = load_corpus(ws.cfg.corpus_path);
  auto ids = encode_corpus(corpus, *ws.dc.tokenizer, 3);
  REQUIRE(ids.size() == corpus.docs.size());
  EncodeCache cache;
  for (std::size_t i = 0; i < corpus.docs.size(); ++i)
    CHECK(ids[i] == encode_base(corpus.docs[i].text, *ws.dc.tokenizer, cache).ids);
}

TEST_CASE("mine_table reads only the train split") {
  // One test document provides the only occurrences of a marker pair; the
  // mined table must not contain it.
  fix::TempDir tmp;
  auto dc = fix::make_domain_corpus(40, 30, 17);
  auto corpus_dir = tmp.path / "c";
  fix::write_corpus_dir(corpus_dir, dc.docs);

  auto corpus = load_corpus(corpus_dir.string());
  REQUIRE(corpus.count(Split::Test) > 0);
  std::string test_only = "gkkk gkkq gkkk gkkq gkkk gkkq gkkk gkkq";
  for (auto& d : corpus.docs) {
    if (d.split == Split::Test) d.text = test_only;
  }

  PipelineConfig cfg;
  cfg.min_freq = 2;
  auto encoded = encode_corpus(corpus, *dc.tokenizer, 2);
  auto table = mine_table(corpus, encoded, *dc.tokenizer, cfg);

  EncodeCache cache;
  auto probe = encode_base(test_only, *dc.tokenizer, cache).ids;
  REQUIRE(probe.size() == 8);
  CHECK_FALSE(table.find({probe.data(), 2}).has_value());
  CHECK(table.tokenizer_sha256 == dc.tokenizer->fingerprint());
  CHECK(table.corpus_sha256 == corpus.fingerprint);
  CHECK(table.doc_count == corpus.count(Split::Train));
}

TEST_CASE("run_mine writes the candidate cache and resolved config") {
  Workspace ws;
  run_mine(ws.cfg, false);

  auto out = std::filesystem::path(ws.cfg.output_dir);
  REQUIRE(std::filesystem::exists(out / "candidates.avct"));
  REQUIRE(std::filesystem::exists(out / "config.resolved.ini"));
  CHECK(read_file(out / "config.resolved.ini") == ws.cfg.to_ini());

  auto table = CandidateTable::load((out / "candidates.avct").string());
  auto corpus = load_corpus(ws.cfg.corpus_path);
  auto direct = mine_table(corpus, encode_corpus(corpus, *ws.dc.tokenizer, 2),
                           *ws.dc.tokenizer, ws.cfg);
  CHECK(table.candidates.size() == direct.candidates.size());
  CHECK(table.freq == direct.freq);
  CHECK(table.corpus_sha256 == direct.corpus_sha256);

  SUBCASE("existing output requires --force") {
    CHECK(kind_of([&] { run_mine(ws.cfg, false); }) == ErrKind::Io);
    auto msg = message_of([&] { run_mine(ws.cfg, false); });
    CHECK(msg.find("--force") != std::string::npos);
    run_mine(ws.cfg, true);  // replaces
    CHECK(std::filesystem::exists(out / "candidates.avct"));
  }
}

TEST_CASE("run_adapt emits a complete, fingerprinted hand-off") {
  Workspace ws;
  // Base matrices so embedding artifacts are exercised.
  const std::size_t rows = ws.dc.tokenizer->vocab_size(), dim = 6;
  EmbeddingMatrix in_m = EmbeddingMatrix::zeros(EmbedRole::Input, rows, dim);
  EmbeddingMatrix out_m = EmbeddingMatrix::zeros(EmbedRole::Output, rows, dim);
  std::mt19937_64 rng(3);
  for (auto& v : in_m.data) v = static_cast<float>((rng() >> 11) * 0x1.0p-53);
  for (auto& v : out_m.data) v = static_cast<float>((rng() >> 11) * 0x1.0p-53);
  in_m.save((ws.tmp.path / "in.avem").string());
  out_m.save((ws.tmp.path / "outm.avem").string());
  ws.cfg.input_matrix = (ws.tmp.path / "in.avem").string();
  ws.cfg.output_matrix = (ws.tmp.path / "outm.avem").string();

  run_adapt(ws.cfg, false, "");

  auto out = std::filesystem::path(ws.cfg.output_dir);
  for (const char* name : {"tokenizer.json", "patch.json", "savings.json", "manifest.json",
                           "config.resolved.ini", "embeddings_input.avem",
                           "embeddings_output.avem"})
    CHECK(std::filesystem::exists(out / name));

  auto manifest = nlohmann::json::parse(read_file(out / "manifest.json"));
  const std::vector<std::string> trainable = manifest["trainable"];
  CHECK(trainable == trainable_components());

  // Artifact hashes must be reproducible from the bytes on disk.
  for (auto& [name, entry] : manifest["artifacts"].items()) {
    auto path = out / entry["path"].get<std::string>();
    CHECK(Sha256::file_hex(path.string()) == entry["sha256"].get<std::string>());
  }
  CHECK(manifest["source"]["tokenizer_sha256"] == ws.dc.tokenizer->fingerprint());
  auto corpus = load_corpus(ws.cfg.corpus_path);
  CHECK(manifest["source"]["corpus_sha256"] == corpus.fingerprint);
  CHECK(manifest["config_ini"] == ws.cfg.to_ini());

  // The written tokenizer reloads to the same identity.
  auto tok2 = TokenizerDef::load((out / "tokenizer.json").string());
  CHECK(tok2.fingerprint() == ws.dc.tokenizer->fingerprint());

  // The patch applies and the recorded savings match a direct measurement.
  auto patch = VocabPatch::load((out / "patch.json").string());
  CHECK(patch.added.size() == ws.cfg.m);
  PatchedVocab pv(ws.dc.tokenizer, patch);
  auto encoded = encode_corpus(corpus, *ws.dc.tokenizer, 2);
  IdDocs test_ids;
  for (std::size_t i = 0; i < corpus.docs.size(); ++i)
    if (corpus.docs[i].split == Split::Test) test_ids.push_back(encoded[i]);
  auto totals = measure_savings(test_ids, pv, 2);
  auto savings = nlohmann::json::parse(read_file(out / "savings.json"));
  REQUIRE(savings["reports"].size() == 2);
  const auto& test_report = savings["reports"][1];
  CHECK(test_report["split"] == "test");
  CHECK(test_report["docs"].get<std::uint64_t>() == totals.docs);
  CHECK(test_report["base_tokens"].get<std::uint64_t>() == totals.base_tokens);
  CHECK(test_report["greedy_tokens"].get<std::uint64_t>() == totals.greedy_tokens);
  CHECK(test_report["optimal_tokens"].get<std::uint64_t>() == totals.optimal_tokens);
  CHECK(test_report["greedy_savings_pct"].get<double>() ==
        doctest::Approx(totals.greedy_pct()).epsilon(1e-12));

  // Patched matrices differ from the source in exactly the added rows.
  auto patched_in = EmbeddingMatrix::load((out / "embeddings_input.avem").string());
  REQUIRE(patched_in.rows == rows);
  std::size_t changed = 0;
  for (std::size_t r = 0; r < rows; ++r)
    if (std::memcmp(patched_in.row(r).data(), in_m.row(r).data(), dim * sizeof(float)) != 0)
      ++changed;
  CHECK(changed == patch.added.size());
}

TEST_CASE("run_adapt validates a cached table's fingerprints") {
  Workspace ws;
  auto mine_dir = (ws.tmp.path / "mined").string();
  auto mine_cfg = ws.cfg;
  mine_cfg.output_dir = mine_dir;
  run_mine(mine_cfg, false);
  auto table_path = (std::filesystem::path(mine_dir) / "candidates.avct").string();

  run_adapt(ws.cfg, false, table_path);
  CHECK(std::filesystem::exists(std::filesystem::path(ws.cfg.output_dir) / "patch.json"));

  // Corpus drift invalidates the cache unless forced.
  write_file(std::filesystem::path(ws.cfg.corpus_path) / "extra.txt", "jxxx jxxz jxxx jxxz");
  auto run = [&] {
    auto cfg = ws.cfg;
    cfg.output_dir = (ws.tmp.path / "out2").string();
    run_adapt(cfg, false, table_path);
  };
  CHECK(kind_of(run) == ErrKind::Data);
  auto msg = message_of(run);
  CHECK(msg.find("corpus") != std::string::npos);
  CHECK(msg.find("--force") != std::string::npos);

  auto cfg2 = ws.cfg;
  cfg2.output_dir = (ws.tmp.path / "out3").string();
  run_adapt(cfg2, true, table_path);  // forced: stale cache accepted
  CHECK(std::filesystem::exists(std::filesystem::path(cfg2.output_dir) / "patch.json"));
}

TEST_CASE("run_adapt keeps the previous output on failure") {
  Workspace ws;
  run_mine(ws.cfg, false);  // occupies output_dir with a mine result
  auto out = std::filesystem::path(ws.cfg.output_dir);
  auto before = read_file(out / "config.resolved.ini");

  CHECK(kind_of([&] { run_adapt(ws.cfg, false, ""); }) == ErrKind::Io);
  CHECK(read_file(out / "config.resolved.ini") == before);
  CHECK_FALSE(std::filesystem::exists(out / "patch.json"));

  run_adapt(ws.cfg, true, "");
  CHECK(std::filesystem::exists(out / "patch.json"));
  CHECK(std::filesystem::exists(out / "manifest.json"));
}

TEST_CASE("run_stats rejects unknown and empty splits") {
  Workspace ws;
  run_adapt(ws.cfg, false, "");
  auto patch_path = (std::filesystem::path(ws.cfg.output_dir) / "patch.json").string();

  CHECK(kind_of([&] { run_stats(ws.cfg, patch_path, "dev"); }) == ErrKind::Usage);

  // A manifest assigning everything to train leaves the test split empty.
  std::string manifest_text;
  auto corpus = load_corpus(ws.cfg.corpus_path);
  for (const auto& d : corpus.docs) manifest_text += "train " + d.id + "\n";
  write_file(ws.tmp.path / "all-train.txt", manifest_text);
  auto cfg = ws.cfg;
  cfg.manifest_path = (ws.tmp.path / "all-train.txt").string();
  CHECK(kind_of([&] { run_stats(cfg, patch_path, "test"); }) == ErrKind::Usage);
}

TEST_CASE("run_ablate covers the whole grid") {
  Workspace ws(60, 30, 23);
  ws.cfg.ablate_n = {2, 3};
  ws.cfg.ablate_m = {6, 12};
  ws.cfg.ablate_selections = {"overlap_aware", "naive_greedy"};
  ws.cfg.ablate_encoders = {"greedy", "optimal"};
  ws.cfg.ablate_words_only = {false, true};
  run_ablate(ws.cfg, false);

  auto doc = nlohmann::json::parse(
      read_file(std::filesystem::path(ws.cfg.output_dir) / "ablate.json"));
  const auto& rows = doc["rows"];
  REQUIRE(rows.size() == 2 * 2 * 2 * 2 * 2);

  std::set<std::string> seen;
  for (const auto& row : rows) {
    CHECK((row["n"] == 2 || row["n"] == 3));
    CHECK((row["m"] == 6 || row["m"] == 12));
    CHECK((row["selection"] == "overlap_aware" || row["selection"] == "naive_greedy"));
    CHECK((row["encoder"] == "greedy" || row["encoder"] == "optimal"));
    CHECK(row["savings_pct"].is_number());
    CHECK(row["savings_pct"].get<double>() >= 0.0);
    seen.insert(row["n"].dump() + row["m"].dump() + row["selection"].dump() +
                row["encoder"].dump() + row["words_only"].dump());
  }
  CHECK(seen.size() == 32);  // every cell distinct

  // The optimal encoder never loses to greedy.
  for (const auto& row : rows) {
    if (row["encoder"] != "optimal") continue;
    for (const auto& other : rows) {
      if (other["encoder"] == "greedy" && other["n"] == row["n"] && other["m"] == row["m"] &&
          other["selection"] == row["selection"] && other["words_only"] == row["words_only"])
        CHECK(row["savings_pct"].get<double>() >= other["savings_pct"].get<double>() - 1e-9);
    }
  }
}

TEST_CASE("missing configured paths surface as usage errors") {
  PipelineConfig cfg;
  CHECK(kind_of([&] { run_mine(cfg, false); }) == ErrKind::Usage);
  cfg.corpus_path = "/nonexistent/corpus";
  CHECK(kind_of([&] { run_mine(cfg, false); }) == ErrKind::Usage);  // tokenizer still missing
  cfg.tokenizer_path = "/nonexistent/tok.json";
  CHECK(kind_of([&] { run_mine(cfg, false); }) == ErrKind::Io);  // now the open fails
}
