#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>

#include "ntok/embedding.hpp"
#include "ntok/errors.hpp"

using namespace ntok;

namespace {

using Seq = std::vector<TokenId>;

std::shared_ptr<const TokenizerDef> toy_base() {
  return std::make_shared<TokenizerDef>(TokenizerDef::assemble(
      {{"a", 0}, {"b", 1}, {"c", 2}, {"q", 3}, {"r", 4}, {"qr", 5}, {"qrqr", 6}},
      {{"q", "r"}, {"qr", "qr"}}, TokenizerDef::kDefaultMarker, {}));
}

VocabPatch unit_patch(std::vector<TokenId> removed,
                      std::vector<std::pair<TokenId, Seq>> units, int n_max = 2) {
  VocabPatch p;
  p.n_max = n_max;
  p.removed = std::move(removed);
  for (auto& [id, ids] : units) p.added.push_back({id, std::move(ids), ""});
  return p;
}

// rows 0..rows-1 hold [i, 10 - i]
EmbeddingMatrix ramp_matrix(EmbedRole role, std::uint32_t rows) {
  auto m = EmbeddingMatrix::zeros(role, rows, 2);
  for (std::uint32_t i = 0; i < rows; ++i) {
    m.row(i)[0] = static_cast<float>(i);
    m.row(i)[1] = static_cast<float>(10.0 - i);
  }
  return m;
}

}  // namespace

TEST_CASE("exponential weights put the mass on the trailing constituent") {
  auto w = exp_weights(2, EmbedRole::Input, 2.0);
  REQUIRE(w.size() == 2);
  CHECK(w[0] == doctest::Approx(0.119202922).epsilon(1e-7));
  CHECK(w[1] == doctest::Approx(0.880797078).epsilon(1e-7));

  auto w3 = exp_weights(3, EmbedRole::Input, 2.0);
  CHECK(w3[0] == doctest::Approx(0.0158762400).epsilon(1e-7));
  CHECK(w3[1] == doctest::Approx(0.1173104278).epsilon(1e-7));
  CHECK(w3[2] == doctest::Approx(0.8668133322).epsilon(1e-7));

  // Output role mirrors the input role exactly.
  auto out = exp_weights(3, EmbedRole::Output, 2.0);
  for (std::size_t i = 0; i < 3; ++i) CHECK(out[i] == doctest::Approx(w3[2 - i]).epsilon(1e-12));

  CHECK(exp_weights(1, EmbedRole::Input, 2.0) == std::vector<double>{1.0});
  CHECK(exp_weights(1, EmbedRole::Output, 5.0) == std::vector<double>{1.0});
  CHECK_THROWS_AS(exp_weights(0, EmbedRole::Input, 2.0), Error);
}

TEST_CASE("weights are a convex combination at every size and scale") {
  for (const double scale : {0.5, 1.0, 2.0, 5.0}) {
    for (std::size_t k = 1; k <= 16; ++k) {
      for (const EmbedRole role : {EmbedRole::Input, EmbedRole::Output}) {
        auto w = exp_weights(k, role, scale);
        REQUIRE(w.size() == k);
        double sum = 0.0;
        for (const double v : w) {
          CHECK(v > 0.0);
          sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
      }
    }
  }
  // Input weights rise strictly toward the end for positive scales.
  auto w = exp_weights(6, EmbedRole::Input, 1.0);
  for (std::size_t i = 1; i < w.size(); ++i) CHECK(w[i] > w[i - 1]);
}

TEST_CASE("a vanishing scale degenerates to the plain mean") {
  for (std::size_t k = 2; k <= 8; ++k) {
    auto w = exp_weights(k, EmbedRole::Input, 1e-6);
    for (const double v : w) CHECK(v == doctest::Approx(1.0 / k).epsilon(1e-5));
  }
}

TEST_CASE("unit rows become weighted blends of their constituents") {
  auto base = toy_base();
  PatchedVocab pv(base, unit_patch({6}, {{6, {0, 1}}}));

  auto m = ramp_matrix(EmbedRole::Input, 7);
  init_unit_rows(m, pv, InitMode::Exponential, 2.0, 0);
  CHECK(m.row(6)[0] == doctest::Approx(0.880797078).epsilon(1e-6));
  CHECK(m.row(6)[1] == doctest::Approx(9.119202922).epsilon(1e-6));
  for (std::uint32_t r = 0; r < 6; ++r) {  // every other row untouched
    CHECK(m.row(r)[0] == static_cast<float>(r));
    CHECK(m.row(r)[1] == static_cast<float>(10.0 - r));
  }

  auto out = ramp_matrix(EmbedRole::Output, 7);
  init_unit_rows(out, pv, InitMode::Exponential, 2.0, 0);
  CHECK(out.row(6)[0] == doctest::Approx(0.119202922).epsilon(1e-6));
  CHECK(out.row(6)[1] == doctest::Approx(9.880797078).epsilon(1e-6));

  auto mean = ramp_matrix(EmbedRole::Input, 7);
  init_unit_rows(mean, pv, InitMode::Mean, 2.0, 0);
  CHECK(mean.row(6)[0] == doctest::Approx(0.5));
  CHECK(mean.row(6)[1] == doctest::Approx(9.5));

  // Blends stay inside the per-dimension hull of the constituents.
  for (const auto& mm : {m, out, mean}) {
    CHECK(mm.row(6)[0] >= 0.0f);
    CHECK(mm.row(6)[0] <= 1.0f);
    CHECK(mm.row(6)[1] >= 9.0f);
    CHECK(mm.row(6)[1] <= 10.0f);
  }
}

TEST_CASE("random init matches the base matrix moments deterministically") {
  auto base = toy_base();
  PatchedVocab pv(base, unit_patch({6}, {{6, {0, 1}}}));

  // Constant columns have zero variance: the drawn row is exactly the mean.
  auto flat = EmbeddingMatrix::zeros(EmbedRole::Input, 7, 2);
  for (std::uint32_t r = 0; r < 7; ++r) {
    flat.row(r)[0] = 3.5f;
    flat.row(r)[1] = -2.0f;
  }
  init_unit_rows(flat, pv, InitMode::Random, 2.0, 123);
  CHECK(flat.row(6)[0] == doctest::Approx(3.5));
  CHECK(flat.row(6)[1] == doctest::Approx(-2.0));

  auto a = ramp_matrix(EmbedRole::Input, 7);
  auto b = ramp_matrix(EmbedRole::Input, 7);
  init_unit_rows(a, pv, InitMode::Random, 2.0, 99);
  init_unit_rows(b, pv, InitMode::Random, 2.0, 99);
  CHECK(a.data == b.data);  // same seed, same draw

  auto c = ramp_matrix(EmbedRole::Input, 7);
  init_unit_rows(c, pv, InitMode::Random, 2.0, 100);
  CHECK(a.row(6)[0] != c.row(6)[0]);  // other seeds draw elsewhere
  for (std::uint32_t r = 0; r < 6; ++r) CHECK(a.row(r)[0] == c.row(r)[0]);
}

TEST_CASE("exactly the added unit rows change") {
  auto base = toy_base();
  PatchedVocab pv(base, unit_patch({6, 5}, {{6, {0, 1}}, {5, {1, 2}}}));
  auto before = ramp_matrix(EmbedRole::Input, 7);
  auto after = patched_matrix(before, pv, InitMode::Exponential, 2.0, 0);
  std::size_t changed = 0;
  for (std::uint32_t r = 0; r < 7; ++r) {
    if (before.row(r)[0] != after.row(r)[0] || before.row(r)[1] != after.row(r)[1]) ++changed;
  }
  CHECK(changed == 2);
  CHECK(after.row(5)[0] != before.row(5)[0]);
  CHECK(after.row(6)[0] != before.row(6)[0]);
}

TEST_CASE("matrix files round-trip byte-identically") {
  std::mt19937_64 rng(5);
  auto m = EmbeddingMatrix::zeros(EmbedRole::Output, 5, 3);
  for (auto& v : m.data) v = static_cast<float>(static_cast<double>(rng()) / 1e19 - 0.9);

  const std::string path = "embed_roundtrip.avem";
  m.save(path);
  auto back = EmbeddingMatrix::load(path);
  CHECK(back.role == EmbedRole::Output);
  CHECK(back.rows == 5);
  CHECK(back.dim == 3);
  CHECK(back.data == m.data);

  back.save(path + "2");
  std::ifstream f1(path, std::ios::binary), f2(path + "2", std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
  std::remove(path.c_str());
  std::remove((path + "2").c_str());
}

TEST_CASE("corrupt matrix files are rejected") {
  auto m = EmbeddingMatrix::zeros(EmbedRole::Input, 2, 2);
  const std::string path = "embed_corrupt.avem";
  m.save(path);
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();

  auto write_and_expect = [&](std::string mutated) {
    std::ofstream out(path, std::ios::binary);
    out << mutated;
    out.close();
    CHECK_THROWS_AS(EmbeddingMatrix::load(path), Error);
  };
  write_and_expect(bytes.substr(0, bytes.size() - 1));        // truncated payload
  { auto b = bytes; b[0] = 'X'; write_and_expect(b); }        // wrong magic
  { auto b = bytes; b[8] = 7; write_and_expect(b); }          // bad role byte
  { auto b = bytes; b[4] = 9; write_and_expect(b); }          // wrong version

  std::remove(path.c_str());
  CHECK_THROWS_AS(EmbeddingMatrix::load("missing.avem"), Error);
  try {
    EmbeddingMatrix::load("missing.avem");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrKind::Io);
  }
}

TEST_CASE("the raw interop format mirrors the binary one") {
  auto m = ramp_matrix(EmbedRole::Output, 4);
  const std::string path = "embed_interop.bin";
  save_raw(m, path);
  auto back = load_raw(path);
  CHECK(back.role == m.role);
  CHECK(back.rows == m.rows);
  CHECK(back.dim == m.dim);
  CHECK(back.data == m.data);
  std::remove(path.c_str());

  auto expect_bad = [&](const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
    out.close();
    CHECK_THROWS_AS(load_raw(path), Error);
    std::remove(path.c_str());
  };
  expect_bad("ntok-embeddings input 5\n");          // missing dim
  expect_bad("wrong-tag input 5 3\n");              // bad tag
  expect_bad("ntok-embeddings sideways 5 3\n");     // bad role
  expect_bad("ntok-embeddings input 1 1 extra\n");  // trailing junk
  expect_bad("ntok-embeddings input 1 1\nxx");      // short payload
  expect_bad("no newline at all");
}

TEST_CASE("file-to-file patching only rewrites unit rows") {
  auto base = toy_base();
  PatchedVocab pv(base, unit_patch({6}, {{6, {0, 1}}}));
  const std::string in_path = "embed_in.avem";
  const std::string out_path = "embed_out.avem";
  ramp_matrix(EmbedRole::Input, 7).save(in_path);

  patch_embeddings_file(in_path, out_path, pv, InitMode::Exponential, 2.0, 0);
  auto out = EmbeddingMatrix::load(out_path);
  CHECK(out.row(6)[0] == doctest::Approx(0.880797078).epsilon(1e-6));
  for (std::uint32_t r = 0; r < 6; ++r) CHECK(out.row(r)[0] == static_cast<float>(r));
  std::remove(in_path.c_str());
  std::remove(out_path.c_str());
}

TEST_CASE("initialization refuses matrices that cannot host the units") {
  auto base = toy_base();
  PatchedVocab pv(base, unit_patch({6}, {{6, {0, 1}}}));
  auto small = ramp_matrix(EmbedRole::Input, 6);  // no row for id 6
  CHECK_THROWS_AS(init_unit_rows(small, pv, InitMode::Exponential, 2.0, 0), Error);
  try {
    init_unit_rows(small, pv, InitMode::Exponential, 2.0, 0);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrKind::Data);
  }
}

TEST_CASE("names for roles and modes round-trip") {
  CHECK(embed_role_from("input") == EmbedRole::Input);
  CHECK(embed_role_from("output") == EmbedRole::Output);
  CHECK(init_mode_from("exponential") == InitMode::Exponential);
  CHECK(init_mode_from("mean") == InitMode::Mean);
  CHECK(init_mode_from("random") == InitMode::Random);
  CHECK(std::string(to_string(EmbedRole::Output)) == "output");
  CHECK(std::string(to_string(InitMode::Random)) == "random");
  CHECK_THROWS_AS(embed_role_from("both"), Error);
  CHECK_THROWS_AS(init_mode_from("zeros"), Error);

  CHECK(trainable_components() ==
        std::vector<std::string>{"input_embeddings", "lm_head", "layer.first", "layer.last"});
}
