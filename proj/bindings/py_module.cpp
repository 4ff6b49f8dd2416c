// Python surface over the core library: tokenize, mine, patch, measure and
// embedding-matrix surgery, with numpy in/out for matrices.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <memory>

#include "ntok/embedding.hpp"
#include "ntok/errors.hpp"
#include "ntok/miner.hpp"
#include "ntok/patched.hpp"
#include "ntok/selector.hpp"
#include "ntok/tokenizer.hpp"

namespace py = pybind11;

namespace {

using namespace ntok;

IdDocs encode_texts(const TokenizerDef& tok, const std::vector<std::string>& texts) {
  IdDocs out;
  out.reserve(texts.size());
  EncodeCache cache;
  for (const auto& t : texts) out.push_back(encode_base(t, tok, cache).ids);
  return out;
}

CandidateTable mine_texts(const std::shared_ptr<TokenizerDef>& tok,
                          const std::vector<std::string>& texts, int n_max,
                          std::uint64_t min_freq, bool words_only, int threads) {
  MinerOptions opt;
  opt.n_max = n_max;
  opt.min_freq = min_freq;
  opt.words_only = words_only;
  opt.threads = threads;
  const IdDocs ids = encode_texts(*tok, texts);
  const TokenWordFlags flags = word_flags(*tok);
  CandidateTable table = build_candidate_table(ids, opt, tok->specials(), &flags);
  table.tokenizer_sha256 = tok->fingerprint();
  return table;
}

BuildPatchResult build_patch_py(const std::shared_ptr<TokenizerDef>& tok,
                                const CandidateTable& table, std::size_t m,
                                const std::string& selection, const std::string& scoring) {
  SelectOptions opt;
  opt.m = m;
  opt.selection = selection_mode_from(selection);
  opt.scoring = scoring_mode_from(scoring);
  return build_patch(*tok, table, opt);
}

py::array_t<float> matrix_numpy(const EmbeddingMatrix& m) {
  py::array_t<float> arr({static_cast<py::ssize_t>(m.rows), static_cast<py::ssize_t>(m.dim)});
  std::memcpy(arr.mutable_data(), m.data.data(), m.data.size() * sizeof(float));
  return arr;
}

EmbeddingMatrix matrix_from_numpy(
    const std::string& role, py::array_t<float, py::array::c_style | py::array::forcecast> arr) {
  if (arr.ndim() != 2) usage_error("expected a 2-d float array");
  EmbeddingMatrix m = EmbeddingMatrix::zeros(embed_role_from(role),
                                             static_cast<std::uint32_t>(arr.shape(0)),
                                             static_cast<std::uint32_t>(arr.shape(1)));
  std::memcpy(m.data.data(), arr.data(), m.data.size() * sizeof(float));
  return m;
}

EmbeddingMatrix matrix_load(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) io_error("cannot open " + path);
  char magic[4] = {0, 0, 0, 0};
  probe.read(magic, 4);
  probe.close();
  return std::string_view(magic, 4) == "AVEM" ? EmbeddingMatrix::load(path) : load_raw(path);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "adapt a subword vocabulary to a domain corpus with multi-token units";
  m.attr("__version__") = "0.1.0";

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(e.kind() == ErrKind::Io ? PyExc_OSError : PyExc_ValueError, e.what());
    }
  });

  py::class_<TokenizerDef, std::shared_ptr<TokenizerDef>>(m, "Tokenizer")
      .def_static(
          "load",
          [](const std::string& path) {
            return std::make_shared<TokenizerDef>(TokenizerDef::load(path));
          },
          py::arg("path"))
      .def_static(
          "from_json_text",
          [](const std::string& text, const std::string& origin) {
            return std::make_shared<TokenizerDef>(TokenizerDef::from_json_text(text, origin));
          },
          py::arg("text"), py::arg("origin") = "<memory>")
      .def(
          "encode",
          [](const TokenizerDef& tok, const std::string& text) {
            return encode_base(text, tok).ids;
          },
          py::arg("text"), py::call_guard<py::gil_scoped_release>())
      .def("encode_batch", &encode_texts, py::arg("texts"),
           py::call_guard<py::gil_scoped_release>())
      .def(
          "decode",
          [](const TokenizerDef& tok, const std::vector<TokenId>& ids) {
            return decode_base(ids, tok);
          },
          py::arg("ids"))
      .def("surface", &TokenizerDef::surface, py::arg("id"))
      .def("id_of", &TokenizerDef::id_of, py::arg("surface"))
      .def("is_special", &TokenizerDef::is_special, py::arg("id"))
      .def("to_json_text", &TokenizerDef::to_json_text)
      .def("save", &TokenizerDef::save, py::arg("path"))
      .def_property_readonly("vocab_size", &TokenizerDef::vocab_size)
      .def_property_readonly("marker", &TokenizerDef::marker)
      .def_property_readonly("fingerprint",
                             [](const TokenizerDef& tok) { return tok.fingerprint(); })
      .def_property_readonly("specials",
                             [](const TokenizerDef& tok) {
                               std::vector<TokenId> out(tok.specials().begin(),
                                                        tok.specials().end());
                               std::sort(out.begin(), out.end());
                               return out;
                             })
      .def("__repr__", [](const TokenizerDef& tok) {
        return "<ntok.Tokenizer vocab_size=" + std::to_string(tok.vocab_size()) + " fingerprint=" +
               tok.fingerprint().substr(0, 12) + ">";
      });

  py::class_<CandidateTable>(m, "CandidateTable")
      .def_readonly("n_max", &CandidateTable::n_max)
      .def_readonly("min_freq", &CandidateTable::min_freq)
      .def_readonly("words_only", &CandidateTable::words_only)
      .def_readonly("total_tokens", &CandidateTable::total_tokens)
      .def_readonly("doc_count", &CandidateTable::doc_count)
      .def_readonly("tokenizer_sha256", &CandidateTable::tokenizer_sha256)
      .def_readonly("corpus_sha256", &CandidateTable::corpus_sha256)
      .def("__len__", [](const CandidateTable& t) { return t.candidates.size(); })
      .def("candidates",
           [](const CandidateTable& t) {
             std::vector<std::pair<std::vector<TokenId>, std::uint64_t>> out;
             out.reserve(t.candidates.size());
             for (std::size_t i = 0; i < t.candidates.size(); ++i) {
               const auto s = t.candidates[i].span();
               out.emplace_back(std::vector<TokenId>(s.begin(), s.end()), t.freq[i]);
             }
             return out;
           })
      .def(
          "freq_of",
          [](const CandidateTable& t, const std::vector<TokenId>& ids) { return t.freq_of(ids); },
          py::arg("ids"))
      .def("save", &CandidateTable::save, py::arg("path"))
      .def_static("load", &CandidateTable::load, py::arg("path"))
      .def("__repr__", [](const CandidateTable& t) {
        return "<ntok.CandidateTable " + std::to_string(t.candidates.size()) + " candidates, n_max=" +
               std::to_string(t.n_max) + ">";
      });

  py::class_<VocabPatch::Added>(m, "Unit")
      .def_readonly("id", &VocabPatch::Added::id)
      .def_readonly("base_ids", &VocabPatch::Added::base_ids)
      .def_readonly("surface", &VocabPatch::Added::surface)
      .def("__repr__", [](const VocabPatch::Added& a) {
        return "<ntok.Unit id=" + std::to_string(a.id) + " surface=\"" + a.surface + "\">";
      });

  py::class_<VocabPatch>(m, "Patch")
      .def_readonly("n_max", &VocabPatch::n_max)
      .def_readonly("scoring_mode", &VocabPatch::scoring_mode)
      .def_readonly("selection_mode", &VocabPatch::selection_mode)
      .def_readonly("removed", &VocabPatch::removed)
      .def_readonly("added", &VocabPatch::added)
      .def_readonly("tokenizer_sha256", &VocabPatch::tokenizer_sha256)
      .def_readonly("corpus_sha256", &VocabPatch::corpus_sha256)
      .def("to_json_text", &VocabPatch::to_json_text)
      .def("save", &VocabPatch::save, py::arg("path"))
      .def_static("load", &VocabPatch::load, py::arg("path"))
      .def("__repr__", [](const VocabPatch& p) {
        return "<ntok.Patch " + std::to_string(p.added.size()) + " units>";
      });

  py::class_<BuildPatchResult>(m, "PatchResult")
      .def_readonly("patch", &BuildPatchResult::patch)
      .def_readonly("truncated", &BuildPatchResult::truncated)
      .def_readonly("vetoed", &BuildPatchResult::vetoed)
      .def_readonly("warnings", &BuildPatchResult::warnings);

  py::class_<PatchedVocab>(m, "PatchedVocab")
      .def(py::init([](const std::shared_ptr<TokenizerDef>& tok, const VocabPatch& patch) {
             return PatchedVocab(tok, patch);
           }),
           py::arg("tokenizer"), py::arg("patch"))
      .def(
          "encode",
          [](const PatchedVocab& pv, const std::string& text, bool optimal) {
            return (optimal ? encode_patched_optimal(text, pv) : encode_patched(text, pv)).ids;
          },
          py::arg("text"), py::arg("optimal") = false,
          py::call_guard<py::gil_scoped_release>())
      .def(
          "decode",
          [](const PatchedVocab& pv, const std::vector<TokenId>& ids) {
            return decode_patched(ids, pv);
          },
          py::arg("ids"))
      .def("is_kept", &PatchedVocab::is_kept, py::arg("id"))
      .def("is_unit", &PatchedVocab::is_unit, py::arg("id"))
      .def("unit_surface", &PatchedVocab::unit_surface, py::arg("id"))
      .def_property_readonly("unit_ids", &PatchedVocab::unit_ids)
      .def_property_readonly("n_max", &PatchedVocab::n_max)
      .def_property_readonly("vocab_size", &PatchedVocab::vocab_size)
      .def("__repr__", [](const PatchedVocab& pv) {
        return "<ntok.PatchedVocab " + std::to_string(pv.unit_ids().size()) + " units over " +
               std::to_string(pv.vocab_size()) + " ids>";
      });

  py::class_<SavingsTotals>(m, "Savings")
      .def_readonly("docs", &SavingsTotals::docs)
      .def_readonly("base_tokens", &SavingsTotals::base_tokens)
      .def_readonly("greedy_tokens", &SavingsTotals::greedy_tokens)
      .def_readonly("optimal_tokens", &SavingsTotals::optimal_tokens)
      .def_property_readonly("greedy_savings_pct", &SavingsTotals::greedy_pct)
      .def_property_readonly("optimal_savings_pct", &SavingsTotals::optimal_pct)
      .def("__repr__", [](const SavingsTotals& s) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "<ntok.Savings greedy=%.3f%% optimal=%.3f%%>",
                      s.greedy_pct(), s.optimal_pct());
        return std::string(buf);
      });

  py::class_<EmbeddingMatrix>(m, "EmbeddingMatrix")
      .def_static(
          "zeros",
          [](const std::string& role, std::uint32_t rows, std::uint32_t dim) {
            return EmbeddingMatrix::zeros(embed_role_from(role), rows, dim);
          },
          py::arg("role"), py::arg("rows"), py::arg("dim"))
      .def_static("load", &matrix_load, py::arg("path"))
      .def_static("from_numpy", &matrix_from_numpy, py::arg("role"), py::arg("array"))
      .def("save", &EmbeddingMatrix::save, py::arg("path"))
      .def(
          "save_raw", [](const EmbeddingMatrix& m, const std::string& p) { save_raw(m, p); },
          py::arg("path"))
      .def("numpy", &matrix_numpy)
      .def_readonly("rows", &EmbeddingMatrix::rows)
      .def_readonly("dim", &EmbeddingMatrix::dim)
      .def_property_readonly("role",
                             [](const EmbeddingMatrix& m) { return to_string(m.role); })
      .def("__repr__", [](const EmbeddingMatrix& m) {
        return std::string("<ntok.EmbeddingMatrix ") + to_string(m.role) + " " +
               std::to_string(m.rows) + "x" + std::to_string(m.dim) + ">";
      });

  m.def("mine", &mine_texts, py::arg("tokenizer"), py::arg("texts"), py::arg("n_max") = 3,
        py::arg("min_freq") = 2, py::arg("words_only") = false, py::arg("threads") = 0,
        py::call_guard<py::gil_scoped_release>(),
        "Count multi-token candidates and their pairwise overlaps in `texts`.");
  m.def("build_patch", &build_patch_py, py::arg("tokenizer"), py::arg("table"), py::arg("m"),
        py::arg("selection") = "overlap_aware", py::arg("scoring") = "algorithm1",
        py::call_guard<py::gil_scoped_release>(),
        "Select m units and pair them with removable low-frequency ids.");
  m.def(
      "measure",
      [](const PatchedVocab& pv, const std::vector<std::string>& texts, int threads) {
        const IdDocs ids = encode_texts(pv.base(), texts);
        return measure_savings(ids, pv, threads);
      },
      py::arg("patched"), py::arg("texts"), py::arg("threads") = 0,
      py::call_guard<py::gil_scoped_release>(),
      "Token savings of the patched vocabulary over the base encoding of `texts`.");
  m.def(
      "exp_weights",
      [](std::size_t k, const std::string& role, double scale) {
        return exp_weights(k, embed_role_from(role), scale);
      },
      py::arg("k"), py::arg("role"), py::arg("scale") = 2.0,
      "Convex combination weights over k constituent rows.");
  m.def(
      "patched_matrix",
      [](const EmbeddingMatrix& base, const PatchedVocab& pv, const std::string& mode,
         double scale, std::uint64_t seed) {
        return patched_matrix(base, pv, init_mode_from(mode), scale, seed);
      },
      py::arg("matrix"), py::arg("patched"), py::arg("mode") = "exponential",
      py::arg("scale") = 2.0, py::arg("seed") = 0,
      py::call_guard<py::gil_scoped_release>(),
      "Copy of `matrix` with every added unit's row re-initialized.");
  m.def("trainable_components", [] { return trainable_components(); },
        "Model components a downstream fine-tune should leave trainable.");
}
