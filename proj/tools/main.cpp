#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "ntok/embedding.hpp"
#include "ntok/errors.hpp"
#include "ntok/patched.hpp"
#include "ntok/pipeline.hpp"

namespace {

using namespace ntok;

struct CommonArgs {
  std::string config_path;
  std::string output_dir;
  int threads = -1;
  bool force = false;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs& c, bool config_required) {
  auto* opt = cmd->add_option("--config", c.config_path, "run configuration (INI)");
  if (config_required) opt->required();
  cmd->add_option("--output-dir", c.output_dir, "output directory (overrides [output] dir)");
  cmd->add_option("--threads", c.threads, "worker threads, 0 = all cores");
  cmd->add_flag("--force", c.force, "replace existing outputs; skip stale-cache errors");
  cmd->add_option("--seed", c.seed, "rng seed (overrides [embeddings] rng_seed)");
}

PipelineConfig resolve_config(const CommonArgs& c) {
  PipelineConfig cfg;
  if (!c.config_path.empty()) cfg = PipelineConfig::load(c.config_path);
  if (!c.output_dir.empty()) cfg.output_dir = c.output_dir;
  if (c.threads >= 0) cfg.threads = c.threads;
  if (c.seed) cfg.rng_seed = *c.seed;
  return cfg;
}

TokenizerDef tokenizer_from(const CommonArgs& c, const std::string& tokenizer_flag) {
  if (!tokenizer_flag.empty()) return TokenizerDef::load(tokenizer_flag);
  const PipelineConfig cfg = resolve_config(c);
  if (cfg.tokenizer_path.empty()) {
    usage_error("pass --tokenizer <file> or a --config with [tokenizer] path");
  }
  return TokenizerDef::load(cfg.tokenizer_path);
}

// Line-oriented id streams: one document per line, ids space-separated.
void cmd_encode(const CommonArgs& c, const std::string& tokenizer_flag,
                const std::string& patch_path, const std::string& in_path,
                const std::string& out_path, bool optimal) {
  auto tok = std::make_shared<TokenizerDef>(tokenizer_from(c, tokenizer_flag));
  std::optional<PatchedVocab> pv;
  if (!patch_path.empty()) pv.emplace(tok, VocabPatch::load(patch_path));

  std::ifstream fin;
  if (!in_path.empty()) {
    fin.open(in_path, std::ios::binary);
    if (!fin) io_error("cannot open " + in_path);
  }
  std::istream& in = in_path.empty() ? std::cin : fin;
  std::ofstream fout;
  if (!out_path.empty()) {
    fout.open(out_path, std::ios::binary);
    if (!fout) io_error("cannot open " + out_path + " for writing");
  }
  std::ostream& out = out_path.empty() ? std::cout : fout;

  EncodeCache cache;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<TokenId> ids;
    if (pv) {
      ids = optimal ? encode_patched_optimal(line, *pv).ids : encode_patched(line, *pv, cache).ids;
    } else {
      ids = encode_base(line, *tok, cache).ids;
    }
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (i) out << ' ';
      out << ids[i];
    }
    out << '\n';
  }
}

void cmd_decode(const CommonArgs& c, const std::string& tokenizer_flag,
                const std::string& patch_path, const std::string& in_path,
                const std::string& out_path) {
  auto tok = std::make_shared<TokenizerDef>(tokenizer_from(c, tokenizer_flag));
  std::optional<PatchedVocab> pv;
  if (!patch_path.empty()) pv.emplace(tok, VocabPatch::load(patch_path));

  std::ifstream fin;
  if (!in_path.empty()) {
    fin.open(in_path, std::ios::binary);
    if (!fin) io_error("cannot open " + in_path);
  }
  std::istream& in = in_path.empty() ? std::cin : fin;
  std::ofstream fout;
  if (!out_path.empty()) {
    fout.open(out_path, std::ios::binary);
    if (!fout) io_error("cannot open " + out_path + " for writing");
  }
  std::ostream& out = out_path.empty() ? std::cout : fout;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<TokenId> ids;
    std::istringstream ss(line);
    std::string word;
    while (ss >> word) {
      try {
        std::size_t used = 0;
        const long v = std::stol(word, &used);
        if (used != word.size() || v < 0) throw std::invalid_argument(word);
        ids.push_back(static_cast<TokenId>(v));
      } catch (const std::logic_error&) {
        data_error("line " + std::to_string(lineno) + ": \"" + word +
                   "\" is not a token id");
      }
    }
    out << (pv ? decode_patched(ids, *pv) : decode_base(ids, *tok)) << '\n';
  }
}

void cmd_init_embeddings(const CommonArgs& c, const std::string& tokenizer_flag,
                         const std::string& patch_path, const std::string& matrix_path,
                         const std::string& out_path, const std::string& strategy_flag,
                         std::optional<double> scale_flag) {
  auto tok = std::make_shared<TokenizerDef>(tokenizer_from(c, tokenizer_flag));
  PatchedVocab pv(tok, VocabPatch::load(patch_path));
  const PipelineConfig cfg = resolve_config(c);
  const InitMode mode = init_mode_from(strategy_flag.empty() ? cfg.strategy : strategy_flag);
  const double scale = scale_flag.value_or(cfg.exponent_scale);
  patch_embeddings_file(matrix_path, out_path, pv, mode, scale, cfg.rng_seed);
  std::cout << "wrote " << out_path << " (" << pv.unit_ids().size() << " rows initialized)\n";
}

void cmd_convert_embeddings(const std::string& in_path, const std::string& out_path,
                            const std::string& to) {
  std::ifstream probe(in_path, std::ios::binary);
  if (!probe) io_error("cannot open " + in_path);
  char magic[4] = {0, 0, 0, 0};
  probe.read(magic, 4);
  probe.close();
  const bool from_avem = std::string_view(magic, 4) == "AVEM";
  const EmbeddingMatrix m = from_avem ? EmbeddingMatrix::load(in_path) : load_raw(in_path);
  if (to == "avem") {
    m.save(out_path);
  } else {
    save_raw(m, out_path);
  }
  std::cout << "wrote " << out_path << " (" << m.rows << "x" << m.dim << ", "
            << to_string(m.role) << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adapt a subword vocabulary to a domain corpus with multi-token units"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "0.1.0");

  CommonArgs mine_args;
  auto* mine = app.add_subcommand("mine", "count candidate units and cache the table");
  add_common(mine, mine_args, true);

  CommonArgs adapt_args;
  std::string adapt_table;
  auto* adapt = app.add_subcommand("adapt", "build the patch, savings and hand-off artifacts");
  add_common(adapt, adapt_args, true);
  adapt->add_option("--table", adapt_table, "reuse a mined candidates.avct cache");

  CommonArgs stats_args;
  std::string stats_patch, stats_split = "test";
  bool stats_per_doc = false;
  auto* stats = app.add_subcommand("stats", "measure savings of an existing patch");
  add_common(stats, stats_args, true);
  stats->add_option("--patch", stats_patch, "patch.json to evaluate")->required();
  stats->add_option("--split", stats_split, "train or test (default test)");
  stats->add_flag("--per-doc", stats_per_doc, "include a per-document breakdown");

  CommonArgs ablate_args;
  auto* ablate = app.add_subcommand("ablate", "sweep the [ablate] grid and tabulate savings");
  add_common(ablate, ablate_args, true);

  CommonArgs encode_args;
  std::string enc_tokenizer, enc_patch, enc_in, enc_out;
  bool enc_optimal = false;
  auto* encode = app.add_subcommand("encode", "text lines to token ids (stdin/stdout)");
  add_common(encode, encode_args, false);
  encode->add_option("--tokenizer", enc_tokenizer, "tokenizer definition JSON");
  encode->add_option("--patch", enc_patch, "apply a patch while encoding");
  encode->add_option("--in", enc_in, "input file (default stdin)");
  encode->add_option("--out", enc_out, "output file (default stdout)");
  encode->add_flag("--optimal", enc_optimal, "minimum-token segmentation (needs --patch)");

  CommonArgs decode_args;
  std::string dec_tokenizer, dec_patch, dec_in, dec_out;
  auto* decode = app.add_subcommand("decode", "token ids back to text lines (stdin/stdout)");
  add_common(decode, decode_args, false);
  decode->add_option("--tokenizer", dec_tokenizer, "tokenizer definition JSON");
  decode->add_option("--patch", dec_patch, "decode under a patch");
  decode->add_option("--in", dec_in, "input file (default stdin)");
  decode->add_option("--out", dec_out, "output file (default stdout)");

  CommonArgs init_args;
  std::string init_tokenizer, init_patch, init_matrix, init_out, init_strategy;
  std::optional<double> init_scale;
  auto* init = app.add_subcommand("init-embeddings", "initialize unit rows in a matrix file");
  add_common(init, init_args, false);
  init->add_option("--tokenizer", init_tokenizer, "tokenizer definition JSON");
  init->add_option("--patch", init_patch, "patch.json with the added units")->required();
  init->add_option("--matrix", init_matrix, "base matrix (AVEM)")->required();
  init->add_option("--out", init_out, "patched matrix destination")->required();
  init->add_option("--strategy", init_strategy, "exponential, mean or random");
  init->add_option("--scale", init_scale, "exponent scale override");

  std::string conv_in, conv_out, conv_to;
  auto* conv = app.add_subcommand("convert-embeddings", "convert between AVEM and raw layouts");
  conv->add_option("--in", conv_in, "source matrix file")->required();
  conv->add_option("--out", conv_out, "destination file")->required();
  conv->add_option("--to", conv_to, "target format: avem or raw")
      ->required()
      ->check(CLI::IsMember({"avem", "raw"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // any parse failure is a usage error
  }

  try {
    if (mine->parsed()) {
      run_mine(resolve_config(mine_args), mine_args.force);
    } else if (adapt->parsed()) {
      run_adapt(resolve_config(adapt_args), adapt_args.force, adapt_table);
    } else if (stats->parsed()) {
      PipelineConfig cfg = resolve_config(stats_args);
      if (stats_per_doc) cfg.per_doc = true;
      run_stats(cfg, stats_patch, stats_split);
    } else if (ablate->parsed()) {
      run_ablate(resolve_config(ablate_args), ablate_args.force);
    } else if (encode->parsed()) {
      cmd_encode(encode_args, enc_tokenizer, enc_patch, enc_in, enc_out, enc_optimal);
    } else if (decode->parsed()) {
      cmd_decode(decode_args, dec_tokenizer, dec_patch, dec_in, dec_out);
    } else if (init->parsed()) {
      cmd_init_embeddings(init_args, init_tokenizer, init_patch, init_matrix, init_out,
                          init_strategy, init_scale);
    } else if (conv->parsed()) {
      cmd_convert_embeddings(conv_in, conv_out, conv_to);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
