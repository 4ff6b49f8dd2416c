#include "ntok/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "ntok/embedding.hpp"
#include "ntok/errors.hpp"
#include "ntok/selector.hpp"
#include "ntok/types.hpp"

namespace ntok {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// shortest decimal form that parses back to the same double
std::string format_double(double v) {
  for (int prec = 6; prec <= 17; ++prec) {
    std::ostringstream ss;
    ss << std::setprecision(prec) << v;
    if (std::stod(ss.str()) == v) return std::move(ss).str();
  }
  return std::to_string(v);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(value);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Parser {
  const std::string& origin;
  std::size_t lineno = 0;

  [[noreturn]] void fail(const std::string& msg) const {
    data_error(origin + ":" + std::to_string(lineno) + ": " + msg);
  }

  bool to_bool(const std::string& v) const {
    if (v == "true") return true;
    if (v == "false") return false;
    fail("expected true or false, got \"" + v + "\"");
  }

  std::int64_t to_int(const std::string& v) const {
    try {
      std::size_t used = 0;
      const std::int64_t n = std::stoll(v, &used);
      if (used != v.size()) fail("trailing junk after integer \"" + v + "\"");
      return n;
    } catch (const std::logic_error&) {
      fail("expected an integer, got \"" + v + "\"");
    }
  }

  std::uint64_t to_u64(const std::string& v) const {
    const std::int64_t n = to_int(v);
    if (n < 0) fail("expected a non-negative integer, got \"" + v + "\"");
    return static_cast<std::uint64_t>(n);
  }

  double to_double(const std::string& v) const {
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used != v.size() || !std::isfinite(d)) fail("expected a finite number, got \"" + v + "\"");
      return d;
    } catch (const std::logic_error&) {
      fail("expected a number, got \"" + v + "\"");
    }
  }
};

}  // namespace

PipelineConfig PipelineConfig::from_text(std::string_view text, const std::string& origin) {
  PipelineConfig cfg;
  Parser p{origin};
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;

  while (std::getline(in, raw)) {
    ++p.lineno;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;

    if (line.front() == '[') {
      if (line.back() != ']') p.fail("unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "corpus" && section != "tokenizer" && section != "miner" &&
          section != "selector" && section != "embeddings" && section != "output" &&
          section != "ablate") {
        p.fail("unknown section [" + section + "]");
      }
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) p.fail("expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) p.fail("key \"" + key + "\" outside any section");

    auto unknown = [&]() {
      p.fail("unknown key \"" + key + "\" in section [" + section + "]");
    };

    if (section == "corpus") {
      if (key == "path") {
        cfg.corpus_path = value;
      } else if (key == "manifest") {
        cfg.manifest_path = value;
      } else {
        unknown();
      }
    } else if (section == "tokenizer") {
      if (key == "path") {
        cfg.tokenizer_path = value;
      } else {
        unknown();
      }
    } else if (section == "miner") {
      if (key == "n_max") {
        cfg.n_max = static_cast<int>(p.to_int(value));
      } else if (key == "min_freq") {
        cfg.min_freq = p.to_u64(value);
      } else if (key == "words_only") {
        cfg.words_only = p.to_bool(value);
      } else {
        unknown();
      }
    } else if (section == "selector") {
      if (key == "m") {
        cfg.m = p.to_u64(value);
      } else if (key == "scoring_mode") {
        cfg.scoring_mode = value;
      } else if (key == "selection_mode") {
        cfg.selection_mode = value;
      } else if (key == "update_weight") {
        cfg.update_weight = value;
      } else {
        unknown();
      }
    } else if (section == "embeddings") {
      if (key == "strategy") {
        cfg.strategy = value;
      } else if (key == "exponent_scale") {
        cfg.exponent_scale = p.to_double(value);
      } else if (key == "rng_seed") {
        cfg.rng_seed = p.to_u64(value);
      } else if (key == "input_matrix") {
        cfg.input_matrix = value;
      } else if (key == "output_matrix") {
        cfg.output_matrix = value;
      } else {
        unknown();
      }
    } else if (section == "output") {
      if (key == "dir") {
        cfg.output_dir = value;
      } else if (key == "per_doc") {
        cfg.per_doc = p.to_bool(value);
      } else if (key == "threads") {
        cfg.threads = static_cast<int>(p.to_int(value));
      } else {
        unknown();
      }
    } else {  // ablate
      if (key == "n_values") {
        cfg.ablate_n.clear();
        for (const auto& item : split_list(value)) {
          cfg.ablate_n.push_back(static_cast<int>(p.to_int(item)));
        }
      } else if (key == "m_values") {
        cfg.ablate_m.clear();
        for (const auto& item : split_list(value)) cfg.ablate_m.push_back(p.to_u64(item));
      } else if (key == "selections") {
        cfg.ablate_selections = split_list(value);
      } else if (key == "encoders") {
        cfg.ablate_encoders = split_list(value);
      } else if (key == "words_only_values") {
        cfg.ablate_words_only.clear();
        for (const auto& item : split_list(value)) cfg.ablate_words_only.push_back(p.to_bool(item));
      } else {
        unknown();
      }
    }
  }
  return cfg;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str(), path);
}

void PipelineConfig::validate() const {
  if (n_max < 2 || n_max > kMaxSpan) {
    usage_error("n_max " + std::to_string(n_max) + " out of range [2, " +
                std::to_string(kMaxSpan) + "]");
  }
  if (min_freq < 1) usage_error("min_freq must be at least 1");
  if (m < 1) usage_error("m must be at least 1");
  if (threads < 0) usage_error("threads must be non-negative");
  if (exponent_scale <= 0.0) usage_error("exponent_scale must be positive");
  scoring_mode_from(scoring_mode);
  selection_mode_from(selection_mode);
  init_mode_from(strategy);
  if (update_weight != "affected" && update_weight != "selected") {
    usage_error("unknown update_weight \"" + update_weight + "\"");
  }
  for (const int n : ablate_n) {
    if (n < 2 || n > kMaxSpan) {
      usage_error("ablate n value " + std::to_string(n) + " out of range [2, " +
                  std::to_string(kMaxSpan) + "]");
    }
  }
  for (const std::uint64_t mv : ablate_m) {
    if (mv < 1) usage_error("ablate m values must be at least 1");
  }
  for (const auto& s : ablate_selections) selection_mode_from(s);
  for (const auto& e : ablate_encoders) {
    if (e != "greedy" && e != "optimal") usage_error("unknown encoder \"" + e + "\"");
  }
  if (ablate_n.empty() || ablate_selections.empty() || ablate_encoders.empty() ||
      ablate_words_only.empty()) {
    usage_error("ablate lists must not be empty");
  }
}

std::string PipelineConfig::to_ini() const {
  std::ostringstream out;
  out << "[corpus]\n"
      << "path = " << corpus_path << "\n"
      << "manifest = " << manifest_path << "\n\n"
      << "[tokenizer]\n"
      << "path = " << tokenizer_path << "\n\n"
      << "[miner]\n"
      << "n_max = " << n_max << "\n"
      << "min_freq = " << min_freq << "\n"
      << "words_only = " << (words_only ? "true" : "false") << "\n\n"
      << "[selector]\n"
      << "m = " << m << "\n"
      << "scoring_mode = " << scoring_mode << "\n"
      << "selection_mode = " << selection_mode << "\n"
      << "update_weight = " << update_weight << "\n\n"
      << "[embeddings]\n"
      << "strategy = " << strategy << "\n"
      << "exponent_scale = " << format_double(exponent_scale) << "\n"
      << "rng_seed = " << rng_seed << "\n"
      << "input_matrix = " << input_matrix << "\n"
      << "output_matrix = " << output_matrix << "\n\n"
      << "[output]\n"
      << "dir = " << output_dir << "\n"
      << "per_doc = " << (per_doc ? "true" : "false") << "\n"
      << "threads = " << threads << "\n\n"
      << "[ablate]\n";
  auto join = [&out](const char* key, auto format_item, const auto& items) {
    out << key << " = ";
    bool first = true;
    for (const auto& item : items) {
      if (!first) out << ",";
      first = false;
      format_item(item);
    }
    out << "\n";
  };
  join("n_values", [&](int v) { out << v; }, ablate_n);
  join("m_values", [&](std::uint64_t v) { out << v; }, ablate_m);
  join("selections", [&](const std::string& v) { out << v; }, ablate_selections);
  join("encoders", [&](const std::string& v) { out << v; }, ablate_encoders);
  join("words_only_values", [&](bool v) { out << (v ? "true" : "false"); }, ablate_words_only);
  return std::move(out).str();
}

}  // namespace ntok
