#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ntok {

// Declarative run configuration: INI-style sections, strict about unknown
// sections and keys. Defaults reproduce the primary setup (n_max 3,
// m 10000, overlap-aware selection, exponential init).
struct PipelineConfig {
  // [corpus]
  std::string corpus_path;
  std::string manifest_path;

  // [tokenizer]
  std::string tokenizer_path;

  // [miner]
  int n_max = 3;
  std::uint64_t min_freq = 2;
  bool words_only = false;

  // [selector]
  std::uint64_t m = 10000;
  std::string scoring_mode = "algorithm1";
  std::string selection_mode = "overlap_aware";
  std::string update_weight = "affected";

  // [embeddings]
  std::string strategy = "exponential";
  double exponent_scale = 2.0;
  std::uint64_t rng_seed = 0;
  std::string input_matrix;   // optional base matrices to patch
  std::string output_matrix;

  // [output]
  std::string output_dir = "out";
  bool per_doc = false;
  int threads = 0;  // 0 = hardware concurrency

  // [ablate]
  std::vector<int> ablate_n = {2, 3, 4};
  std::vector<std::uint64_t> ablate_m;  // empty = use [selector] m
  std::vector<std::string> ablate_selections = {"overlap_aware", "naive_greedy"};
  std::vector<std::string> ablate_encoders = {"greedy", "optimal"};
  std::vector<bool> ablate_words_only = {false};

  static PipelineConfig load(const std::string& path);
  static PipelineConfig from_text(std::string_view text, const std::string& origin);
  void validate() const;     // Usage error on out-of-range or unknown mode values
  std::string to_ini() const;  // resolved config, fixed key order
};

}  // namespace ntok
