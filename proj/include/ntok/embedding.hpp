#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ntok/patched.hpp"

namespace ntok {

enum class EmbedRole : std::uint8_t { Input = 0, Output = 1 };
enum class InitMode { Exponential, Mean, Random };

const char* to_string(EmbedRole r);
const char* to_string(InitMode m);
EmbedRole embed_role_from(const std::string& s);  // Usage error on junk
InitMode init_mode_from(const std::string& s);    // Usage error on junk

// Convex combination weights over k constituents, w_i proportional to
// exp(sign * scale * i). Input rows weight the last constituent highest
// (it carries the unit's trailing context); output rows mirror that and
// weight the first highest. k == 1 yields {1.0}.
std::vector<double> exp_weights(std::size_t k, EmbedRole role, double scale);

// Row-major float32 matrix with a role tag, stored as
//   "AVEM" | version u32 | role u8 | rows u32 | dim u32 | rows*dim f32, all LE.
struct EmbeddingMatrix {
  EmbedRole role = EmbedRole::Input;
  std::uint32_t rows = 0;
  std::uint32_t dim = 0;
  std::vector<float> data;

  static EmbeddingMatrix zeros(EmbedRole role, std::uint32_t rows, std::uint32_t dim);
  std::span<float> row(std::uint32_t i);
  std::span<const float> row(std::uint32_t i) const;

  void save(const std::string& path) const;
  static EmbeddingMatrix load(const std::string& path);
};

// Interop format: one text header line "ntok-embeddings <role> <rows> <dim>\n"
// followed by raw row-major little-endian float32.
void save_raw(const EmbeddingMatrix& m, const std::string& path);
EmbeddingMatrix load_raw(const std::string& path);

// Overwrite the row of every added unit in place. Exponential and mean modes
// combine the constituent rows; random mode draws each dimension from a
// Gaussian matched to that dimension's moments across the whole base matrix,
// seeded per row with seed + unit id. All other rows are untouched.
void init_unit_rows(EmbeddingMatrix& m, const PatchedVocab& pv, InitMode mode, double scale,
                    std::uint64_t seed);

EmbeddingMatrix patched_matrix(EmbeddingMatrix base, const PatchedVocab& pv, InitMode mode,
                               double scale, std::uint64_t seed);

// Load, patch, save; the file's role tag picks the weight direction.
void patch_embeddings_file(const std::string& in_path, const std::string& out_path,
                           const PatchedVocab& pv, InitMode mode, double scale,
                           std::uint64_t seed);

// Model components a downstream fine-tune should leave trainable.
const std::vector<std::string>& trainable_components();

}  // namespace ntok
