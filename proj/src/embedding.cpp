#include "ntok/embedding.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "ntok/errors.hpp"

namespace ntok {

namespace {

constexpr char kMagic[4] = {'A', 'V', 'E', 'M'};
constexpr std::uint32_t kVersion = 1;
constexpr char kRawHeader[] = "ntok-embeddings";

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos++])) << (8 * i);
  return v;
}

void append_floats(std::string& out, const std::vector<float>& data) {
  out.reserve(out.size() + data.size() * 4);
  for (const float f : data) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) io_error("cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out.flush()) io_error("failed writing " + path);
}

std::vector<float> parse_floats(const std::string& bytes, std::size_t pos, std::uint64_t count,
                                const std::string& path) {
  if (bytes.size() - pos != count * 4) {
    data_error(path + ": expected " + std::to_string(count * 4) + " payload bytes, found " +
               std::to_string(bytes.size() - pos));
  }
  std::vector<float> data(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    data[i] = std::bit_cast<float>(get_u32(bytes, pos));
  }
  return data;
}

// 53-bit uniform in [0, 1)
double unit_uniform(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

// One standard normal; hand-rolled so every platform draws identical values.
double standard_normal(std::mt19937_64& eng) {
  constexpr double two_pi = 6.283185307179586476925286766559;
  const double u1 = unit_uniform(eng);
  const double u2 = unit_uniform(eng);
  return std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(two_pi * u2);
}

}  // namespace

const char* to_string(EmbedRole r) { return r == EmbedRole::Input ? "input" : "output"; }

const char* to_string(InitMode m) {
  switch (m) {
    case InitMode::Exponential: return "exponential";
    case InitMode::Mean: return "mean";
    default: return "random";
  }
}

EmbedRole embed_role_from(const std::string& s) {
  if (s == "input") return EmbedRole::Input;
  if (s == "output") return EmbedRole::Output;
  usage_error("unknown embedding role \"" + s + "\" (expected input or output)");
}

InitMode init_mode_from(const std::string& s) {
  if (s == "exponential") return InitMode::Exponential;
  if (s == "mean") return InitMode::Mean;
  if (s == "random") return InitMode::Random;
  usage_error("unknown init mode \"" + s + "\" (expected exponential, mean or random)");
}

std::vector<double> exp_weights(std::size_t k, EmbedRole role, double scale) {
  if (k == 0) usage_error("weight count must be positive");
  const double sign = role == EmbedRole::Input ? 1.0 : -1.0;
  std::vector<double> w(k);
  double peak = -1e300;
  for (std::size_t i = 0; i < k; ++i) {
    w[i] = sign * scale * static_cast<double>(i + 1);
    peak = std::max(peak, w[i]);
  }
  double sum = 0.0;
  for (auto& v : w) {
    v = std::exp(v - peak);  // shift for stability; cancels in the ratio
    sum += v;
  }
  for (auto& v : w) v /= sum;
  return w;
}

EmbeddingMatrix EmbeddingMatrix::zeros(EmbedRole role, std::uint32_t rows, std::uint32_t dim) {
  EmbeddingMatrix m;
  m.role = role;
  m.rows = rows;
  m.dim = dim;
  m.data.assign(static_cast<std::size_t>(rows) * dim, 0.0f);
  return m;
}

std::span<float> EmbeddingMatrix::row(std::uint32_t i) {
  if (i >= rows) data_error("row " + std::to_string(i) + " out of range (matrix has " +
                            std::to_string(rows) + " rows)");
  return {data.data() + static_cast<std::size_t>(i) * dim, dim};
}

std::span<const float> EmbeddingMatrix::row(std::uint32_t i) const {
  if (i >= rows) data_error("row " + std::to_string(i) + " out of range (matrix has " +
                            std::to_string(rows) + " rows)");
  return {data.data() + static_cast<std::size_t>(i) * dim, dim};
}

void EmbeddingMatrix::save(const std::string& path) const {
  if (data.size() != static_cast<std::size_t>(rows) * dim) {
    data_error("matrix shape " + std::to_string(rows) + "x" + std::to_string(dim) +
               " does not match its payload of " + std::to_string(data.size()) + " values");
  }
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  out.push_back(static_cast<char>(role));
  put_u32(out, rows);
  put_u32(out, dim);
  append_floats(out, data);
  write_file(path, out);
}

EmbeddingMatrix EmbeddingMatrix::load(const std::string& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 17 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    data_error(path + ": not an embedding matrix file");
  }
  std::size_t pos = 4;
  const std::uint32_t version = get_u32(bytes, pos);
  if (version != kVersion) {
    data_error(path + ": unsupported version " + std::to_string(version));
  }
  const auto role_byte = static_cast<unsigned char>(bytes[pos++]);
  if (role_byte > 1) data_error(path + ": bad role byte " + std::to_string(role_byte));
  EmbeddingMatrix m;
  m.role = static_cast<EmbedRole>(role_byte);
  m.rows = get_u32(bytes, pos);
  m.dim = get_u32(bytes, pos);
  m.data = parse_floats(bytes, pos, static_cast<std::uint64_t>(m.rows) * m.dim, path);
  return m;
}

void save_raw(const EmbeddingMatrix& m, const std::string& path) {
  std::string out = std::string(kRawHeader) + " " + to_string(m.role) + " " +
                    std::to_string(m.rows) + " " + std::to_string(m.dim) + "\n";
  append_floats(out, m.data);
  write_file(path, out);
}

EmbeddingMatrix load_raw(const std::string& path) {
  const std::string bytes = read_file(path);
  const std::size_t eol = bytes.find('\n');
  if (eol == std::string::npos) data_error(path + ": missing header line");
  std::istringstream header(bytes.substr(0, eol));
  std::string tag, role_name;
  std::uint32_t rows = 0, dim = 0;
  if (!(header >> tag >> role_name >> rows >> dim) || tag != kRawHeader) {
    data_error(path + ": malformed header line");
  }
  std::string rest;
  if (header >> rest) data_error(path + ": trailing junk in header line");
  EmbeddingMatrix m;
  if (role_name == "input") {
    m.role = EmbedRole::Input;
  } else if (role_name == "output") {
    m.role = EmbedRole::Output;
  } else {
    data_error(path + ": unknown role \"" + role_name + "\"");
  }
  m.rows = rows;
  m.dim = dim;
  m.data = parse_floats(bytes, eol + 1, static_cast<std::uint64_t>(rows) * dim, path);
  return m;
}

void init_unit_rows(EmbeddingMatrix& m, const PatchedVocab& pv, InitMode mode, double scale,
                    std::uint64_t seed) {
  // Per-dimension moments of the base matrix, for random mode.
  std::vector<double> mean(m.dim, 0.0), stddev(m.dim, 0.0);
  if (mode == InitMode::Random) {
    if (m.rows == 0) data_error("cannot moment-match an empty matrix");
    std::vector<double> sq(m.dim, 0.0);
    for (std::uint32_t r = 0; r < m.rows; ++r) {
      const auto row = m.row(r);
      for (std::uint32_t d = 0; d < m.dim; ++d) {
        mean[d] += row[d];
        sq[d] += static_cast<double>(row[d]) * row[d];
      }
    }
    for (std::uint32_t d = 0; d < m.dim; ++d) {
      mean[d] /= m.rows;
      stddev[d] = std::sqrt(std::max(0.0, sq[d] / m.rows - mean[d] * mean[d]));
    }
  }

  std::vector<double> acc(m.dim);
  for (const TokenId id : pv.unit_ids()) {
    if (id < 0 || static_cast<std::uint32_t>(id) >= m.rows) {
      data_error("unit id " + std::to_string(id) + " has no row in a " + std::to_string(m.rows) +
                 "-row matrix");
    }
    const auto& parts = pv.unit_base_ids(id);

    if (mode == InitMode::Random) {
      std::mt19937_64 eng(seed + static_cast<std::uint64_t>(id));
      auto out = m.row(static_cast<std::uint32_t>(id));
      for (std::uint32_t d = 0; d < m.dim; ++d) {
        out[d] = static_cast<float>(mean[d] + stddev[d] * standard_normal(eng));
      }
      continue;
    }

    std::vector<double> w = mode == InitMode::Mean
                                ? std::vector<double>(parts.size(), 1.0 / parts.size())
                                : exp_weights(parts.size(), m.role, scale);
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t p = 0; p < parts.size(); ++p) {
      if (parts[p] < 0 || static_cast<std::uint32_t>(parts[p]) >= m.rows) {
        data_error("constituent id " + std::to_string(parts[p]) + " has no row in a " +
                   std::to_string(m.rows) + "-row matrix");
      }
      const auto src = m.row(static_cast<std::uint32_t>(parts[p]));
      for (std::uint32_t d = 0; d < m.dim; ++d) acc[d] += w[p] * src[d];
    }
    auto out = m.row(static_cast<std::uint32_t>(id));
    for (std::uint32_t d = 0; d < m.dim; ++d) out[d] = static_cast<float>(acc[d]);
  }
}

EmbeddingMatrix patched_matrix(EmbeddingMatrix base, const PatchedVocab& pv, InitMode mode,
                               double scale, std::uint64_t seed) {
  init_unit_rows(base, pv, mode, scale, seed);
  return base;
}

void patch_embeddings_file(const std::string& in_path, const std::string& out_path,
                           const PatchedVocab& pv, InitMode mode, double scale,
                           std::uint64_t seed) {
  EmbeddingMatrix m = EmbeddingMatrix::load(in_path);
  init_unit_rows(m, pv, mode, scale, seed);
  m.save(out_path);
}

const std::vector<std::string>& trainable_components() {
  static const std::vector<std::string> kComponents{"input_embeddings", "lm_head", "layer.first",
                                                    "layer.last"};
  return kComponents;
}

}  // namespace ntok
