#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace ntok {

// Incremental SHA-256 (FIPS 180-4). Self-contained so artifacts can be
// fingerprinted without pulling in a crypto library.
class Sha256 {
 public:
  Sha256() { reset(); }
  void reset();
  void update(const void* data, std::size_t len);
  void update(std::string_view s) { update(s.data(), s.size()); }
  std::array<std::uint8_t, 32> finish();
  std::string finish_hex();

  static std::string hex(std::string_view data);
  static std::string file_hex(const std::string& path);  // throws Io on failure

 private:
  void compress(const std::uint8_t* block);
  std::uint32_t state_[8];
  std::uint64_t total_ = 0;
  std::uint8_t buf_[64];
  std::size_t buffered_ = 0;
};

}  // namespace ntok
