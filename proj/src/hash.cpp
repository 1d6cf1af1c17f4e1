#include "truex/hash.hpp"

#include <openssl/evp.h>

#include <array>
#include <memory>

#include "truex/json_io.hpp"

namespace truex {

namespace {

std::array<unsigned char, 32> digest(std::string_view data) {
  std::array<unsigned char, 32> out{};
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr);
  return out;
}

}  // namespace

std::string sha256_hex(std::string_view data) {
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (unsigned char b : digest(data)) {
    out += hex[b >> 4];
    out += hex[b & 0xf];
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_text_file(path)); }

uint64_t derive_seed(uint64_t run_seed, std::string_view name) {
  const std::string material = std::to_string(run_seed) + "/" + std::string(name);
  const auto d = digest(material);
  uint64_t seed = 0;
  for (int i = 0; i < 8; ++i) seed = (seed << 8) | d[i];
  return seed;
}

}  // namespace truex
