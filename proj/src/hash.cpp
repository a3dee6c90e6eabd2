#include "plansmith/hash.hpp"

#include <openssl/evp.h>

#include <array>
#include <memory>

#include "plansmith/error.hpp"

namespace plansmith {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::protocol: return "protocol";
    case ErrorKind::generation: return "generation";
    case ErrorKind::planner: return "planner";
    case ErrorKind::validation: return "validation";
    case ErrorKind::parse: return "parse";
    case ErrorKind::gating: return "gating";
    case ErrorKind::backend: return "backend";
    case ErrorKind::evaluation: return "evaluation";
    case ErrorKind::scheduling: return "scheduling";
    case ErrorKind::assembly: return "assembly";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

std::string sha256_hex(std::string_view data) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1) {
    throw Error(ErrorKind::io, "sha256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

ContentHasher& ContentHasher::field(std::string_view value) {
  buffer_ += std::to_string(value.size());
  buffer_ += ':';
  buffer_ += value;
  buffer_ += ';';
  return *this;
}

ContentHasher& ContentHasher::field(std::int64_t value) { return field(std::to_string(value)); }

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace plansmith
