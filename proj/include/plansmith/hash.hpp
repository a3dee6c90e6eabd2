#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace plansmith {

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// Incremental builder over length-prefixed fields, so that field boundaries
/// cannot alias ("ab","c" vs "a","bc").
class ContentHasher {
 public:
  ContentHasher& field(std::string_view value);
  ContentHasher& field(std::int64_t value);
  std::string hex() const { return sha256_hex(buffer_); }

 private:
  std::string buffer_;
};

/// SplitMix64 step; used to derive independent per-episode and per-attempt seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace plansmith
