#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace clauseforge {

/// Seeded 64-bit string hash (FNV-1a core with a splitmix64 finalizer).
/// Stable across platforms and runs; used by the feature-hashing encoder.
std::uint64_t seeded_hash(std::string_view text, std::uint64_t seed);

std::uint64_t splitmix64(std::uint64_t x);

/// Hex SHA-256 digests used for fingerprints and artifact manifests.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Incremental digest for fingerprints assembled from several parts.
class Fingerprint {
 public:
  Fingerprint& add(std::string_view part);
  Fingerprint& add(std::uint64_t value);
  std::string hex() const;

 private:
  std::string buffer_;
};

}  // namespace clauseforge
