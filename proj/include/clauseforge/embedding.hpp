#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "clauseforge/corpus.hpp"

namespace clauseforge::embedding {

using Embedding = std::vector<float>;

enum class EncoderKind { HashDeterministic, ExternalFile };

struct EncoderSpec {
  EncoderKind kind = EncoderKind::HashDeterministic;
  std::uint32_t dim = 768;
  std::uint64_t seed = 0;
  std::filesystem::path file;  // ExternalFile only

  std::string describe() const;
};

EncoderKind parse_encoder_kind(const std::string& name);

/// Lowercased alphanumeric runs; bytes >= 0x80 count as alphanumeric so
/// UTF-8 words stay intact.
std::vector<std::string> encoder_tokens(std::string_view text);

/// Feature-hashing encoder: unigrams and bigrams hashed into `dim` signed
/// buckets, then L2-normalized. Throws on text with no tokens.
Embedding encode(const EncoderSpec& spec, std::string_view text);

/// Ordered id -> vector map with a fixed dimension. Vectors are stored
/// contiguously in insertion order.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(std::uint32_t dim, std::string provenance = {});

  void add(std::string id, std::span<const float> vector);

  std::uint32_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  bool contains(const std::string& id) const { return index_.contains(id); }
  std::span<const float> get(const std::string& id) const;
  std::span<const float> at(std::size_t i) const;
  const std::vector<std::string>& ids() const { return ids_; }
  const std::string& provenance() const { return provenance_; }
  void set_provenance(std::string p) { provenance_ = std::move(p); }

  /// Bitwise equality of dim, ids (with order) and vectors. Provenance is
  /// metadata and not compared.
  bool operator==(const EmbeddingStore& other) const;

 private:
  std::uint32_t dim_ = 0;
  std::string provenance_;
  std::vector<std::string> ids_;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline constexpr char kCrebMagic[4] = {'C', 'R', 'E', 'B'};
inline constexpr std::uint32_t kCrebVersion = 1;

/// Writes the CREB container. Provenance, when set, goes to `<path>.json`.
void store_write(const EmbeddingStore& store, const std::filesystem::path& path);

/// Reads and validates a CREB file. `expected_dim` of 0 accepts any dim.
/// Non-fatal oddities (all-zero vectors) are appended to `warnings`.
EmbeddingStore store_read(const std::filesystem::path& path, std::uint32_t expected_dim = 0,
                          std::vector<std::string>* warnings = nullptr);

/// Expected file size: 16 + sum(4 + len(id) + 4*dim).
std::uint64_t creb_file_size(const EmbeddingStore& store);

/// One entry per clause, in corpus order (hash encoder).
EmbeddingStore embed_corpus(const EncoderSpec& spec,
                            const std::vector<corpus::Contract>& contracts);

/// Loads an externally computed store and checks it covers every clause.
EmbeddingStore load_external(const EncoderSpec& spec,
                             const std::vector<corpus::Contract>& contracts);

double cosine(std::span<const float> a, std::span<const float> b);

}  // namespace clauseforge::embedding
