#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clauseforge/corpus.hpp"
#include "clauseforge/embedding.hpp"
#include "clauseforge/simindex.hpp"
#include "clauseforge/strategy.hpp"

namespace clauseforge::representation {

struct CachedExample {
  std::string example_id;  // the target clause id
  std::string contract_id;
  std::string clause_type;
  std::string part;  // train | valid | test

  bool operator==(const CachedExample&) const = default;
};

/// Precomputed representations and per-(example, strategy) context vectors.
/// Training reads contexts from here only.
struct RepCache {
  std::string fingerprint;
  std::size_t k = simindex::kDefaultK;
  std::uint64_t split_seed = 0;
  std::uint32_t dim = 0;
  std::vector<strategy::Strategy> strategies;
  std::vector<CachedExample> examples;
  embedding::EmbeddingStore contract_reps;  // index side, train split
  embedding::EmbeddingStore type_reps;      // keyed by clause type
  std::map<strategy::Strategy, embedding::EmbeddingStore> contexts;
  std::map<strategy::Strategy, std::size_t> fallbacks;

  bool has(strategy::Strategy s) const { return contexts.contains(s); }
  std::span<const float> context(strategy::Strategy s, const std::string& example_id) const;
  std::vector<CachedExample> examples_in(const std::string& part) const;
};

struct CacheInputs {
  const corpus::CorpusDir& corpus;
  const embedding::EmbeddingStore& store;
  std::size_t k = simindex::kDefaultK;
  std::vector<strategy::Strategy> strategies;
  /// Index over training contract reps. Built in place when null and a
  /// strategy needs retrieval.
  const simindex::HnswIndex* index = nullptr;
  simindex::IndexParams index_params;
};

/// SHA-256 over ids and raw vector bytes.
std::string store_fingerprint(const embedding::EmbeddingStore& store);

/// Identity of everything a cache depends on: embeddings, corpus, split,
/// retrieval depth and index parameters.
std::string cache_fingerprint(const corpus::CorpusDir& corpus,
                              const embedding::EmbeddingStore& store, std::size_t k,
                              const simindex::IndexParams& index_params);

RepCache cache_build(const CacheInputs& inputs);

void cache_write(const RepCache& cache, const std::filesystem::path& dir);

/// Loads a cache directory; throws StaleCacheError when `expected_fingerprint`
/// is given and differs from the stored one.
RepCache cache_load(const std::filesystem::path& dir,
                    const std::optional<std::string>& expected_fingerprint = std::nullopt);

/// Training-split index built from the corpus and store.
simindex::HnswIndex build_contract_index(const corpus::CorpusDir& corpus,
                                         const embedding::EmbeddingStore& store,
                                         const simindex::IndexParams& params);

}  // namespace clauseforge::representation
