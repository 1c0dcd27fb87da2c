#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "clauseforge/corpus.hpp"
#include "clauseforge/decoder.hpp"
#include "clauseforge/embedding.hpp"
#include "clauseforge/metrics.hpp"
#include "clauseforge/rep_cache.hpp"
#include "clauseforge/simindex.hpp"
#include "clauseforge/strategy.hpp"
#include "clauseforge/tokenizer.hpp"

// Stage functions and the fingerprinted end-to-end runner.
namespace clauseforge::pipeline {

namespace fs = std::filesystem;

struct RunConfig {
  fs::path workspace;
  fs::path corpus_input;
  corpus::Format format = corpus::Format::ContractJsonl;
  std::size_t min_clauses = 5;
  std::size_t top_types = 15;
  std::array<double, 3> ratios{0.8, 0.1, 0.1};
  std::uint64_t split_seed = 7;
  embedding::EncoderSpec encoder;
  simindex::IndexParams index;
  std::size_t k = simindex::kDefaultK;
  strategy::Strategy strategy = strategy::Strategy::ContrTypeFullSim;
  std::size_t vocab_size = tokenizer::kDefaultVocabSize;
  decoder::DecoderConfig model;
  // Unset means "derive from strategy and encoder dim".
  std::optional<int> context_dim;
  decoder::TrainConfig train;
  decoder::DecodeOptions decode;
  std::string eval_part = "test";

  /// Checks cross-field consistency and fills model.context_dim / vocab_size.
  /// Throws ConfigError before any compute happens.
  void validate();
};

/// Relative paths inside `base_dir` are resolved against it.
RunConfig run_config_from_json(const std::string& text, const fs::path& base_dir = {});
RunConfig load_run_config(const fs::path& path);
std::string run_config_to_json(const RunConfig& config);

/// Workspace from an explicit flag, else CLAUSEFORGE_DIR, else "./clauseforge-work".
fs::path default_workspace(const std::optional<fs::path>& flag);

// Corpus directory: corpus.jsonl, catalog.json, split.json.
corpus::CorpusDir prepare_corpus(std::vector<corpus::Contract> contracts, std::size_t min_clauses,
                                 std::size_t top_types, std::array<double, 3> ratios,
                                 std::uint64_t seed);
void write_corpus_dir(const fs::path& dir, const corpus::CorpusDir& corpus);

/// Training texts for the vocabulary: train-split clauses of selected types.
std::vector<std::string> vocab_texts(const corpus::CorpusDir& corpus);

/// Teacher-forcing sequences for one split part, contexts read from the cache.
std::vector<decoder::Sequence> make_sequences(const corpus::CorpusDir& corpus,
                                              const representation::RepCache& cache,
                                              strategy::Strategy s, const std::string& part,
                                              const tokenizer::Vocab& vocab);

/// Greedy or beam generation for every cached example of `part` (or only
/// `example_id`). Targets are normalized the way the tokenizer sees them.
std::vector<metrics::ScoredOutput> generate_outputs(
    decoder::DecoderModel& model, const tokenizer::Vocab& vocab, const corpus::CorpusDir& corpus,
    const representation::RepCache& cache, strategy::Strategy s, const std::string& part,
    const decoder::DecodeOptions& options, const std::optional<std::string>& example_id = {});

void write_outputs(const fs::path& path, const std::vector<metrics::ScoredOutput>& outputs);
std::vector<metrics::ScoredOutput> read_outputs(const fs::path& path);

/// Writes report.json, report.txt, length_stats.json and lengths.csv.
metrics::MetricReport write_evaluation(const fs::path& dir,
                                       const std::vector<metrics::ScoredOutput>& outputs,
                                       const std::string& title);

/// Rows: id, kind (actual|generated), then `dim` components.
std::string dump_embeddings(const std::vector<metrics::ScoredOutput>& outputs,
                            const embedding::EncoderSpec& spec);

struct TrainOutcome {
  decoder::DecoderModel model;
  decoder::TrainResult result;
};

/// Trains a decoder on the cached contexts of one strategy. The decoder's
/// vocab_size and context_dim follow the vocabulary and cache; parameters
/// are rounded to float precision so a saved checkpoint reloads exactly.
TrainOutcome train_strategy(const corpus::CorpusDir& corpus, const representation::RepCache& cache,
                            strategy::Strategy s, const tokenizer::Vocab& vocab,
                            decoder::DecoderConfig model_config,
                            const decoder::TrainConfig& train_config, std::ostream* log = nullptr);

// Checkpoint directory layout used by train/generate: decoder files + vocab/.
void save_trained(const fs::path& dir, const decoder::DecoderModel& model,
                  const tokenizer::Vocab& vocab, strategy::Strategy s,
                  const decoder::TrainConfig& train, const decoder::TrainResult& result);
strategy::Strategy checkpoint_strategy(const fs::path& dir);

struct StageStatus {
  std::string name;
  bool ran = false;
  std::string reason;
};

struct RunResult {
  std::vector<StageStatus> stages;
  metrics::MetricReport report;
};

inline constexpr std::array<const char*, 8> kStages{"ingest", "embed", "index",    "reps",
                                                    "vocab",  "train", "generate", "evaluate"};

/// Runs stages in dependency order. A stage is skipped when its recorded
/// fingerprint matches, its outputs are intact, and nothing upstream ran.
RunResult run_pipeline(RunConfig config, std::ostream& log);

struct AblationRow {
  std::size_t k = 0;
  metrics::MetricRow overall;
  std::size_t fallbacks = 0;
};

/// Reruns reps/train/generate/evaluate per k under `workspace/ablate-k/k<k>`.
std::vector<AblationRow> ablate_k(RunConfig config, std::vector<std::size_t> ks, std::ostream& log);
std::string render_ablation(const std::vector<AblationRow>& rows, strategy::Strategy s);

}  // namespace clauseforge::pipeline
