#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

namespace clauseforge::corpus {

struct Clause {
  std::string clause_id;
  std::string contract_id;
  std::string clause_type;  // lowercase
  std::string text;
  std::size_t token_len = 0;  // whitespace-separated tokens

  bool operator==(const Clause&) const = default;
};

struct Contract {
  std::string contract_id;
  std::vector<Clause> clauses;  // ingestion order

  bool operator==(const Contract&) const = default;
};

enum class Format { ContractJsonl, ProvisionJsonl };

Format parse_format(const std::string& name);

std::size_t whitespace_token_count(std::string_view text);
std::string lowercase(std::string_view text);

// Parsing. Blank lines are skipped; line numbers in errors are 1-based.
std::vector<Contract> read_contract_jsonl(std::istream& in);
std::vector<Contract> read_provision_jsonl(std::istream& in);
std::vector<Contract> ingest(const std::filesystem::path& path, Format format);

void write_contract_jsonl(std::ostream& out, const std::vector<Contract>& contracts);
void write_contract_jsonl(const std::filesystem::path& path,
                          const std::vector<Contract>& contracts);

struct TypeStats {
  std::string clause_type;
  std::size_t count = 0;
  double mean_len = 0.0;
  double std_len = 0.0;  // population standard deviation

  bool operator==(const TypeStats&) const = default;
};

struct ClauseTypeCatalog {
  std::vector<TypeStats> selected;  // descending count, ties lexicographic

  bool contains(const std::string& clause_type) const;
  std::vector<std::string> types() const;
  bool operator==(const ClauseTypeCatalog&) const = default;
};

struct FilterResult {
  std::vector<Contract> contracts;
  ClauseTypeCatalog catalog;
};

/// Drops contracts with fewer than `min_clauses` clauses and selects the
/// `top_k_types` most frequent clause types over what remains. Retained
/// contracts keep all their clauses, selected type or not.
FilterResult filter_corpus(std::vector<Contract> contracts, std::size_t min_clauses,
                           std::size_t top_k_types);

struct CorpusSplit {
  std::vector<std::string> train;
  std::vector<std::string> valid;
  std::vector<std::string> test;
  std::uint64_t seed = 0;
  std::array<double, 3> ratios{0.8, 0.1, 0.1};

  bool operator==(const CorpusSplit&) const = default;
};

/// Contract-level random partition; deterministic in `seed`.
CorpusSplit split(const std::vector<Contract>& contracts, std::array<double, 3> ratios,
                  std::uint64_t seed);

struct Example {
  std::string contract_id;
  std::string target_clause_id;

  bool operator==(const Example&) const = default;
};

/// One example per clause of a selected type, in corpus order.
std::vector<Example> make_examples(const std::vector<Contract>& contracts,
                                   const std::vector<std::string>& part,
                                   const ClauseTypeCatalog& catalog);

/// Read-only lookup over a contract list. The list must outlive the view.
class CorpusView {
 public:
  explicit CorpusView(const std::vector<Contract>& contracts);

  const Contract& contract(const std::string& contract_id) const;
  const Clause& clause(const std::string& clause_id) const;
  bool has_contract(const std::string& contract_id) const;
  const std::vector<Contract>& contracts() const { return *contracts_; }

 private:
  const std::vector<Contract>* contracts_;
  std::unordered_map<std::string, std::size_t> by_contract_;
  std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> by_clause_;
};

// On-disk corpus directory: corpus.jsonl, catalog.json, split.json.
struct CorpusDir {
  std::vector<Contract> contracts;
  ClauseTypeCatalog catalog;
  CorpusSplit split;
};

void write_catalog(const std::filesystem::path& path, const ClauseTypeCatalog& catalog);
ClauseTypeCatalog read_catalog(const std::filesystem::path& path);
void write_split(const std::filesystem::path& path, const CorpusSplit& split);
CorpusSplit read_split(const std::filesystem::path& path);
CorpusDir read_corpus_dir(const std::filesystem::path& dir);

/// SHA-256 over the canonical serialization of the contracts.
std::string corpus_fingerprint(const std::vector<Contract>& contracts);

}  // namespace clauseforge::corpus
