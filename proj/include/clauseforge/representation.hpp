#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clauseforge/corpus.hpp"
#include "clauseforge/embedding.hpp"

namespace clauseforge::representation {

using Vector = std::vector<double>;

/// Mean of a contract's clause embeddings, optionally holding one clause out.
struct ContractRep {
  std::string contract_id;
  Vector vector;
  std::size_t n_clause = 0;
  std::optional<std::string> excluded_clause_id;
};

/// Mean over the library of all clauses of one type in a split.
struct ClauseTypeRep {
  std::string clause_type;
  Vector vector;
  std::size_t n_members = 0;
  std::string source_split;
};

enum class SimKind { Full, Clause };

struct SimContrRep {
  SimKind kind = SimKind::Full;
  Vector vector;
  std::size_t k_used = 0;
  std::string clause_type;  // kind == Clause only
};

/// Index-side contract representations (no exclusion), keyed by contract id.
using ContractRepTable = std::map<std::string, ContractRep>;

/// Accumulates in double, in document order, and divides once.
ContractRep contract_rep(const corpus::Contract& contract, const embedding::EmbeddingStore& store,
                         const std::optional<std::string>& exclude = std::nullopt);

/// Mean over every clause of `clause_type` found in the contracts of `part`.
ClauseTypeRep clause_type_rep(const std::string& clause_type,
                              const std::vector<corpus::Contract>& contracts,
                              const std::vector<std::string>& part,
                              const embedding::EmbeddingStore& store,
                              const std::string& source_split = "train");

/// Type libraries for every catalog type, in catalog order.
std::map<std::string, ClauseTypeRep> clause_type_reps(const corpus::ClauseTypeCatalog& catalog,
                                                       const std::vector<corpus::Contract>& contracts,
                                                       const std::vector<std::string>& part,
                                                       const embedding::EmbeddingStore& store,
                                                       const std::string& source_split = "train");

ContractRepTable contract_reps(const std::vector<corpus::Contract>& contracts,
                               const std::vector<std::string>& part,
                               const embedding::EmbeddingStore& store);

/// Mean of the neighbors' whole-contract representations, summed in
/// ascending contract id order so neighbor order does not matter.
SimContrRep full_sim_rep(const std::vector<std::string>& neighbor_ids,
                         const ContractRepTable& reps);

/// Per-neighbor mean of type-t clause embeddings, averaged over the
/// neighbors that have at least one such clause. Empty when none do.
std::optional<SimContrRep> clause_sim_rep(const std::vector<std::string>& neighbor_ids,
                                          const std::string& clause_type,
                                          const corpus::CorpusView& corpus,
                                          const embedding::EmbeddingStore& store);

}  // namespace clauseforge::representation
