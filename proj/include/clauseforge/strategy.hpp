#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clauseforge/corpus.hpp"
#include "clauseforge/embedding.hpp"
#include "clauseforge/representation.hpp"
#include "clauseforge/simindex.hpp"

namespace clauseforge::strategy {

using representation::Vector;

enum class Strategy {
  OnlyContr,
  ContrType,
  ContrFullSim,
  ContrTypeFullSim,
  ContrTypeClauseSim,
};

inline constexpr std::array<Strategy, 5> kAllStrategies{
    Strategy::OnlyContr, Strategy::ContrType, Strategy::ContrFullSim,
    Strategy::ContrTypeFullSim, Strategy::ContrTypeClauseSim};

std::string_view name(Strategy s);
/// Accepts exactly the uppercase identifiers, e.g. "CONTR_TYPE_FULLSIM".
Strategy parse_strategy(std::string_view text);
/// "all" or a comma-separated list of identifiers.
std::vector<Strategy> parse_strategy_list(std::string_view text);

bool requires_type(Strategy s);
bool requires_sim(Strategy s);
bool uses_clause_sim(Strategy s);
std::size_t out_dim(Strategy s, std::size_t d);

struct ContextVector {
  Strategy strategy = Strategy::OnlyContr;
  Vector vector;
  std::string example_id;
  bool fallback = false;  // clause-sim had no contributor; type rep substituted
};

/// Combines the representations according to the strategy. Components not
/// required by the strategy are ignored.
Vector assemble(Strategy s, std::span<const double> contract,
                std::optional<std::span<const double>> clause_type = std::nullopt,
                std::optional<std::span<const double>> full_sim = std::nullopt,
                std::optional<std::span<const double>> clause_sim = std::nullopt);

using SearchFn = std::function<std::vector<simindex::Neighbor>(
    std::span<const double> query, std::size_t k, std::string_view exclude)>;

/// Everything resolve_inputs reads. All references must outlive the call.
struct Resources {
  const corpus::CorpusView& corpus;
  const embedding::EmbeddingStore& store;
  const std::map<std::string, representation::ClauseTypeRep>& type_reps;
  const representation::ContractRepTable& index_reps;
  SearchFn search;  // may be empty for strategies that never retrieve
};

SearchFn search_with(const simindex::HnswIndex& index);

ContextVector resolve_inputs(const corpus::Example& example, Strategy s, const Resources& res,
                             std::size_t k);

}  // namespace clauseforge::strategy
