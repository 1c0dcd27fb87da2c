#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clauseforge/corpus.hpp"

// Templated contract generator for tests, demos and desk-scale experiments.
namespace clauseforge::synthetic {

struct Options {
  std::size_t contracts = 300;
  std::uint64_t seed = 7;
  // Types whose clauses make up the generation targets. Each contract draws
  // a random subset, so the remaining clauses do not reveal which is missing.
  std::vector<std::string> target_types{"governing laws", "notices", "terminations"};
  double target_probability = 0.75;
  double filler_probability = 0.45;
  std::size_t min_clauses = 5;
};

/// Filler clause types, always less frequent than the target types.
const std::vector<std::string>& filler_types();

/// Known clause types: the built-in target types plus the fillers.
std::vector<std::string> known_types();

/// One clause text of the given type; `slot_seed` picks the template
/// variant and its slot values.
std::string clause_text(const std::string& clause_type, std::uint64_t slot_seed);

std::vector<corpus::Contract> generate(const Options& options);

}  // namespace clauseforge::synthetic
