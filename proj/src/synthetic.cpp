#include "clauseforge/synthetic.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <random>

#include "clauseforge/errors.hpp"
#include "clauseforge/hashing.hpp"

namespace clauseforge::synthetic {

namespace {

const std::vector<std::string> kStates{"delaware", "new york", "california", "texas",
                                       "illinois", "nevada",   "ohio",       "florida"};
const std::vector<std::string> kParties{"the company", "the purchaser", "the lender",
                                        "the licensee", "the executive", "the seller"};
const std::vector<std::string> kDays{"ten", "fifteen", "thirty", "sixty", "ninety"};
const std::vector<std::string> kMonths{"three", "six", "twelve", "eighteen"};
const std::vector<std::string> kCities{"wilmington", "houston", "chicago", "boston", "denver"};

// {S} state, {P} party, {D} days, {M} months, {C} city.
const std::map<std::string, std::vector<std::string>>& templates() {
  static const std::map<std::string, std::vector<std::string>> t{
      {"governing laws",
       {"this agreement shall be governed by and construed in accordance with the laws of the "
        "state of {S} without regard to its conflict of laws principles",
        "this agreement and all claims arising out of it shall be governed by the laws of the "
        "state of {S} applicable to contracts made and performed in {S}"}},
      {"notices",
       {"all notices under this agreement shall be in writing and delivered by hand or by "
        "certified mail to {P} at its offices in {C} and shall be effective upon receipt",
        "any notice required hereunder shall be given in writing to {P} at its address in {C} "
        "and shall be deemed given {D} days after mailing"}},
      {"terminations",
       {"either party may terminate this agreement upon {D} days prior written notice to the "
        "other party if the other party materially breaches this agreement",
        "{P} may terminate this agreement at any time after {M} months by giving {D} days "
        "written notice of termination"}},
      {"definitions",
       {"capitalized terms used but not defined herein have the meanings given to them in the "
        "purchase agreement with {P}"}},
      {"counterparts",
       {"this agreement may be executed in any number of counterparts each of which shall be an "
        "original and all of which together constitute one instrument"}},
      {"entire agreements",
       {"this agreement constitutes the entire agreement between the parties and supersedes all "
        "prior understandings with {P}"}},
      {"severability",
       {"if any provision of this agreement is held invalid the remaining provisions shall "
        "continue in full force and effect"}},
      {"amendments",
       {"this agreement may be amended only by a written instrument signed by {P} and the other "
        "party"}},
      {"waivers",
       {"no failure by {P} to exercise any right under this agreement shall operate as a waiver "
        "of that right"}},
  };
  return t;
}

const std::string& pick(const std::vector<std::string>& options, std::uint64_t seed,
                        std::uint64_t salt) {
  return options[splitmix64(seed ^ splitmix64(salt)) % options.size()];
}

void replace_all(std::string& text, const std::string& slot, const std::string& value) {
  for (auto pos = text.find(slot); pos != std::string::npos; pos = text.find(slot, pos)) {
    text.replace(pos, slot.size(), value);
    pos += value.size();
  }
}

}  // namespace

const std::vector<std::string>& filler_types() {
  static const std::vector<std::string> f{"definitions", "counterparts", "entire agreements",
                                          "severability", "amendments",  "waivers"};
  return f;
}

std::vector<std::string> known_types() {
  std::vector<std::string> out;
  for (const auto& [type, _] : templates()) out.push_back(type);
  return out;
}

std::string clause_text(const std::string& clause_type, std::uint64_t slot_seed) {
  const auto it = templates().find(clause_type);
  if (it == templates().end()) throw ConfigError("no template for clause type \"" + clause_type + "\"");
  const auto type_salt = seeded_hash(clause_type, 0);
  std::string text = pick(it->second, slot_seed, type_salt);
  replace_all(text, "{S}", pick(kStates, slot_seed, 1));
  replace_all(text, "{P}", pick(kParties, slot_seed, 2));
  replace_all(text, "{D}", pick(kDays, slot_seed, 3 ^ type_salt));
  replace_all(text, "{M}", pick(kMonths, slot_seed, 4));
  replace_all(text, "{C}", pick(kCities, slot_seed, 5));
  text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
  return text + ".";
}

std::vector<corpus::Contract> generate(const Options& options) {
  if (options.target_probability < options.filler_probability) {
    throw ConfigError("synthetic corpus: target types must be at least as frequent as fillers");
  }
  std::mt19937_64 rng(options.seed);
  std::bernoulli_distribution take_target(options.target_probability);
  std::bernoulli_distribution take_filler(options.filler_probability);
  const auto& fillers = filler_types();

  std::vector<corpus::Contract> out;
  out.reserve(options.contracts);
  for (std::size_t c = 0; c < options.contracts; ++c) {
    corpus::Contract contract;
    contract.contract_id = "syn" + std::to_string(100000 + c).substr(1);
    const std::uint64_t slot_seed = rng();

    std::vector<std::string> types;
    for (const auto& t : options.target_types) {
      if (take_target(rng)) types.push_back(t);
    }
    if (types.empty()) {
      types.push_back(options.target_types[rng() % options.target_types.size()]);
    }
    std::vector<std::string> chosen_fillers;
    for (const auto& f : fillers) {
      if (take_filler(rng)) chosen_fillers.push_back(f);
    }
    std::vector<std::string> unused;
    for (const auto& f : fillers) {
      if (std::find(chosen_fillers.begin(), chosen_fillers.end(), f) == chosen_fillers.end()) {
        unused.push_back(f);
      }
    }
    while (types.size() + chosen_fillers.size() < options.min_clauses && !unused.empty()) {
      const auto pick_at = rng() % unused.size();
      chosen_fillers.push_back(unused[pick_at]);
      unused.erase(unused.begin() + static_cast<std::ptrdiff_t>(pick_at));
    }
    types.insert(types.begin(), chosen_fillers.begin(), chosen_fillers.end());
    std::shuffle(types.begin(), types.end(), rng);

    for (std::size_t i = 0; i < types.size(); ++i) {
      corpus::Clause clause;
      clause.clause_id = contract.contract_id + "-" + std::to_string(i);
      clause.contract_id = contract.contract_id;
      clause.clause_type = types[i];
      clause.text = clause_text(types[i], slot_seed);
      clause.token_len = corpus::whitespace_token_count(clause.text);
      contract.clauses.push_back(std::move(clause));
    }
    out.push_back(std::move(contract));
  }
  return out;
}

}  // namespace clauseforge::synthetic
