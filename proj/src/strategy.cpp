#include "clauseforge/strategy.hpp"

#include <algorithm>
#include <cmath>

#include "clauseforge/errors.hpp"

namespace clauseforge::strategy {

namespace {

struct Info {
  Strategy strategy;
  std::string_view name;
  bool type;
  bool sim;
};

constexpr std::array<Info, 5> kInfo{{
    {Strategy::OnlyContr, "ONLY_CONTR", false, false},
    {Strategy::ContrType, "CONTR_TYPE", true, false},
    {Strategy::ContrFullSim, "CONTR_FULLSIM", false, true},
    {Strategy::ContrTypeFullSim, "CONTR_TYPE_FULLSIM", true, true},
    {Strategy::ContrTypeClauseSim, "CONTR_TYPE_CLAUSESIM", true, true},
}};

const Info& info(Strategy s) { return kInfo[static_cast<std::size_t>(s)]; }

std::span<const double> need(Strategy s, std::optional<std::span<const double>> v,
                             const char* component, std::size_t d) {
  if (!v) {
    throw ConfigError(std::string(name(s)) + " requires the " + component + " representation");
  }
  if (v->size() != d) {
    throw ConfigError(std::string(name(s)) + ": " + component + " has dim " +
                      std::to_string(v->size()) + ", expected " + std::to_string(d));
  }
  return *v;
}

Vector midpoint(std::span<const double> a, std::span<const double> b) {
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] + b[i]) / 2.0;
  return out;
}

Vector concat(Vector head, std::span<const double> tail) {
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

}  // namespace

std::string_view name(Strategy s) { return info(s).name; }

Strategy parse_strategy(std::string_view text) {
  for (const auto& i : kInfo) {
    if (i.name == text) return i.strategy;
  }
  throw ConfigError("unknown strategy \"" + std::string(text) + "\"");
}

std::vector<Strategy> parse_strategy_list(std::string_view text) {
  if (text == "all") return {kAllStrategies.begin(), kAllStrategies.end()};
  std::vector<Strategy> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find(',', start), text.size());
    const auto s = parse_strategy(text.substr(start, end - start));
    if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
    start = end + 1;
  }
  return out;
}

bool requires_type(Strategy s) { return info(s).type; }
bool requires_sim(Strategy s) { return info(s).sim; }
bool uses_clause_sim(Strategy s) { return s == Strategy::ContrTypeClauseSim; }

std::size_t out_dim(Strategy s, std::size_t d) { return requires_sim(s) ? 2 * d : d; }

Vector assemble(Strategy s, std::span<const double> contract,
                std::optional<std::span<const double>> clause_type,
                std::optional<std::span<const double>> full_sim,
                std::optional<std::span<const double>> clause_sim) {
  const std::size_t d = contract.size();
  Vector out;
  switch (s) {
    case Strategy::OnlyContr:
      out.assign(contract.begin(), contract.end());
      break;
    case Strategy::ContrType:
      out = midpoint(contract, need(s, clause_type, "clause_type", d));
      break;
    case Strategy::ContrFullSim:
      out = concat(Vector(contract.begin(), contract.end()), need(s, full_sim, "full_sim_contr", d));
      break;
    case Strategy::ContrTypeFullSim:
      out = concat(midpoint(contract, need(s, clause_type, "clause_type", d)),
                   need(s, full_sim, "full_sim_contr", d));
      break;
    case Strategy::ContrTypeClauseSim:
      out = concat(midpoint(contract, need(s, clause_type, "clause_type", d)),
                   need(s, clause_sim, "clause_sim_contr", d));
      break;
  }
  for (double v : out) {
    if (!std::isfinite(v)) throw Error(std::string(name(s)) + ": non-finite context component");
  }
  return out;
}

SearchFn search_with(const simindex::HnswIndex& index) {
  return [&index](std::span<const double> query, std::size_t k, std::string_view exclude) {
    return index.search(query, k, exclude);
  };
}

ContextVector resolve_inputs(const corpus::Example& example, Strategy s, const Resources& res,
                             std::size_t k) {
  const auto& contract = res.corpus.contract(example.contract_id);
  const auto& target = res.corpus.clause(example.target_clause_id);
  if (target.contract_id != contract.contract_id) {
    throw Error("example target " + target.clause_id + " is not in " + contract.contract_id);
  }

  ContextVector out;
  out.strategy = s;
  out.example_id = example.target_clause_id;

  const auto rep = representation::contract_rep(contract, res.store, target.clause_id);

  std::optional<std::span<const double>> type_vec;
  if (requires_type(s)) {
    auto it = res.type_reps.find(target.clause_type);
    if (it == res.type_reps.end()) {
      throw Error("no clause-type representation for \"" + target.clause_type + "\"");
    }
    type_vec = it->second.vector;
  }

  std::optional<representation::SimContrRep> sim;
  std::optional<std::span<const double>> full_vec;
  std::optional<std::span<const double>> clause_vec;
  if (requires_sim(s)) {
    if (!res.search) throw ConfigError(std::string(name(s)) + " needs a similarity index");
    const auto hits = res.search(rep.vector, k, example.contract_id);
    if (hits.empty()) throw Error("similarity search returned no neighbors");
    std::vector<std::string> ids;
    ids.reserve(hits.size());
    for (const auto& h : hits) ids.push_back(h.contract_id);

    if (uses_clause_sim(s)) {
      sim = representation::clause_sim_rep(ids, target.clause_type, res.corpus, res.store);
      if (sim) {
        clause_vec = sim->vector;
      } else {
        // No neighbor has a clause of the target type.
        clause_vec = type_vec;
        out.fallback = true;
      }
    } else {
      sim = representation::full_sim_rep(ids, res.index_reps);
      full_vec = sim->vector;
    }
  }

  out.vector = assemble(s, rep.vector, type_vec, full_vec, clause_vec);
  return out;
}

}  // namespace clauseforge::strategy
