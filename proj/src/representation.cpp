#include "clauseforge/representation.hpp"

#include <algorithm>
#include <set>

#include "clauseforge/errors.hpp"

namespace clauseforge::representation {

namespace {

void accumulate(Vector& acc, std::span<const float> v) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += static_cast<double>(v[i]);
}

void divide(Vector& acc, std::size_t n) {
  const auto denom = static_cast<double>(n);
  for (double& x : acc) x /= denom;
}

}  // namespace

ContractRep contract_rep(const corpus::Contract& contract, const embedding::EmbeddingStore& store,
                         const std::optional<std::string>& exclude) {
  ContractRep rep;
  rep.contract_id = contract.contract_id;
  rep.excluded_clause_id = exclude;
  rep.vector.assign(store.dim(), 0.0);
  for (const auto& cl : contract.clauses) {
    if (exclude && cl.clause_id == *exclude) continue;
    if (!store.contains(cl.clause_id)) {
      throw Error("missing embedding for clause " + cl.clause_id);
    }
    accumulate(rep.vector, store.get(cl.clause_id));
    ++rep.n_clause;
  }
  if (rep.n_clause == 0) throw Error("empty contract rep for " + contract.contract_id);
  divide(rep.vector, rep.n_clause);
  return rep;
}

ClauseTypeRep clause_type_rep(const std::string& clause_type,
                              const std::vector<corpus::Contract>& contracts,
                              const std::vector<std::string>& part,
                              const embedding::EmbeddingStore& store,
                              const std::string& source_split) {
  const std::set<std::string> members(part.begin(), part.end());
  ClauseTypeRep rep;
  rep.clause_type = clause_type;
  rep.source_split = source_split;
  rep.vector.assign(store.dim(), 0.0);
  for (const auto& c : contracts) {
    if (!members.contains(c.contract_id)) continue;
    for (const auto& cl : c.clauses) {
      if (cl.clause_type != clause_type) continue;
      accumulate(rep.vector, store.get(cl.clause_id));
      ++rep.n_members;
    }
  }
  if (rep.n_members == 0) {
    throw Error("clause type \"" + clause_type + "\" has no members in the " + source_split +
                " split");
  }
  divide(rep.vector, rep.n_members);
  return rep;
}

std::map<std::string, ClauseTypeRep> clause_type_reps(const corpus::ClauseTypeCatalog& catalog,
                                                       const std::vector<corpus::Contract>& contracts,
                                                       const std::vector<std::string>& part,
                                                       const embedding::EmbeddingStore& store,
                                                       const std::string& source_split) {
  std::map<std::string, ClauseTypeRep> out;
  for (const auto& s : catalog.selected) {
    out.emplace(s.clause_type, clause_type_rep(s.clause_type, contracts, part, store, source_split));
  }
  return out;
}

ContractRepTable contract_reps(const std::vector<corpus::Contract>& contracts,
                               const std::vector<std::string>& part,
                               const embedding::EmbeddingStore& store) {
  const std::set<std::string> members(part.begin(), part.end());
  ContractRepTable out;
  for (const auto& c : contracts) {
    if (members.contains(c.contract_id)) out.emplace(c.contract_id, contract_rep(c, store));
  }
  return out;
}

SimContrRep full_sim_rep(const std::vector<std::string>& neighbor_ids,
                         const ContractRepTable& reps) {
  if (neighbor_ids.empty()) throw Error("full_sim_rep: empty neighbor list");
  auto ids = neighbor_ids;
  std::sort(ids.begin(), ids.end());

  SimContrRep out;
  out.kind = SimKind::Full;
  for (const auto& id : ids) {
    auto it = reps.find(id);
    if (it == reps.end()) throw Error("full_sim_rep: no contract rep for " + id);
    const auto& v = it->second.vector;
    if (out.vector.empty()) out.vector.assign(v.size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) out.vector[i] += v[i];
  }
  out.k_used = ids.size();
  divide(out.vector, out.k_used);
  return out;
}

std::optional<SimContrRep> clause_sim_rep(const std::vector<std::string>& neighbor_ids,
                                          const std::string& clause_type,
                                          const corpus::CorpusView& corpus,
                                          const embedding::EmbeddingStore& store) {
  if (neighbor_ids.empty()) throw Error("clause_sim_rep: empty neighbor list");
  auto ids = neighbor_ids;
  std::sort(ids.begin(), ids.end());

  SimContrRep out;
  out.kind = SimKind::Clause;
  out.clause_type = clause_type;
  out.vector.assign(store.dim(), 0.0);
  for (const auto& id : ids) {
    Vector per_contract(store.dim(), 0.0);
    std::size_t members = 0;
    for (const auto& cl : corpus.contract(id).clauses) {
      if (cl.clause_type != clause_type) continue;
      accumulate(per_contract, store.get(cl.clause_id));
      ++members;
    }
    if (members == 0) continue;
    divide(per_contract, members);
    for (std::size_t i = 0; i < per_contract.size(); ++i) out.vector[i] += per_contract[i];
    ++out.k_used;
  }
  if (out.k_used == 0) return std::nullopt;
  divide(out.vector, out.k_used);
  return out;
}

}  // namespace clauseforge::representation
