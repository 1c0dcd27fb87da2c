#include <doctest.h>

#include <set>

#include "clauseforge/errors.hpp"
#include "clauseforge/pipeline.hpp"
#include "clauseforge/rep_cache.hpp"
#include "clauseforge/synthetic.hpp"
#include "test_util.hpp"

using namespace clauseforge;
using representation::RepCache;
using strategy::Strategy;

namespace {

struct Setup {
  corpus::CorpusDir corpus;
  embedding::EmbeddingStore store;
};

Setup make_setup(std::size_t contracts = 60) {
  synthetic::Options opt;
  opt.contracts = contracts;
  Setup s;
  s.corpus = pipeline::prepare_corpus(synthetic::generate(opt), 5, 3, {0.8, 0.1, 0.1}, 7);
  embedding::EncoderSpec spec;
  spec.dim = 32;
  s.store = embedding::embed_corpus(spec, s.corpus.contracts);
  return s;
}

using Vec = std::vector<double>;

Vec mean_of(const std::vector<Vec>& vs) {
  Vec m(vs.front().size(), 0.0);
  for (const auto& v : vs)
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += v[i];
  for (auto& x : m) x /= static_cast<double>(vs.size());
  return m;
}

Vec as_vec(std::span<const float> f) { return Vec(f.begin(), f.end()); }

// Straight-line recomputation of every context from the raw embeddings.
Vec oracle_context(const Setup& s, Strategy strat, const std::string& contract_id,
                   const std::string& target) {
  std::map<std::string, const corpus::Contract*> by_id;
  for (const auto& c : s.corpus.contracts) by_id[c.contract_id] = &c;
  const auto& contract = *by_id.at(contract_id);
  std::string type;
  std::vector<Vec> rest;
  for (const auto& cl : contract.clauses) {
    if (cl.clause_id == target) {
      type = cl.clause_type;
    } else {
      rest.push_back(as_vec(s.store.get(cl.clause_id)));
    }
  }
  const Vec c = mean_of(rest);
  std::vector<Vec> of_type;
  std::vector<std::string> train_ids;
  std::vector<Vec> train_reps;
  for (const auto& id : s.corpus.split.train) {
    std::vector<Vec> all;
    for (const auto& cl : by_id.at(id)->clauses) {
      all.push_back(as_vec(s.store.get(cl.clause_id)));
      if (cl.clause_type == type) of_type.push_back(all.back());
    }
    train_ids.push_back(id);
    train_reps.push_back(mean_of(all));
  }
  const Vec t = mean_of(of_type);
  Vec ct(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) ct[i] = (c[i] + t[i]) / 2.0;

  auto concat = [](Vec a, const Vec& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };
  if (strat == Strategy::OnlyContr) return c;
  if (strat == Strategy::ContrType) return ct;
  const auto hits = simindex::brute_force_search(train_ids, train_reps, c, 6, contract_id);
  std::vector<Vec> neigh, neigh_type;
  for (const auto& h : hits) {
    const auto it = std::find(train_ids.begin(), train_ids.end(), h.contract_id);
    neigh.push_back(train_reps[it - train_ids.begin()]);
    std::vector<Vec> own;
    for (const auto& cl : by_id.at(h.contract_id)->clauses) {
      if (cl.clause_type == type) own.push_back(as_vec(s.store.get(cl.clause_id)));
    }
    if (!own.empty()) neigh_type.push_back(mean_of(own));
  }
  const Vec fs = mean_of(neigh);
  if (strat == Strategy::ContrFullSim) return concat(c, fs);
  if (strat == Strategy::ContrTypeFullSim) return concat(ct, fs);
  return concat(ct, neigh_type.empty() ? t : mean_of(neigh_type));
}

}  // namespace

TEST_CASE("cached contexts match a direct recomputation") {
  const auto s = make_setup();
  const std::vector<Strategy> all(strategy::kAllStrategies.begin(), strategy::kAllStrategies.end());
  const auto cache = representation::cache_build({s.corpus, s.store, 6, all});
  REQUIRE_FALSE(cache.examples.empty());
  std::set<std::string> parts;
  for (const auto& ex : cache.examples) {
    parts.insert(ex.part);
    for (auto strat : all) {
      const auto got = cache.context(strat, ex.example_id);
      const auto want = oracle_context(s, strat, ex.contract_id, ex.example_id);
      REQUIRE(got.size() == want.size());
      double worst = 0;
      for (std::size_t i = 0; i < want.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
      CHECK(worst <= 1e-6);
    }
  }
  CHECK(parts == std::set<std::string>{"train", "valid", "test"});
  CHECK(cache.type_reps.ids().size() == 3);
}

TEST_CASE("write, load and rebuild") {
  testutil::TempDir dir("cache");
  const auto s = make_setup(40);
  const std::vector<Strategy> strats{Strategy::ContrType, Strategy::ContrTypeClauseSim};
  const auto a = representation::cache_build({s.corpus, s.store, 6, strats});
  representation::cache_write(a, dir / "a");
  const auto loaded = representation::cache_load(dir / "a", a.fingerprint);
  CHECK(loaded.examples == a.examples);
  CHECK(loaded.has(Strategy::ContrType));
  CHECK_FALSE(loaded.has(Strategy::OnlyContr));
  CHECK(loaded.fallbacks == a.fallbacks);
  const auto& id = a.examples.front().example_id;
  CHECK(as_vec(loaded.context(Strategy::ContrTypeClauseSim, id)) ==
        as_vec(a.context(Strategy::ContrTypeClauseSim, id)));

  const auto b = representation::cache_build({s.corpus, s.store, 6, strats});
  representation::cache_write(b, dir / "b");
  for (const auto& entry : std::filesystem::directory_iterator(dir / "a")) {
    const auto name = entry.path().filename();
    INFO(name.string());
    CHECK(testutil::slurp(entry.path()) == testutil::slurp(dir / "b" / name));
  }
  CHECK_THROWS_AS(loaded.context(Strategy::OnlyContr, id), Error);
  CHECK_THROWS_AS(loaded.context(Strategy::ContrType, "nope"), Error);
}

TEST_CASE("a stale cache is refused") {
  testutil::TempDir dir("stale");
  const auto s = make_setup(40);
  const auto cache = representation::cache_build({s.corpus, s.store, 6, {Strategy::ContrType}});
  representation::cache_write(cache, dir.path());
  CHECK(representation::cache_fingerprint(s.corpus, s.store, 8, {}) != cache.fingerprint);
  CHECK_THROWS_AS(representation::cache_load(dir.path(), representation::cache_fingerprint(
                                                             s.corpus, s.store, 8, {})),
                  StaleCacheError);
  embedding::EncoderSpec other;
  other.dim = 32;
  other.seed = 5;
  const auto other_store = embedding::embed_corpus(other, s.corpus.contracts);
  CHECK_THROWS_AS(representation::cache_load(dir.path(), representation::cache_fingerprint(
                                                             s.corpus, other_store, 6, {})),
                  StaleCacheError);
  CHECK_NOTHROW(representation::cache_load(dir.path()));
}
