#include "clauseforge/rep_cache.hpp"

#include <fstream>

#include <json.hpp>

#include "clauseforge/errors.hpp"
#include "clauseforge/hashing.hpp"
#include "clauseforge/representation.hpp"

namespace clauseforge::representation {

using json = nlohmann::json;

namespace {

std::vector<float> to_float(const Vector& v) { return {v.begin(), v.end()}; }

std::string context_file(strategy::Strategy s) {
  return "contexts_" + std::string(strategy::name(s)) + ".creb";
}

}  // namespace

std::span<const float> RepCache::context(strategy::Strategy s,
                                         const std::string& example_id) const {
  auto it = contexts.find(s);
  if (it == contexts.end()) {
    throw ConfigError("strategy " + std::string(strategy::name(s)) + " is not in the cache");
  }
  return it->second.get(example_id);
}

std::vector<CachedExample> RepCache::examples_in(const std::string& part) const {
  std::vector<CachedExample> out;
  for (const auto& e : examples) {
    if (e.part == part) out.push_back(e);
  }
  return out;
}

std::string store_fingerprint(const embedding::EmbeddingStore& store) {
  std::string bytes;
  bytes.reserve(store.size() * (16 + store.dim() * sizeof(float)));
  bytes += std::to_string(store.dim());
  for (std::size_t i = 0; i < store.size(); ++i) {
    bytes += store.ids()[i];
    bytes.push_back('\0');
    const auto v = store.at(i);
    bytes.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float));
  }
  return sha256_hex(bytes);
}

std::string cache_fingerprint(const corpus::CorpusDir& corpus,
                              const embedding::EmbeddingStore& store, std::size_t k,
                              const simindex::IndexParams& index_params) {
  Fingerprint fp;
  fp.add("rep-cache-v1")
      .add(store_fingerprint(store))
      .add(corpus::corpus_fingerprint(corpus.contracts))
      .add(corpus.split.seed);
  for (const auto& part : {&corpus.split.train, &corpus.split.valid, &corpus.split.test}) {
    for (const auto& id : *part) fp.add(id);
    fp.add("|");
  }
  for (const auto& t : corpus.catalog.types()) fp.add(t);
  fp.add(k)
      .add(index_params.M)
      .add(index_params.ef_construction)
      .add(index_params.ef_search)
      .add(index_params.seed);
  return fp.hex();
}

simindex::HnswIndex build_contract_index(const corpus::CorpusDir& corpus,
                                         const embedding::EmbeddingStore& store,
                                         const simindex::IndexParams& params) {
  const auto reps = contract_reps(corpus.contracts, corpus.split.train, store);
  std::vector<std::string> ids;
  std::vector<Vector> vectors;
  for (const auto& [id, rep] : reps) {
    ids.push_back(id);
    vectors.push_back(rep.vector);
  }
  return simindex::HnswIndex::build(ids, vectors, params);
}

RepCache cache_build(const CacheInputs& in) {
  if (in.corpus.split.train.empty()) throw ConfigError("cache_build: corpus has no train split");
  if (in.strategies.empty()) throw ConfigError("cache_build: no strategies requested");

  RepCache cache;
  cache.fingerprint = cache_fingerprint(in.corpus, in.store, in.k, in.index_params);
  cache.k = in.k;
  cache.split_seed = in.corpus.split.seed;
  cache.dim = in.store.dim();
  cache.strategies = in.strategies;

  const corpus::CorpusView view(in.corpus.contracts);
  const auto index_reps = contract_reps(in.corpus.contracts, in.corpus.split.train, in.store);
  const auto type_reps =
      clause_type_reps(in.corpus.catalog, in.corpus.contracts, in.corpus.split.train, in.store);

  cache.contract_reps = embedding::EmbeddingStore(in.store.dim());
  for (const auto& [id, rep] : index_reps) cache.contract_reps.add(id, to_float(rep.vector));
  cache.type_reps = embedding::EmbeddingStore(in.store.dim());
  for (const auto& t : in.corpus.catalog.types()) {
    cache.type_reps.add(t, to_float(type_reps.at(t).vector));
  }

  std::optional<simindex::HnswIndex> own_index;
  const simindex::HnswIndex* index = in.index;
  const bool needs_index = std::any_of(in.strategies.begin(), in.strategies.end(),
                                       [](auto s) { return strategy::requires_sim(s); });
  if (needs_index && index == nullptr) {
    own_index = build_contract_index(in.corpus, in.store, in.index_params);
    index = &*own_index;
  }

  const strategy::Resources res{view, in.store, type_reps, index_reps,
                                index ? strategy::search_with(*index) : strategy::SearchFn{}};

  const std::array<std::pair<const char*, const std::vector<std::string>*>, 3> parts{
      {{"train", &in.corpus.split.train},
       {"valid", &in.corpus.split.valid},
       {"test", &in.corpus.split.test}}};
  std::vector<corpus::Example> all_examples;
  for (const auto& [part, ids] : parts) {
    for (auto& ex : corpus::make_examples(in.corpus.contracts, *ids, in.corpus.catalog)) {
      cache.examples.push_back({ex.target_clause_id, ex.contract_id,
                                view.clause(ex.target_clause_id).clause_type, part});
      all_examples.push_back(std::move(ex));
    }
  }

  for (auto s : in.strategies) {
    embedding::EmbeddingStore ctx(static_cast<std::uint32_t>(strategy::out_dim(s, in.store.dim())),
                                  std::string(strategy::name(s)));
    std::size_t fallbacks = 0;
    for (const auto& ex : all_examples) {
      const auto cv = strategy::resolve_inputs(ex, s, res, in.k);
      fallbacks += cv.fallback ? 1 : 0;
      ctx.add(cv.example_id, to_float(cv.vector));
    }
    cache.contexts.emplace(s, std::move(ctx));
    cache.fallbacks[s] = fallbacks;
  }
  return cache;
}

void cache_write(const RepCache& cache, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json strategies = json::array();
  json fallbacks = json::object();
  for (auto s : cache.strategies) {
    strategies.push_back(std::string(strategy::name(s)));
    fallbacks[std::string(strategy::name(s))] = cache.fallbacks.at(s);
  }
  const json manifest = {{"fingerprint", cache.fingerprint},
                         {"k", cache.k},
                         {"strategies", strategies},
                         {"split_seed", cache.split_seed},
                         {"dim", cache.dim},
                         {"examples", cache.examples.size()},
                         {"clause_sim_fallbacks", fallbacks}};
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';

  std::ofstream ex(dir / "examples.jsonl", std::ios::binary);
  for (const auto& e : cache.examples) {
    ex << json{{"example_id", e.example_id},
               {"contract_id", e.contract_id},
               {"clause_type", e.clause_type},
               {"part", e.part}}
              .dump()
       << '\n';
  }
  embedding::store_write(cache.contract_reps, dir / "contract_reps.creb");
  embedding::store_write(cache.type_reps, dir / "type_reps.creb");
  for (const auto& [s, store] : cache.contexts) {
    embedding::EmbeddingStore plain = store;
    plain.set_provenance({});
    embedding::store_write(plain, dir / context_file(s));
  }
}

RepCache cache_load(const std::filesystem::path& dir,
                    const std::optional<std::string>& expected_fingerprint) {
  std::ifstream min(dir / "manifest.json");
  if (!min) throw Error("no cache manifest in " + dir.string());
  const auto manifest = json::parse(min);

  RepCache cache;
  cache.fingerprint = manifest.at("fingerprint").get<std::string>();
  if (expected_fingerprint && *expected_fingerprint != cache.fingerprint) {
    throw StaleCacheError("stale representation cache in " + dir.string() +
                          ": inputs changed since it was built");
  }
  cache.k = manifest.at("k").get<std::size_t>();
  cache.split_seed = manifest.at("split_seed").get<std::uint64_t>();
  cache.dim = manifest.at("dim").get<std::uint32_t>();
  for (const auto& name : manifest.at("strategies")) {
    const auto s = strategy::parse_strategy(name.get<std::string>());
    cache.strategies.push_back(s);
    cache.fallbacks[s] = manifest.at("clause_sim_fallbacks").at(name.get<std::string>()).get<std::size_t>();
    cache.contexts.emplace(
        s, embedding::store_read(dir / context_file(s),
                                 static_cast<std::uint32_t>(strategy::out_dim(s, cache.dim))));
  }

  std::ifstream ex(dir / "examples.jsonl");
  std::string line;
  while (std::getline(ex, line)) {
    if (line.empty()) continue;
    const auto obj = json::parse(line);
    cache.examples.push_back({obj.at("example_id").get<std::string>(),
                              obj.at("contract_id").get<std::string>(),
                              obj.at("clause_type").get<std::string>(),
                              obj.at("part").get<std::string>()});
  }
  cache.contract_reps = embedding::store_read(dir / "contract_reps.creb", cache.dim);
  cache.type_reps = embedding::store_read(dir / "type_reps.creb", cache.dim);
  return cache;
}

}  // namespace clauseforge::representation
