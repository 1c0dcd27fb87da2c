// One PASS/FAIL line per acceptance criterion. Exit status is nonzero when
// any criterion fails. An optional argument runs only the criteria whose
// name contains it.
#include <fmt/core.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <unistd.h>

#include "clauseforge/decoder.hpp"
#include "clauseforge/metrics.hpp"
#include "clauseforge/pipeline.hpp"
#include "clauseforge/rep_cache.hpp"
#include "clauseforge/representation.hpp"
#include "clauseforge/simindex.hpp"
#include "clauseforge/strategy.hpp"
#include "clauseforge/synthetic.hpp"

using namespace clauseforge;
namespace fs = std::filesystem;
using strategy::Strategy;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct OracleRow {
  const char* cand;
  const char* ref;
  double r1, r2, rl_p, rl_r, rl_f, b1, b2, b4;
};
#include "metric_oracle_values.inc"

using Vec = std::vector<double>;

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return INFINITY;
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

// Brute-force means in long double, written without the library helpers.
Vec mean_ld(const std::vector<std::vector<float>>& rows) {
  std::vector<long double> acc(rows.front().size(), 0.0L);
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size(); ++i) acc[i] += r[i];
  Vec out(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<double>(acc[i] / rows.size());
  return out;
}

Vec mean_ld(const std::vector<Vec>& rows) {
  std::vector<long double> acc(rows.front().size(), 0.0L);
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size(); ++i) acc[i] += r[i];
  Vec out(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<double>(acc[i] / rows.size());
  return out;
}

Outcome representation_oracle() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<float> u(-3, 3);
  const std::vector<std::string> types{"alpha", "beta", "gamma"};
  double worst = 0;
  std::size_t checks = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n_contracts = 1 + rng() % 5;
    const std::uint32_t d = 1 + static_cast<std::uint32_t>(rng() % 8);
    embedding::EmbeddingStore store(d);
    std::vector<corpus::Contract> contracts;
    std::map<std::string, std::vector<float>> emb;
    for (std::size_t c = 0; c < n_contracts; ++c) {
      corpus::Contract con{"c" + std::to_string(c), {}};
      const std::size_t n_clauses = 1 + rng() % 6;
      for (std::size_t k = 0; k < n_clauses; ++k) {
        const std::string id = con.contract_id + "-" + std::to_string(k);
        std::vector<float> v(d);
        for (auto& x : v) x = u(rng);
        store.add(id, v);
        emb[id] = v;
        con.clauses.push_back({id, con.contract_id, types[rng() % types.size()], "t", 1});
      }
      contracts.push_back(std::move(con));
    }
    const corpus::CorpusView view(contracts);

    // Contract reps, with and without excluding one clause.
    representation::ContractRepTable table;
    for (const auto& con : contracts) {
      std::vector<std::vector<float>> all;
      for (const auto& cl : con.clauses) all.push_back(emb[cl.clause_id]);
      const auto got = representation::contract_rep(con, store);
      worst = std::max(worst, max_abs_diff(got.vector, mean_ld(all)));
      ++checks;
      table[con.contract_id] = got;
      if (con.clauses.size() > 1) {
        const auto& drop = con.clauses[rng() % con.clauses.size()].clause_id;
        std::vector<std::vector<float>> rest;
        for (const auto& cl : con.clauses)
          if (cl.clause_id != drop) rest.push_back(emb[cl.clause_id]);
        worst = std::max(worst, max_abs_diff(representation::contract_rep(con, store, drop).vector, mean_ld(rest)));
        ++checks;
      }
    }

    // Type reps over a random "train" subset.
    std::vector<std::string> train;
    for (const auto& con : contracts)
      if (rng() % 3 != 0) train.push_back(con.contract_id);
    if (train.empty()) train.push_back(contracts.front().contract_id);
    for (const auto& t : types) {
      std::vector<std::vector<float>> members;
      for (const auto& con : contracts) {
        if (std::find(train.begin(), train.end(), con.contract_id) == train.end()) continue;
        for (const auto& cl : con.clauses)
          if (cl.clause_type == t) members.push_back(emb[cl.clause_id]);
      }
      if (members.empty()) continue;
      worst = std::max(worst, max_abs_diff(representation::clause_type_rep(t, contracts, train, store).vector,
                                           mean_ld(members)));
      ++checks;
    }

    // Similarity reps over a random neighbor set.
    std::vector<std::string> neighbors;
    for (const auto& con : contracts)
      if (rng() % 2 == 0) neighbors.push_back(con.contract_id);
    if (neighbors.empty()) neighbors.push_back(contracts.back().contract_id);
    std::vector<Vec> neigh_reps;
    for (const auto& id : neighbors) neigh_reps.push_back(table.at(id).vector);
    worst = std::max(worst, max_abs_diff(representation::full_sim_rep(neighbors, table).vector, mean_ld(neigh_reps)));
    ++checks;
    for (const auto& t : types) {
      std::vector<Vec> per_contract;
      for (const auto& id : neighbors) {
        std::vector<std::vector<float>> own;
        for (const auto& cl : view.contract(id).clauses)
          if (cl.clause_type == t) own.push_back(emb[cl.clause_id]);
        if (!own.empty()) per_contract.push_back(mean_ld(own));
      }
      const auto got = representation::clause_sim_rep(neighbors, t, view, store);
      if (per_contract.empty()) {
        if (got.has_value()) return {false, "clause-sim rep present with no contributing neighbor"};
        continue;
      }
      if (!got) return {false, "clause-sim rep missing"};
      worst = std::max(worst, max_abs_diff(got->vector, mean_ld(per_contract)));
      ++checks;
    }
  }
  return {worst <= 1e-9, fmt::format("200 micro-corpora, {} reps, max component error {:.3g} (tol 1e-9)", checks, worst)};
}

Outcome strategy_suite() {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  std::size_t failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t d = 1 + rng() % 32;
    auto rnd = [&] {
      Vec v(d);
      for (auto& x : v) x = nd(rng);
      return v;
    };
    const Vec c = rnd(), t = rnd(), fs = rnd(), cs = rnd();
    bool ok = true;
    for (auto s : strategy::kAllStrategies) ok &= strategy::assemble(s, c, t, fs, cs).size() == strategy::out_dim(s, d);
    ok &= strategy::assemble(Strategy::OnlyContr, c, t, fs, cs) == c;
    const auto ct = strategy::assemble(Strategy::ContrType, c, t);
    ok &= ct == strategy::assemble(Strategy::ContrType, t, c);
    for (std::size_t i = 0; i < d; ++i) ok &= std::abs(ct[i] - (c[i] + t[i]) / 2.0) <= 1e-15 * (1 + std::abs(c[i]) + std::abs(t[i]));
    auto halves = [&](const Vec& v, const Vec& first, const Vec& second) {
      return v.size() == 2 * d && Vec(v.begin(), v.begin() + d) == first && Vec(v.begin() + d, v.end()) == second;
    };
    ok &= halves(strategy::assemble(Strategy::ContrFullSim, c, std::nullopt, fs), c, fs);
    ok &= halves(strategy::assemble(Strategy::ContrTypeFullSim, c, t, fs), ct, fs);
    ok &= halves(strategy::assemble(Strategy::ContrTypeClauseSim, c, t, std::nullopt, cs), ct, cs);
    failures += ok ? 0 : 1;
  }
  return {failures == 0, fmt::format("1000 cases x 5 strategies, {} failures", failures)};
}

Outcome ann_recall() {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::string> ids;
  std::vector<Vec> vecs;
  for (int i = 0; i < 1000; ++i) {
    ids.push_back("v" + std::to_string(i));
    Vec v(32);
    for (auto& x : v) x = u(rng);
    vecs.push_back(std::move(v));
  }
  const auto idx = simindex::HnswIndex::build(ids, vecs);
  double total = 0;
  std::size_t excluded_ok = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto hits = idx.search(vecs[i], 10, std::string_view(ids[i]));
    const bool clean = hits.size() == 10 &&
                       std::none_of(hits.begin(), hits.end(), [&](const auto& h) { return h.contract_id == ids[i]; });
    excluded_ok += clean ? 1 : 0;
    total += simindex::recall(hits, simindex::brute_force_search(ids, vecs, vecs[i], 10, std::string_view(ids[i])));
  }
  double fresh = 0;
  for (int q = 0; q < 200; ++q) {
    Vec v(32);
    for (auto& x : v) x = u(rng);
    fresh += simindex::recall(idx.search(v, 10), simindex::brute_force_search(ids, vecs, v, 10));
  }
  const double r_self = total / 1000.0, r_fresh = fresh / 200.0;
  return {r_self >= 0.95 && r_fresh >= 0.95 && excluded_ok == 1000,
          fmt::format("recall@10 {:.4f} (stored queries), {:.4f} (fresh queries); exclusion {}/1000", r_self,
                      r_fresh, excluded_ok)};
}

Outcome metric_oracle() {
  double worst = 0;
  std::vector<std::string> cands, refs;
  for (const auto& row : kOracle) {
    const auto l = metrics::rouge_l(row.cand, row.ref);
    const auto b = metrics::bleu({row.cand}, {row.ref});
    for (auto [got, want] : {std::pair{metrics::rouge_n(row.cand, row.ref, 1).f1, row.r1},
                             {metrics::rouge_n(row.cand, row.ref, 2).f1, row.r2},
                             {l.precision, row.rl_p}, {l.recall, row.rl_r}, {l.f1, row.rl_f},
                             {b.bleu1, row.b1}, {b.bleu2, row.b2}, {b.bleu, row.b4}}) {
      worst = std::max(worst, std::abs(got - want));
    }
    cands.push_back(row.cand);
    refs.push_back(row.ref);
  }
  const auto corpus = metrics::bleu(cands, refs);
  worst = std::max({worst, std::abs(corpus.bleu1 - kCorpusBleu[0]), std::abs(corpus.bleu2 - kCorpusBleu[1]),
                    std::abs(corpus.bleu - kCorpusBleu[2])});
  bool identity = true;
  for (const std::string same : {"x", "notices apply", "the parties agree that this agreement shall be governed by the laws of delaware"}) {
    const auto id_b = metrics::bleu({same}, {same});
    identity &= metrics::rouge_n(same, same, 1).f1 == 100.0 && metrics::rouge_n(same, same, 2).f1 == 100.0 &&
                metrics::rouge_l(same, same).f1 == 100.0 && id_b.bleu1 == 100.0 && id_b.bleu2 == 100.0 &&
                id_b.bleu == 100.0;
  }
  const double worked = metrics::bleu({"the cat sat"}, {"the cat sat down"}).bleu2;
  return {worst <= 1e-6 && identity && std::abs(worked - 71.65) <= 0.01,
          fmt::format("20 pairs max error {:.3g}; identity {}; worked BLEU-2 {:.4f}", worst,
                      identity ? "100" : "not 100", worked)};
}

Outcome decoder_numerics() {
  // Gradient check on 100 sampled coordinates of a micro model.
  decoder::DecoderConfig micro;
  micro.layers = 2;
  micro.model_dim = 8;
  micro.heads = 2;
  micro.ffn_dim = 16;
  micro.max_len = 8;
  micro.vocab_size = 12;
  micro.context_dim = 6;
  micro.dropout = 0.0;
  decoder::DecoderModel m(micro);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd(0.0, 0.3);
  for (auto& p : m.parameters())
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = nd(rng);
  const std::vector<std::vector<tokenizer::TokenId>> inputs{{1, 5, 7, 4, 9}, {1, 11, 6}};
  const std::vector<std::uint32_t> targets{5, 7, 4, 9, 2, 11, 6, 2};
  const std::vector<float> c1{0.5f, -1.f, 0.25f, 2.f, 0.f, 1.f}, c2{1.f, 1.f, -0.5f, 0.f, 0.3f, -2.f};
  const std::vector<std::span<const float>> ctx{c1, c2};
  auto loss = [&](bool record) {
    nn::Tape t(record);
    const auto l = nn::cross_entropy(t, m.forward(t, inputs, ctx), targets, tokenizer::kPad);
    if (record) t.backward(l);
    return t.value(l)(0, 0);
  };
  m.zero_grad();
  loss(true);
  std::vector<std::pair<std::size_t, Eigen::Index>> coords;
  std::size_t total = 0;
  for (const auto& p : m.parameters()) total += p.size();
  while (coords.size() < 100) {
    std::size_t flat = rng() % total;
    for (std::size_t pi = 0; pi < m.parameters().size(); ++pi) {
      if (flat < m.parameters()[pi].size()) {
        coords.emplace_back(pi, static_cast<Eigen::Index>(flat));
        break;
      }
      flat -= m.parameters()[pi].size();
    }
  }
  double worst_rel = 0;
  for (auto [pi, i] : coords) {
    auto& p = m.parameters()[pi];
    // Five-point stencil: truncation error O(h^4) lets h stay large enough
    // that float64 rounding does not swamp gradients near 1e-7.
    const double orig = p.value.data()[i], h = 1e-3;
    auto at = [&](double x) {
      p.value.data()[i] = x;
      return loss(false);
    };
    const double numeric = (-at(orig + 2 * h) + 8 * at(orig + h) - 8 * at(orig - h) + at(orig - 2 * h)) / (12 * h);
    p.value.data()[i] = orig;
    const double analytic = p.grad.data()[i];
    const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
    worst_rel = std::max(worst_rel, std::abs(numeric - analytic) / denom);
  }

  // Initial loss of the full-size model.
  decoder::DecoderConfig full;
  full.context_dim = 768;
  decoder::DecoderModel big(full);
  std::vector<decoder::Sequence> batch;
  std::normal_distribution<float> cn(0.f, 1.f);
  for (int b = 0; b < 8; ++b) {
    decoder::Sequence s{"s" + std::to_string(b), {}, std::vector<float>(768)};
    for (auto& x : s.context) x = cn(rng);
    for (int j = 0; j < 30; ++j) s.tokens.push_back(4 + static_cast<tokenizer::TokenId>(rng() % 8188));
    batch.push_back(std::move(s));
  }
  const double init = decoder::batch_loss(big, batch), ln_v = std::log(8192.0);
  const double init_rel = std::abs(init - ln_v) / ln_v;

  // Overfit one real clause.
  synthetic::Options so;
  so.contracts = 20;
  std::vector<std::string> texts;
  for (const auto& c : synthetic::generate(so))
    for (const auto& cl : c.clauses) texts.push_back(cl.text);
  const auto vocab = tokenizer::train_vocab(texts, 300);
  const std::string clause = texts.front();
  decoder::DecoderConfig oc;
  oc.layers = 2;
  oc.model_dim = 32;
  oc.heads = 2;
  oc.ffn_dim = 64;
  oc.max_len = 64;
  oc.vocab_size = static_cast<int>(vocab.size());
  oc.context_dim = 4;
  oc.dropout = 0.0;
  decoder::DecoderModel om(oc);
  const decoder::Sequence seq{"one", vocab.encode(clause), {0.1f, 0.2f, 0.3f, 0.4f}};
  decoder::TrainConfig tc;
  tc.epochs = 200;
  tc.peak_lr = 3e-3;
  tc.batch_size = 1;
  tc.grad_accum_steps = 1;
  tc.weight_decay = 0.0;
  decoder::train(om, {seq}, {}, tc);
  const auto out = decoder::generate(om, seq.context);
  const bool overfit = vocab.decode(out) == tokenizer::normalize(clause) && !out.empty() && out.back() == tokenizer::kEos;

  return {worst_rel <= 1e-4 && init_rel <= 0.02 && overfit,
          fmt::format("grad check 100 coords max rel {:.3g}; init loss {:.4f} vs ln 8192 = {:.4f} ({:.2f}%); overfit {}",
                      worst_rel, init, ln_v, 100 * init_rel, overfit ? "exact" : "mismatch")};
}

Outcome desk_ordering() {
  std::string detail;
  bool pass = true;
  double slowest = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    synthetic::Options so;
    so.seed = seed;
    const auto cd = pipeline::prepare_corpus(synthetic::generate(so), 5, 3, {0.8, 0.1, 0.1}, seed);
    embedding::EncoderSpec spec;
    spec.dim = 128;
    spec.seed = seed;
    const auto store = embedding::embed_corpus(spec, cd.contracts);
    const auto cache =
        representation::cache_build({cd, store, 6, {Strategy::OnlyContr, Strategy::ContrType}, nullptr, {}});
    const auto vocab = tokenizer::train_vocab(pipeline::vocab_texts(cd), 8192);
    decoder::DecoderConfig mc;
    mc.model_dim = 64;
    mc.ffn_dim = 256;
    mc.heads = 4;
    mc.max_len = 64;
    mc.seed = seed;
    decoder::TrainConfig tc;
    tc.epochs = 10;
    tc.peak_lr = 1e-3;
    tc.batch_size = 16;
    tc.grad_accum_steps = 1;
    tc.seed = seed;
    std::map<Strategy, double> rouge_l;
    for (auto s : {Strategy::OnlyContr, Strategy::ContrType}) {
      const auto t0 = std::chrono::steady_clock::now();
      auto trained = pipeline::train_strategy(cd, cache, s, vocab, mc, tc);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      slowest = std::max(slowest, secs);
      rouge_l[s] = metrics::aggregate_report(
                       pipeline::generate_outputs(trained.model, vocab, cd, cache, s, "test", {}))
                       .overall.rougeL;
    }
    const double gap = rouge_l[Strategy::ContrType] - rouge_l[Strategy::OnlyContr];
    pass &= gap >= 5.0;
    detail += fmt::format("{}seed {}: CONTR_TYPE {:.2f} vs ONLY_CONTR {:.2f} (+{:.2f})", detail.empty() ? "" : "; ",
                          seed, rouge_l[Strategy::ContrType], rouge_l[Strategy::OnlyContr], gap);
  }
  pass &= slowest <= 1800.0;
  return {pass, detail + fmt::format("; slowest training run {:.0f}s (budget 1800s)", slowest)};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

Outcome cache_equivalence() {
  synthetic::Options so;
  so.contracts = 120;
  const auto cd = pipeline::prepare_corpus(synthetic::generate(so), 5, 3, {0.8, 0.1, 0.1}, 7);
  embedding::EncoderSpec spec;
  spec.dim = 64;
  const auto store = embedding::embed_corpus(spec, cd.contracts);
  const std::vector<Strategy> all(strategy::kAllStrategies.begin(), strategy::kAllStrategies.end());
  const auto cache = representation::cache_build({cd, store, 6, all});

  // Fresh contexts straight from the representation layer.
  const corpus::CorpusView view(cd.contracts);
  const auto index_reps = representation::contract_reps(cd.contracts, cd.split.train, store);
  const auto type_reps = representation::clause_type_reps(cd.catalog, cd.contracts, cd.split.train, store);
  const auto idx = representation::build_contract_index(cd, store, {});
  const strategy::Resources res{view, store, type_reps, index_reps, strategy::search_with(idx)};
  const auto vocab = tokenizer::train_vocab(pipeline::vocab_texts(cd), 400);
  double worst = 0;
  std::size_t compared = 0;
  for (auto s : all) {
    for (const char* part : {"train", "valid", "test"}) {
      for (const auto& seq : pipeline::make_sequences(cd, cache, s, part, vocab)) {
        const auto& cl = view.clause(seq.id);
        const auto fresh = strategy::resolve_inputs({cl.contract_id, seq.id}, s, res, 6).vector;
        const Vec got(seq.context.begin(), seq.context.end());
        worst = std::max(worst, max_abs_diff(got, fresh));
        ++compared;
      }
    }
  }

  const auto dir = fs::temp_directory_path() / fmt::format("cf-accept-cache-{}", ::getpid());
  fs::remove_all(dir);
  representation::cache_write(cache, dir / "a");
  representation::cache_write(representation::cache_build({cd, store, 6, all}), dir / "b");
  std::size_t files = 0, identical = 0;
  for (const auto& e : fs::directory_iterator(dir / "a")) {
    ++files;
    identical += slurp(e.path()) == slurp(dir / "b" / e.path().filename()) ? 1 : 0;
  }
  fs::remove_all(dir);
  return {worst <= 1e-6 && compared > 0 && files == identical,
          fmt::format("{} training contexts max error {:.3g} (tol 1e-6); rebuild {}/{} files byte-identical", compared,
                      worst, identical, files)};
}

Outcome pearson_lengths() {
  const double r = metrics::pearson({1, 2, 3}, {3, 1, 2});
  // Actual lengths 4, 2, 6 and generated 3, 3, 6 (whitespace tokens).
  const std::vector<metrics::ScoredOutput> outs{{"a", "notices", "w w w", "w w w w"},
                                               {"b", "notices", "w w w", "w w"},
                                               {"c", "terminations", "w w w w w w", "w w w w w w"}};
  const auto s = metrics::length_stats(outs);
  const bool ok_actual = s.actual.mean == 4.0 && std::abs(s.actual.std - std::sqrt(8.0 / 3.0)) <= 1e-15 &&
                         s.actual.median == 4.0;
  const bool ok_generated =
      s.generated.mean == 4.0 && std::abs(s.generated.std - std::sqrt(2.0)) <= 1e-15 && s.generated.median == 3.0;
  const bool ok_r = s.pearson_r && std::abs(*s.pearson_r - 6.0 / std::sqrt(48.0)) <= 1e-15;
  const bool zero_var = !metrics::length_stats_from_pairs({5, 5}, {1, 2}).pearson_r.has_value();
  return {std::abs(r + 0.5) <= 1e-15 && ok_actual && ok_generated && ok_r && zero_var && s.pairs == 3,
          fmt::format("r((1,3),(2,1),(3,2)) = {:.15g}; fixture mean/std/median {}/{}; r {:.6f}; zero variance -> {}", r,
                      ok_actual ? "ok" : "off", ok_generated ? "ok" : "off", s.pearson_r.value_or(NAN),
                      zero_var ? "undefined" : "defined")};
}

Outcome end_to_end_determinism() {
  const auto dir = fs::temp_directory_path() / fmt::format("cf-accept-e2e-{}", ::getpid());
  fs::remove_all(dir);
  fs::create_directories(dir);
  synthetic::Options so;
  so.contracts = 80;
  corpus::write_contract_jsonl(dir / "corpus.jsonl", synthetic::generate(so));
  pipeline::RunConfig c;
  c.corpus_input = dir / "corpus.jsonl";
  c.top_types = 3;
  c.encoder.dim = 32;
  c.vocab_size = 500;
  c.strategy = Strategy::ContrTypeClauseSim;
  c.model.layers = 2;
  c.model.model_dim = 32;
  c.model.heads = 2;
  c.model.ffn_dim = 64;
  c.model.max_len = 64;
  c.train.epochs = 2;
  c.train.batch_size = 8;
  c.train.grad_accum_steps = 2;
  c.train.peak_lr = 1e-3;
  c.decode.max_len = 40;
  std::ostringstream log;
  auto a = c, b = c;
  a.workspace = dir / "a";
  b.workspace = dir / "b";
  const auto ra = pipeline::run_pipeline(a, log);
  const auto rb = pipeline::run_pipeline(b, log);
  const bool outputs_same = slurp(dir / "a" / "outputs.jsonl") == slurp(dir / "b" / "outputs.jsonl");
  fs::remove_all(dir);
  return {ra.report == rb.report && outputs_same && ra.report.overall.count > 0,
          fmt::format("two runs, {} test outputs: reports {}, outputs {}", ra.report.overall.count,
                      ra.report == rb.report ? "identical" : "differ", outputs_same ? "identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string filter = argc > 1 ? argv[1] : "";
  struct Criterion {
    std::string name;
    std::function<Outcome()> run;
    double limit_s;  // 0: no wall-clock bound
  };
  // The desk check bounds each training run separately.
  const std::vector<Criterion> criteria{
      {"representation-oracle", representation_oracle, 10},
      {"strategy-suite", strategy_suite, 5},
      {"ann-recall", ann_recall, 30},
      {"metric-oracle", metric_oracle, 5},
      {"decoder-numerics", decoder_numerics, 300},
      {"desk-ordering", desk_ordering, 0},
      {"cache-equivalence", cache_equivalence, 60},
      {"pearson-length-stats", pearson_lengths, 1},
      {"end-to-end-determinism", end_to_end_determinism, 0},
  };
  int failed = 0;
  for (const auto& [name, fn, limit] : criteria) {
    if (!filter.empty() && name.find(filter) == std::string::npos) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit > 0 && secs > limit) {
      o.pass = false;
      o.detail += fmt::format("; exceeded {:.0f}s budget", limit);
    }
    fmt::print("{} {} [{:.1f}s] {}\n", o.pass ? "PASS" : "FAIL", name, secs, o.detail);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
