#include <CLI11.hpp>
#include <fmt/core.h>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "clauseforge/errors.hpp"
#include "clauseforge/pipeline.hpp"
#include "clauseforge/synthetic.hpp"

using namespace clauseforge;
namespace fs = std::filesystem;

namespace {

std::array<double, 3> parse_ratios(const std::string& text) {
  std::array<double, 3> r{};
  std::istringstream in(text);
  std::string part;
  std::size_t n = 0;
  while (std::getline(in, part, ',')) {
    if (n == 3) throw ConfigError("ratios: expected three comma-separated values");
    try {
      r[n++] = std::stod(part);
    } catch (const std::exception&) {
      throw ConfigError("ratios: not a number: " + part);
    }
  }
  if (n != 3) throw ConfigError("ratios: expected three comma-separated values");
  return r;
}

std::vector<std::size_t> parse_ks(const std::string& text) {
  std::vector<std::size_t> ks;
  std::istringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    try {
      ks.push_back(std::stoul(part));
    } catch (const std::exception&) {
      throw ConfigError("k list: not an integer: " + part);
    }
  }
  return ks;
}

void write_or_print(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw Error("cannot write " + out);
  f << text;
}

// Flags shared by every command that reads a run configuration. Unset flags
// leave the config file (or built-in default) value alone.
struct Overrides {
  std::string config;
  std::optional<std::string> workspace, input, format, strategy, encoder, encoder_file, ratios, decode;
  std::optional<std::size_t> k, top_types, min_clauses, vocab_size;
  std::optional<std::uint32_t> dim;
  std::optional<std::uint64_t> encoder_seed, split_seed;
  std::optional<int> epochs, batch_size, grad_accum, layers, model_dim, heads, ffn_dim, max_len,
      context_dim, beam_size, decode_max_len;
  std::optional<double> lr;

  void add_to(CLI::App* app) {
    app->add_option("--config", config, "run configuration (JSON)");
    app->add_option("--workspace", workspace, "workspace directory (default: $CLAUSEFORGE_DIR)");
    app->add_option("--input", input, "corpus JSONL file");
    app->add_option("--format", format, "contract | provision");
    app->add_option("--min-clauses", min_clauses);
    app->add_option("--top-types", top_types);
    app->add_option("--ratios", ratios, "train,valid,test");
    app->add_option("--split-seed", split_seed);
    app->add_option("--encoder", encoder, "hash | file");
    app->add_option("--encoder-file", encoder_file, "CREB file for --encoder file");
    app->add_option("--dim", dim, "embedding dimension");
    app->add_option("--encoder-seed", encoder_seed);
    app->add_option("--k", k, "retrieval depth");
    app->add_option("--strategy", strategy);
    app->add_option("--vocab-size", vocab_size);
    app->add_option("--layers", layers);
    app->add_option("--model-dim", model_dim);
    app->add_option("--heads", heads);
    app->add_option("--ffn-dim", ffn_dim);
    app->add_option("--max-len", max_len);
    app->add_option("--context-dim", context_dim);
    app->add_option("--epochs", epochs);
    app->add_option("--batch-size", batch_size);
    app->add_option("--grad-accum", grad_accum);
    app->add_option("--lr", lr, "peak learning rate");
    app->add_option("--decode", decode, "greedy | beam");
    app->add_option("--beam-size", beam_size);
    app->add_option("--decode-max-len", decode_max_len);
  }

  pipeline::RunConfig resolve() const {
    pipeline::RunConfig c = config.empty() ? pipeline::RunConfig{} : pipeline::load_run_config(config);
    if (workspace) c.workspace = *workspace;
    c.workspace = pipeline::default_workspace(c.workspace.empty() ? std::nullopt
                                                                  : std::optional<fs::path>(c.workspace));
    if (input) c.corpus_input = *input;
    if (format) c.format = corpus::parse_format(*format);
    if (min_clauses) c.min_clauses = *min_clauses;
    if (top_types) c.top_types = *top_types;
    if (ratios) c.ratios = parse_ratios(*ratios);
    if (split_seed) c.split_seed = *split_seed;
    if (encoder) c.encoder.kind = embedding::parse_encoder_kind(*encoder);
    if (encoder_file) c.encoder.file = *encoder_file;
    if (dim) c.encoder.dim = *dim;
    if (encoder_seed) c.encoder.seed = *encoder_seed;
    if (k) c.k = *k;
    if (strategy) c.strategy = strategy::parse_strategy(*strategy);
    if (vocab_size) c.vocab_size = *vocab_size;
    if (layers) c.model.layers = *layers;
    if (model_dim) c.model.model_dim = *model_dim;
    if (heads) c.model.heads = *heads;
    if (ffn_dim) c.model.ffn_dim = *ffn_dim;
    if (max_len) c.model.max_len = *max_len;
    if (context_dim) c.context_dim = *context_dim;
    if (epochs) c.train.epochs = *epochs;
    if (batch_size) c.train.batch_size = *batch_size;
    if (grad_accum) c.train.grad_accum_steps = *grad_accum;
    if (lr) c.train.peak_lr = *lr;
    if (decode) {
      if (*decode == "greedy") {
        c.decode.mode = decoder::DecodeMode::Greedy;
      } else if (*decode == "beam") {
        c.decode.mode = decoder::DecodeMode::Beam;
      } else {
        throw ConfigError("unknown decode mode: " + *decode);
      }
    }
    if (beam_size) c.decode.beam_size = *beam_size;
    if (decode_max_len) c.decode.max_len = *decode_max_len;
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clause generation from contract context"};
  app.require_subcommand(1);

  // corpus ingest / corpus split (ingest is a top-level alias)
  std::string in_path, in_format = "contract", corpus_dir, ratios = "0.8,0.1,0.1";
  std::size_t min_clauses = 5, top_types = 15;
  std::uint64_t split_seed = 7;
  auto add_ingest_flags = [&](CLI::App* sub) {
    sub->add_option("--input", in_path, "JSONL file")->required();
    sub->add_option("--format", in_format, "contract | provision");
    sub->add_option("--min-clauses", min_clauses);
    sub->add_option("--top-types", top_types);
    sub->add_option("--ratios", ratios);
    sub->add_option("--seed", split_seed, "split seed");
    sub->add_option("--out", corpus_dir, "corpus directory")->required();
  };
  auto do_ingest = [&] {
    auto contracts = corpus::ingest(in_path, corpus::parse_format(in_format));
    const auto c = pipeline::prepare_corpus(std::move(contracts), min_clauses, top_types,
                                            parse_ratios(ratios), split_seed);
    pipeline::write_corpus_dir(corpus_dir, c);
    fmt::print("{} contracts, {} types, split {}/{}/{}\n", c.contracts.size(), c.catalog.selected.size(),
               c.split.train.size(), c.split.valid.size(), c.split.test.size());
  };
  auto* corpus_cmd = app.add_subcommand("corpus", "corpus ingestion and splitting");
  corpus_cmd->require_subcommand(1);
  auto* ingest_sub = corpus_cmd->add_subcommand("ingest", "parse, filter and split a corpus");
  add_ingest_flags(ingest_sub);
  ingest_sub->callback(do_ingest);
  auto* ingest_top = app.add_subcommand("ingest", "same as 'corpus ingest'");
  add_ingest_flags(ingest_top);
  ingest_top->callback(do_ingest);

  auto* split_sub = corpus_cmd->add_subcommand("split", "re-split an ingested corpus");
  split_sub->add_option("--corpus", corpus_dir)->required();
  split_sub->add_option("--ratios", ratios);
  split_sub->add_option("--seed", split_seed);
  split_sub->callback([&] {
    const auto c = corpus::read_corpus_dir(corpus_dir);
    const auto s = corpus::split(c.contracts, parse_ratios(ratios), split_seed);
    corpus::write_split(fs::path(corpus_dir) / "split.json", s);
    fmt::print("split {}/{}/{}\n", s.train.size(), s.valid.size(), s.test.size());
  });

  // embed
  std::string encoder = "hash", encoder_file, out;
  std::uint32_t dim = 768;
  std::uint64_t enc_seed = 0;
  auto* embed = app.add_subcommand("embed", "embed every clause into a CREB file");
  embed->add_option("--encoder", encoder, "hash | file");
  embed->add_option("--file", encoder_file, "precomputed CREB file for --encoder file");
  embed->add_option("--dim", dim);
  embed->add_option("--seed", enc_seed);
  embed->add_option("--corpus", corpus_dir)->required();
  embed->add_option("--out", out)->required();
  embed->callback([&] {
    const embedding::EncoderSpec spec{embedding::parse_encoder_kind(encoder), dim, enc_seed, encoder_file};
    const auto c = corpus::read_corpus_dir(corpus_dir);
    const auto store = spec.kind == embedding::EncoderKind::HashDeterministic
                           ? embedding::embed_corpus(spec, c.contracts)
                           : embedding::load_external(spec, c.contracts);
    embedding::store_write(store, out);
    fmt::print("{} embeddings, dim {}\n", store.size(), store.dim());
  });

  // reps build
  std::string embeddings, strategies = "all", index_path, reps_dir;
  std::size_t k = simindex::kDefaultK;
  auto* reps = app.add_subcommand("reps", "representation cache");
  reps->require_subcommand(1);
  auto* reps_build = reps->add_subcommand("build", "precompute contexts for the given strategies");
  reps_build->add_option("--corpus", corpus_dir)->required();
  reps_build->add_option("--embeddings", embeddings)->required();
  reps_build->add_option("--k", k);
  reps_build->add_option("--strategies", strategies, "comma list or 'all'");
  reps_build->add_option("--index", index_path, "prebuilt index (built in place when omitted)");
  reps_build->add_option("--out", reps_dir)->required();
  reps_build->callback([&] {
    const auto c = corpus::read_corpus_dir(corpus_dir);
    const auto store = embedding::store_read(embeddings);
    std::optional<simindex::HnswIndex> idx;
    if (!index_path.empty()) idx = simindex::HnswIndex::load(index_path);
    const auto cache = representation::cache_build(
        {c, store, k, strategy::parse_strategy_list(strategies), idx ? &*idx : nullptr, {}});
    fs::remove_all(reps_dir);
    representation::cache_write(cache, reps_dir);
    fmt::print("{} examples\n", cache.examples.size());
    for (const auto& [s, n] : cache.fallbacks) {
      if (strategy::requires_sim(s)) fmt::print("  {}: {} clause-sim fallbacks\n", strategy::name(s), n);
    }
  });

  // index build / query
  simindex::IndexParams ip;
  std::string vectors, query_id, exclude;
  auto* index = app.add_subcommand("index", "contract similarity index");
  index->require_subcommand(1);
  auto* index_build = index->add_subcommand("build", "index the training contract reps of a cache");
  index_build->add_option("--reps", reps_dir)->required();
  index_build->add_option("--out", out)->required();
  index_build->add_option("--M", ip.M);
  index_build->add_option("--efc", ip.ef_construction);
  index_build->add_option("--efs", ip.ef_search);
  index_build->add_option("--seed", ip.seed);
  index_build->callback([&] {
    const auto cache = representation::cache_load(reps_dir);
    std::vector<std::vector<double>> vs;
    for (const auto& id : cache.contract_reps.ids()) {
      const auto v = cache.contract_reps.get(id);
      vs.emplace_back(v.begin(), v.end());
    }
    const auto idx = simindex::HnswIndex::build(cache.contract_reps.ids(), vs, ip);
    idx.save(out);
    fmt::print("{} contracts indexed\n", idx.size());
  });
  auto* index_query = index->add_subcommand("query", "nearest contracts to a stored vector");
  index_query->add_option("--index", index_path)->required();
  index_query->add_option("--vectors", vectors, "CREB file holding the query vector")->required();
  index_query->add_option("--id", query_id, "query vector id")->required();
  index_query->add_option("--k", k);
  index_query->add_option("--exclude", exclude, "contract id to leave out");
  index_query->callback([&] {
    const auto idx = simindex::HnswIndex::load(index_path);
    const auto store = embedding::store_read(vectors);
    const auto v = store.get(query_id);
    const std::vector<double> q(v.begin(), v.end());
    const auto hits = exclude.empty() ? idx.search(q, k) : idx.search(q, k, std::string_view(exclude));
    for (std::size_t i = 0; i < hits.size(); ++i) {
      fmt::print("{}\t{}\t{:.6f}\n", i + 1, hits[i].contract_id, hits[i].distance);
    }
  });

  // train
  Overrides train_ov;
  std::string cache_dir, vocab_dir;
  auto* train = app.add_subcommand("train", "train a decoder on cached contexts");
  train_ov.add_to(train);
  train->add_option("--cache", cache_dir)->required();
  train->add_option("--corpus", corpus_dir)->required();
  train->add_option("--vocab", vocab_dir, "vocabulary directory (trained from the corpus when omitted)");
  train->add_option("--out", out)->required();
  train->callback([&] {
    auto cfg = train_ov.resolve();
    const auto c = corpus::read_corpus_dir(corpus_dir);
    const auto cache = representation::cache_load(cache_dir);
    const auto vocab = vocab_dir.empty() ? tokenizer::train_vocab(pipeline::vocab_texts(c), cfg.vocab_size)
                                         : tokenizer::Vocab::load(vocab_dir);
    if (cfg.context_dim && *cfg.context_dim != static_cast<int>(strategy::out_dim(cfg.strategy, cache.dim))) {
      throw ConfigError(fmt::format("strategy {} produces {}-dim contexts but the decoder context_dim is {}",
                                    strategy::name(cfg.strategy), strategy::out_dim(cfg.strategy, cache.dim),
                                    *cfg.context_dim));
    }
    auto outcome = pipeline::train_strategy(c, cache, cfg.strategy, vocab, cfg.model, cfg.train, &std::cout);
    fs::remove_all(out);
    pipeline::save_trained(out, outcome.model, vocab, cfg.strategy, cfg.train, outcome.result);
  });

  // generate
  std::string ckpt, example_id, part = "test", mode = "greedy";
  int beam_size = 4, gen_max_len = 256;
  auto* generate = app.add_subcommand("generate", "generate clauses from a checkpoint");
  generate->add_option("--ckpt", ckpt)->required();
  generate->add_option("--cache", cache_dir)->required();
  generate->add_option("--corpus", corpus_dir)->required();
  generate->add_option("--example-id", example_id, "single target clause id");
  generate->add_option("--part", part, "train | valid | test");
  generate->add_option("--decode", mode, "greedy | beam");
  generate->add_option("--beam-size", beam_size);
  generate->add_option("--max-len", gen_max_len);
  generate->add_option("--out", out, "outputs JSONL (stdout when omitted)");
  generate->callback([&] {
    if (mode != "greedy" && mode != "beam") throw ConfigError("unknown decode mode: " + mode);
    const decoder::DecodeOptions opts{mode == "beam" ? decoder::DecodeMode::Beam : decoder::DecodeMode::Greedy,
                                      beam_size, gen_max_len};
    const auto c = corpus::read_corpus_dir(corpus_dir);
    const auto cache = representation::cache_load(cache_dir);
    auto model = decoder::load_checkpoint(ckpt);
    const auto vocab = tokenizer::Vocab::load(fs::path(ckpt) / "vocab");
    const auto s = pipeline::checkpoint_strategy(ckpt);
    const auto outputs = pipeline::generate_outputs(
        model, vocab, c, cache, s, part, opts,
        example_id.empty() ? std::nullopt : std::optional<std::string>(example_id));
    if (out.empty()) {
      for (const auto& o : outputs) fmt::print("{}\t{}\n", o.example_id, o.generated);
    } else {
      pipeline::write_outputs(out, outputs);
    }
  });

  // evaluate
  std::string outputs_path, title;
  auto* evaluate = app.add_subcommand("evaluate", "score generated clauses");
  evaluate->add_option("--outputs", outputs_path)->required();
  evaluate->add_option("--out", out, "report directory");
  evaluate->add_option("--title", title);
  evaluate->callback([&] {
    const auto outputs = pipeline::read_outputs(outputs_path);
    if (out.empty()) {
      std::cout << metrics::render_table(metrics::aggregate_report(outputs), title);
    } else {
      std::cout << metrics::render_table(pipeline::write_evaluation(out, outputs, title), title);
    }
  });

  // run
  Overrides run_ov;
  auto* run = app.add_subcommand("run", "run every stage, skipping those already up to date");
  run_ov.add_to(run);
  run->callback([&] {
    const auto result = pipeline::run_pipeline(run_ov.resolve(), std::cout);
    std::cout << metrics::render_table(result.report);
  });

  // ablate-k
  Overrides ablate_ov;
  std::string ks = "2,4,6,8,10,12";
  auto* ablate = app.add_subcommand("ablate-k", "rerun reps/train/evaluate per retrieval depth");
  ablate_ov.add_to(ablate);
  ablate->add_option("--ks", ks, "comma-separated k values");
  ablate->callback([&] {
    const auto cfg = ablate_ov.resolve();
    const auto rows = pipeline::ablate_k(cfg, parse_ks(ks), std::cout);
    std::cout << pipeline::render_ablation(rows, cfg.strategy);
  });

  // dump-embeddings
  auto* dump = app.add_subcommand("dump-embeddings", "CSV of actual and generated clause vectors");
  dump->add_option("--outputs", outputs_path)->required();
  dump->add_option("--dim", dim);
  dump->add_option("--seed", enc_seed);
  dump->add_option("--out", out, "CSV file (stdout when omitted)");
  dump->callback([&] {
    const embedding::EncoderSpec spec{embedding::EncoderKind::HashDeterministic, dim, enc_seed, {}};
    write_or_print(pipeline::dump_embeddings(pipeline::read_outputs(outputs_path), spec), out);
  });

  // synth
  synthetic::Options synth_opt;
  auto* synth = app.add_subcommand("synth", "write a templated synthetic contract corpus");
  synth->add_option("--contracts", synth_opt.contracts);
  synth->add_option("--seed", synth_opt.seed);
  synth->add_option("--out", out)->required();
  synth->callback([&] {
    corpus::write_contract_jsonl(fs::path(out), synthetic::generate(synth_opt));
    fmt::print("{} contracts\n", synth_opt.contracts);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
