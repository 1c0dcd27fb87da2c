#include "clauseforge/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "clauseforge/errors.hpp"
#include "clauseforge/hashing.hpp"

namespace clauseforge::pipeline {

using json = nlohmann::json;

namespace {

const char* part_names[] = {"train", "valid", "test"};

bool is_part(const std::string& part) {
  return std::find(std::begin(part_names), std::end(part_names), part) != std::end(part_names);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

std::string decode_mode_name(decoder::DecodeMode m) {
  return m == decoder::DecodeMode::Greedy ? "greedy" : "beam";
}

decoder::DecodeMode parse_decode_mode(const std::string& s) {
  if (s == "greedy") return decoder::DecodeMode::Greedy;
  if (s == "beam") return decoder::DecodeMode::Beam;
  throw ConfigError("unknown decode mode: " + s + " (expected greedy or beam)");
}

std::string format_name(corpus::Format f) {
  return f == corpus::Format::ContractJsonl ? "contract" : "provision";
}

std::string encoder_kind_name(embedding::EncoderKind k) {
  return k == embedding::EncoderKind::HashDeterministic ? "hash" : "file";
}

// Regular files under `rel` (a file or a directory), relative to `root`, sorted.
std::vector<std::string> expand_outputs(const fs::path& root, const std::vector<std::string>& rels) {
  std::vector<std::string> files;
  for (const auto& rel : rels) {
    const auto p = root / rel;
    if (fs::is_directory(p)) {
      for (const auto& e : fs::recursive_directory_iterator(p)) {
        if (e.is_regular_file()) files.push_back(fs::relative(e.path(), root).generic_string());
      }
    } else if (fs::exists(p)) {
      files.push_back(rel);
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

class Manifest {
 public:
  explicit Manifest(fs::path path) : path_(std::move(path)) {
    if (fs::exists(path_)) data_ = json::parse(read_text(path_));
    if (!data_.contains("stages")) data_ = {{"version", 1}, {"stages", json::object()}};
  }

  // Empty when the stage is up to date.
  std::string stale_reason(const std::string& stage, const std::string& fingerprint,
                           const fs::path& root, const std::vector<std::string>& outputs) const {
    const auto& stages = data_["stages"];
    if (!stages.contains(stage)) return "no previous run";
    const auto& rec = stages[stage];
    if (rec.value("fingerprint", "") != fingerprint) return "configuration changed";
    for (const auto& rel : outputs) {
      if (!fs::exists(root / rel)) return "output missing: " + rel;
    }
    for (const auto& [rel, hash] : rec["outputs"].items()) {
      if (!fs::exists(root / rel)) return "output missing: " + rel;
      if (sha256_file(root / rel) != hash.get<std::string>()) return "output modified: " + rel;
    }
    return {};
  }

  void record(const std::string& stage, const std::string& fingerprint, const fs::path& root,
              const std::vector<std::string>& outputs) {
    json files = json::object();
    for (const auto& f : expand_outputs(root, outputs)) files[f] = sha256_file(root / f);
    data_["stages"][stage] = {{"fingerprint", fingerprint}, {"outputs", files}};
    write_text(path_, data_.dump(2) + "\n");
  }

 private:
  fs::path path_;
  json data_;
};

json decoder_json(const decoder::DecoderConfig& c) { return json::parse(decoder::config_to_json(c)); }

}  // namespace

void RunConfig::validate() {
  if (k < simindex::kMinK) {
    throw ConfigError("k = " + std::to_string(k) + " is below the minimum of " +
                      std::to_string(simindex::kMinK));
  }
  if (encoder.dim == 0) throw ConfigError("encoder dim must be positive");
  if (encoder.kind == embedding::EncoderKind::ExternalFile && encoder.file.empty()) {
    throw ConfigError("encoder kind 'file' needs an embeddings file");
  }
  if (!corpus_input.empty() && !fs::exists(corpus_input)) {
    throw ConfigError("corpus input not found: " + corpus_input.string());
  }
  if (top_types == 0 || min_clauses == 0) throw ConfigError("min_clauses and top_types must be >= 1");
  if (!is_part(eval_part)) throw ConfigError("eval_part must be train, valid or test");
  if (decode.max_len < 1 || decode.beam_size < 1) throw ConfigError("decode max_len and beam_size must be >= 1");
  const auto needed = static_cast<int>(strategy::out_dim(strategy, encoder.dim));
  if (context_dim && *context_dim != needed) {
    throw ConfigError(fmt::format(
        "strategy {} produces {}-dim contexts (encoder dim {}) but the decoder context_dim is {}",
        strategy::name(strategy), needed, encoder.dim, *context_dim));
  }
  model.context_dim = needed;
  if (vocab_size < tokenizer::kNumSpecials + 1) throw ConfigError("vocab_size too small");
  model.vocab_size = static_cast<int>(vocab_size);
  model.validate();
  train.validate();
}

RunConfig run_config_from_json(const std::string& text, const fs::path& base_dir) {
  const auto j = json::parse(text);
  RunConfig c;
  if (j.contains("workspace")) c.workspace = resolve(j["workspace"].get<std::string>(), base_dir);
  if (j.contains("corpus")) {
    const auto& cj = j["corpus"];
    if (cj.contains("input")) c.corpus_input = resolve(cj["input"].get<std::string>(), base_dir);
    if (cj.contains("format")) c.format = corpus::parse_format(cj["format"].get<std::string>());
    c.min_clauses = cj.value("min_clauses", c.min_clauses);
    c.top_types = cj.value("top_types", c.top_types);
    if (cj.contains("ratios")) c.ratios = cj["ratios"].get<std::array<double, 3>>();
    c.split_seed = cj.value("split_seed", c.split_seed);
  }
  if (j.contains("encoder")) {
    const auto& ej = j["encoder"];
    if (ej.contains("kind")) c.encoder.kind = embedding::parse_encoder_kind(ej["kind"].get<std::string>());
    c.encoder.dim = ej.value("dim", c.encoder.dim);
    c.encoder.seed = ej.value("seed", c.encoder.seed);
    if (ej.contains("file")) c.encoder.file = resolve(ej["file"].get<std::string>(), base_dir);
  }
  if (j.contains("index")) {
    const auto& ij = j["index"];
    c.index.M = ij.value("M", c.index.M);
    c.index.ef_construction = ij.value("ef_construction", c.index.ef_construction);
    c.index.ef_search = ij.value("ef_search", c.index.ef_search);
    c.index.seed = ij.value("seed", c.index.seed);
  }
  c.k = j.value("k", c.k);
  if (j.contains("strategy")) c.strategy = strategy::parse_strategy(j["strategy"].get<std::string>());
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  if (j.contains("model")) {
    auto mj = j["model"];
    if (mj.contains("context_dim")) c.context_dim = mj["context_dim"].get<int>();
    c.model = decoder::config_from_json(mj.dump());
  }
  if (j.contains("train")) c.train = decoder::train_config_from_json(j["train"].dump());
  if (j.contains("decode")) {
    const auto& dj = j["decode"];
    if (dj.contains("mode")) c.decode.mode = parse_decode_mode(dj["mode"].get<std::string>());
    c.decode.beam_size = dj.value("beam_size", c.decode.beam_size);
    c.decode.max_len = dj.value("max_len", c.decode.max_len);
  }
  c.eval_part = j.value("eval_part", c.eval_part);
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  try {
    return run_config_from_json(read_text(path), fs::absolute(path).parent_path());
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
}

std::string run_config_to_json(const RunConfig& c) {
  json model = decoder_json(c.model);
  if (c.context_dim) {
    model["context_dim"] = *c.context_dim;
  } else {
    model.erase("context_dim");
  }
  model.erase("vocab_size");
  const json j = {
      {"workspace", c.workspace.string()},
      {"corpus",
       {{"input", c.corpus_input.string()},
        {"format", format_name(c.format)},
        {"min_clauses", c.min_clauses},
        {"top_types", c.top_types},
        {"ratios", c.ratios},
        {"split_seed", c.split_seed}}},
      {"encoder",
       {{"kind", encoder_kind_name(c.encoder.kind)},
        {"dim", c.encoder.dim},
        {"seed", c.encoder.seed},
        {"file", c.encoder.file.string()}}},
      {"index",
       {{"M", c.index.M},
        {"ef_construction", c.index.ef_construction},
        {"ef_search", c.index.ef_search},
        {"seed", c.index.seed}}},
      {"k", c.k},
      {"strategy", std::string(strategy::name(c.strategy))},
      {"vocab_size", c.vocab_size},
      {"model", model},
      {"train", json::parse(decoder::train_config_to_json(c.train))},
      {"decode",
       {{"mode", decode_mode_name(c.decode.mode)},
        {"beam_size", c.decode.beam_size},
        {"max_len", c.decode.max_len}}},
      {"eval_part", c.eval_part}};
  return j.dump(2);
}

fs::path default_workspace(const std::optional<fs::path>& flag) {
  if (flag && !flag->empty()) return *flag;
  if (const char* env = std::getenv("CLAUSEFORGE_DIR"); env && *env) return env;
  return "clauseforge-work";
}

corpus::CorpusDir prepare_corpus(std::vector<corpus::Contract> contracts, std::size_t min_clauses,
                                 std::size_t top_types, std::array<double, 3> ratios,
                                 std::uint64_t seed) {
  auto filtered = corpus::filter_corpus(std::move(contracts), min_clauses, top_types);
  corpus::CorpusDir out;
  out.split = corpus::split(filtered.contracts, ratios, seed);
  out.contracts = std::move(filtered.contracts);
  out.catalog = std::move(filtered.catalog);
  return out;
}

void write_corpus_dir(const fs::path& dir, const corpus::CorpusDir& c) {
  fs::create_directories(dir);
  corpus::write_contract_jsonl(dir / "corpus.jsonl", c.contracts);
  corpus::write_catalog(dir / "catalog.json", c.catalog);
  corpus::write_split(dir / "split.json", c.split);
}

std::vector<std::string> vocab_texts(const corpus::CorpusDir& c) {
  const corpus::CorpusView view(c.contracts);
  std::vector<std::string> texts;
  for (const auto& ex : corpus::make_examples(c.contracts, c.split.train, c.catalog)) {
    texts.push_back(view.clause(ex.target_clause_id).text);
  }
  if (texts.empty()) throw ConfigError("no training clauses of the selected types");
  return texts;
}

std::vector<decoder::Sequence> make_sequences(const corpus::CorpusDir& c,
                                              const representation::RepCache& cache,
                                              strategy::Strategy s, const std::string& part,
                                              const tokenizer::Vocab& vocab) {
  if (!cache.has(s)) {
    throw ConfigError("representation cache has no contexts for " + std::string(strategy::name(s)));
  }
  const corpus::CorpusView view(c.contracts);
  std::vector<decoder::Sequence> out;
  for (const auto& ex : cache.examples_in(part)) {
    const auto ctx = cache.context(s, ex.example_id);
    out.push_back({ex.example_id, vocab.encode(view.clause(ex.example_id).text),
                   std::vector<float>(ctx.begin(), ctx.end())});
  }
  return out;
}

std::vector<metrics::ScoredOutput> generate_outputs(
    decoder::DecoderModel& model, const tokenizer::Vocab& vocab, const corpus::CorpusDir& c,
    const representation::RepCache& cache, strategy::Strategy s, const std::string& part,
    const decoder::DecodeOptions& options, const std::optional<std::string>& example_id) {
  if (!cache.has(s)) {
    throw ConfigError("representation cache has no contexts for " + std::string(strategy::name(s)));
  }
  const auto want = static_cast<std::size_t>(model.config().context_dim);
  if (want != strategy::out_dim(s, cache.dim)) {
    throw ConfigError(fmt::format("checkpoint expects {}-dim contexts, {} gives {}", want,
                                  strategy::name(s), strategy::out_dim(s, cache.dim)));
  }
  std::vector<representation::CachedExample> examples;
  if (example_id) {
    for (const auto& ex : cache.examples) {
      if (ex.example_id == *example_id) examples.push_back(ex);
    }
    if (examples.empty()) throw Error("unknown example id: " + *example_id);
  } else {
    examples = cache.examples_in(part);
  }
  const corpus::CorpusView view(c.contracts);
  std::vector<metrics::ScoredOutput> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    const auto ids = decoder::generate(model, cache.context(s, ex.example_id), options);
    out.push_back({ex.example_id, ex.clause_type, vocab.decode(ids),
                   tokenizer::normalize(view.clause(ex.example_id).text)});
  }
  return out;
}

void write_outputs(const fs::path& path, const std::vector<metrics::ScoredOutput>& outputs) {
  std::string text;
  for (const auto& o : outputs) {
    text += json{{"example_id", o.example_id},
                 {"clause_type", o.clause_type},
                 {"generated", o.generated},
                 {"target", o.target}}
                .dump() +
            "\n";
  }
  write_text(path, text);
}

std::vector<metrics::ScoredOutput> read_outputs(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<metrics::ScoredOutput> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      out.push_back({j.at("example_id").get<std::string>(), j.at("clause_type").get<std::string>(),
                     j.at("generated").get<std::string>(), j.at("target").get<std::string>()});
    } catch (const json::exception& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return out;
}

metrics::MetricReport write_evaluation(const fs::path& dir,
                                       const std::vector<metrics::ScoredOutput>& outputs,
                                       const std::string& title) {
  if (outputs.empty()) throw Error("no outputs to evaluate");
  const auto report = metrics::aggregate_report(outputs);
  write_text(dir / "report.json", metrics::report_json(report) + "\n");
  write_text(dir / "report.txt", metrics::render_table(report, title));
  write_text(dir / "length_stats.json", metrics::length_stats_json(metrics::length_stats(outputs)) + "\n");
  write_text(dir / "lengths.csv", metrics::length_pairs_csv(outputs));
  return report;
}

std::string dump_embeddings(const std::vector<metrics::ScoredOutput>& outputs,
                            const embedding::EncoderSpec& spec) {
  if (spec.kind != embedding::EncoderKind::HashDeterministic) {
    throw ConfigError("dump-embeddings needs the hash encoder (generated text has no external vectors)");
  }
  std::string out = "id,kind";
  for (std::uint32_t i = 0; i < spec.dim; ++i) out += fmt::format(",e{}", i);
  out += '\n';
  auto row = [&](const std::string& id, const char* kind, const std::string& text) {
    embedding::Embedding v(spec.dim, 0.0f);
    if (!embedding::encoder_tokens(text).empty()) v = embedding::encode(spec, text);
    out += id;
    out += ',';
    out += kind;
    for (float x : v) out += fmt::format(",{}", x);
    out += '\n';
  };
  for (const auto& o : outputs) {
    row(o.example_id, "actual", o.target);
    row(o.example_id, "generated", o.generated);
  }
  return out;
}

void save_trained(const fs::path& dir, const decoder::DecoderModel& model,
                  const tokenizer::Vocab& vocab, strategy::Strategy s,
                  const decoder::TrainConfig& train, const decoder::TrainResult& result) {
  json meta = {{"strategy", std::string(strategy::name(s))},
               {"train", json::parse(decoder::train_config_to_json(train))},
               {"initial_loss", result.initial_loss},
               {"best_epoch", result.best_epoch},
               {"optimizer_steps", result.optimizer_steps},
               {"dropped_too_long", result.dropped_too_long}};
  if (result.best_valid_loss) meta["best_valid_loss"] = *result.best_valid_loss;
  decoder::save_checkpoint(model, dir, meta.dump());
  vocab.save(dir / "vocab");
  json curve = json::array();
  for (const auto& e : result.curve) {
    json row = {{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"lr", e.lr}};
    if (e.valid_loss) row["valid_loss"] = *e.valid_loss;
    curve.push_back(row);
  }
  write_text(dir / "train_log.json", curve.dump(2) + "\n");
}

strategy::Strategy checkpoint_strategy(const fs::path& dir) {
  const auto meta = json::parse(decoder::checkpoint_metadata(dir));
  if (!meta.contains("strategy")) throw FormatError("checkpoint " + dir.string() + " records no strategy");
  return strategy::parse_strategy(meta["strategy"].get<std::string>());
}

TrainOutcome train_strategy(const corpus::CorpusDir& c, const representation::RepCache& cache,
                            strategy::Strategy s, const tokenizer::Vocab& vocab,
                            decoder::DecoderConfig model_config,
                            const decoder::TrainConfig& train_config, std::ostream* log) {
  model_config.vocab_size = static_cast<int>(vocab.size());
  model_config.context_dim = static_cast<int>(strategy::out_dim(s, cache.dim));
  decoder::DecoderModel model(model_config);
  auto train_set = make_sequences(c, cache, s, "train", vocab);
  auto valid_set = make_sequences(c, cache, s, "valid", vocab);
  auto result = decoder::train(model, std::move(train_set), std::move(valid_set), train_config,
                               [&](const decoder::EpochLog& e) {
                                 if (!log) return;
                                 *log << fmt::format("  epoch {:>3}  train {:.4f}", e.epoch, e.train_loss);
                                 if (e.valid_loss) *log << fmt::format("  valid {:.4f}", *e.valid_loss);
                                 *log << fmt::format("  lr {:.3g}\n", e.lr);
                               });
  if (log && result.dropped_too_long > 0) {
    *log << fmt::format("  dropped {} examples longer than max_len\n", result.dropped_too_long);
  }
  model.round_to_float();
  return {std::move(model), std::move(result)};
}

RunResult run_pipeline(RunConfig config, std::ostream& log) {
  config.validate();
  if (config.corpus_input.empty()) throw ConfigError("run: no corpus input configured");
  const fs::path ws = config.workspace.empty() ? default_workspace({}) : config.workspace;
  fs::create_directories(ws);
  Manifest manifest(ws / "manifest.json");
  write_text(ws / "run_config.json", run_config_to_json(config) + "\n");

  const auto s = config.strategy;
  auto load_corpus = [&] { return corpus::read_corpus_dir(ws / "corpus"); };
  auto load_store = [&] { return embedding::store_read(ws / "embeddings.creb", config.encoder.dim); };

  struct Stage {
    std::string name;
    std::string fingerprint;
    std::vector<std::string> outputs;
    std::function<void()> run;
  };
  std::vector<Stage> stages;

  {
    Fingerprint fp;
    fp.add("ingest").add(sha256_file(config.corpus_input)).add(format_name(config.format));
    fp.add(config.min_clauses).add(config.top_types).add(config.split_seed);
    for (double r : config.ratios) fp.add(fmt::format("{:.17g}", r));
    stages.push_back({"ingest", fp.hex(), {"corpus"}, [&] {
                        auto contracts = corpus::ingest(config.corpus_input, config.format);
                        const auto c = prepare_corpus(std::move(contracts), config.min_clauses,
                                                      config.top_types, config.ratios, config.split_seed);
                        log << fmt::format("  {} contracts, {} selected types, split {}/{}/{}\n",
                                           c.contracts.size(), c.catalog.selected.size(),
                                           c.split.train.size(), c.split.valid.size(), c.split.test.size());
                        write_corpus_dir(ws / "corpus", c);
                      }});
  }
  {
    Fingerprint fp;
    fp.add("embed").add(config.encoder.describe());
    if (config.encoder.kind == embedding::EncoderKind::ExternalFile) fp.add(sha256_file(config.encoder.file));
    stages.push_back({"embed", fp.hex(), {"embeddings.creb"}, [&] {
                        const auto c = load_corpus();
                        const auto store = config.encoder.kind == embedding::EncoderKind::HashDeterministic
                                               ? embedding::embed_corpus(config.encoder, c.contracts)
                                               : embedding::load_external(config.encoder, c.contracts);
                        embedding::store_write(store, ws / "embeddings.creb");
                        log << fmt::format("  {} clause embeddings, dim {}\n", store.size(), store.dim());
                      }});
  }
  {
    Fingerprint fp;
    fp.add("index").add(config.index.M).add(config.index.ef_construction);
    fp.add(config.index.ef_search).add(config.index.seed);
    stages.push_back({"index", fp.hex(), {"index.hnsw"}, [&] {
                        const auto c = load_corpus();
                        const auto idx = representation::build_contract_index(c, load_store(), config.index);
                        idx.save(ws / "index.hnsw");
                        log << fmt::format("  {} train contracts indexed\n", idx.size());
                      }});
  }
  {
    Fingerprint fp;
    fp.add("reps").add(config.k).add(strategy::name(s));
    stages.push_back({"reps", fp.hex(), {"reps"}, [&] {
                        const auto c = load_corpus();
                        const auto store = load_store();
                        const auto idx = simindex::HnswIndex::load(ws / "index.hnsw");
                        const auto cache = representation::cache_build(
                            {c, store, config.k, {s}, &idx, config.index});
                        fs::remove_all(ws / "reps");
                        representation::cache_write(cache, ws / "reps");
                        log << fmt::format("  {} examples, {} clause-sim fallbacks\n",
                                           cache.examples.size(), cache.fallbacks.at(s));
                      }});
  }
  {
    Fingerprint fp;
    fp.add("vocab").add(config.vocab_size);
    stages.push_back({"vocab", fp.hex(), {"vocab"}, [&] {
                        const auto vocab = tokenizer::train_vocab(vocab_texts(load_corpus()), config.vocab_size);
                        vocab.save(ws / "vocab");
                        log << fmt::format("  vocabulary of {} tokens\n", vocab.size());
                      }});
  }
  {
    Fingerprint fp;
    fp.add("train").add(decoder::config_to_json(config.model));
    fp.add(decoder::train_config_to_json(config.train)).add(strategy::name(s));
    stages.push_back({"train", fp.hex(), {"model"}, [&] {
                        const auto c = load_corpus();
                        const auto store = load_store();
                        const auto cache = representation::cache_load(
                            ws / "reps", representation::cache_fingerprint(c, store, config.k, config.index));
                        const auto vocab = tokenizer::Vocab::load(ws / "vocab");
                        auto outcome = train_strategy(c, cache, s, vocab, config.model, config.train, &log);
                        fs::remove_all(ws / "model");
                        save_trained(ws / "model", outcome.model, vocab, s, config.train, outcome.result);
                      }});
  }
  {
    Fingerprint fp;
    fp.add("generate").add(decode_mode_name(config.decode.mode));
    fp.add(static_cast<std::uint64_t>(config.decode.beam_size));
    fp.add(static_cast<std::uint64_t>(config.decode.max_len)).add(config.eval_part);
    stages.push_back({"generate", fp.hex(), {"outputs.jsonl"}, [&] {
                        const auto c = load_corpus();
                        const auto cache = representation::cache_load(ws / "reps");
                        auto model = decoder::load_checkpoint(ws / "model");
                        const auto vocab = tokenizer::Vocab::load(ws / "model" / "vocab");
                        const auto outputs = generate_outputs(model, vocab, c, cache, s,
                                                              config.eval_part, config.decode);
                        write_outputs(ws / "outputs.jsonl", outputs);
                        log << fmt::format("  {} clauses generated\n", outputs.size());
                      }});
  }
  stages.push_back({"evaluate", Fingerprint().add("evaluate").hex(), {"eval"}, [&] {
                      write_evaluation(ws / "eval", read_outputs(ws / "outputs.jsonl"),
                                       std::string(strategy::name(s)));
                    }});

  RunResult result;
  bool upstream_ran = false;
  for (auto& stage : stages) {
    std::string reason = upstream_ran ? "upstream stage ran"
                                      : manifest.stale_reason(stage.name, stage.fingerprint, ws, stage.outputs);
    StageStatus status{stage.name, !reason.empty(), reason};
    if (reason.empty()) {
      log << fmt::format("[{}] up to date\n", stage.name);
    } else {
      log << fmt::format("[{}] running ({})\n", stage.name, reason);
      try {
        stage.run();
      } catch (const std::exception& e) {
        throw Error("stage " + stage.name + " failed: " + e.what());
      }
      manifest.record(stage.name, stage.fingerprint, ws, stage.outputs);
      upstream_ran = true;
    }
    result.stages.push_back(std::move(status));
  }
  result.report = metrics::report_from_json(read_text(ws / "eval" / "report.json"));
  return result;
}

std::vector<AblationRow> ablate_k(RunConfig config, std::vector<std::size_t> ks, std::ostream& log) {
  if (ks.empty()) throw ConfigError("ablate-k: no k values given");
  for (auto k : ks) {
    if (k < simindex::kMinK) {
      throw ConfigError("ablate-k: k = " + std::to_string(k) + " is below the minimum of " +
                        std::to_string(simindex::kMinK));
    }
  }
  std::vector<std::size_t> unique;
  for (auto k : ks) {
    if (std::find(unique.begin(), unique.end(), k) != unique.end()) {
      log << fmt::format("warning: duplicate k = {} ignored\n", k);
    } else {
      unique.push_back(k);
    }
  }
  config.validate();
  const fs::path ws = config.workspace.empty() ? default_workspace({}) : config.workspace;
  std::vector<AblationRow> rows;
  for (auto k : unique) {
    RunConfig sub = config;
    sub.k = k;
    sub.workspace = ws / "ablate-k" / ("k" + std::to_string(k));
    log << fmt::format("== k = {}\n", k);
    const auto run = run_pipeline(sub, log);
    const auto cache = representation::cache_load(sub.workspace / "reps");
    rows.push_back({k, run.report.overall, cache.fallbacks.count(sub.strategy) ? cache.fallbacks.at(sub.strategy) : 0});
  }
  write_text(ws / "ablate-k" / "ablation.txt", render_ablation(rows, config.strategy));
  return rows;
}

std::string render_ablation(const std::vector<AblationRow>& rows, strategy::Strategy s) {
  std::string out = fmt::format("k ablation for {}\n", strategy::name(s));
  out += fmt::format("{:>4} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>10}\n", "k", "ROUGE-1", "ROUGE-2",
                     "ROUGE-L", "BLEU-1", "BLEU-2", "BLEU", "fallbacks");
  for (const auto& r : rows) {
    out += fmt::format("{:>4} {:>8.2f} {:>8.2f} {:>8.2f} {:>8.2f} {:>8.2f} {:>8.2f} {:>10}\n", r.k,
                       r.overall.rouge1, r.overall.rouge2, r.overall.rougeL, r.overall.bleu1,
                       r.overall.bleu2, r.overall.bleu, r.fallbacks);
  }
  return out;
}

}  // namespace clauseforge::pipeline
