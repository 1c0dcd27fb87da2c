#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "clauseforge/errors.hpp"
#include "clauseforge/pipeline.hpp"
#include "clauseforge/synthetic.hpp"

namespace py = pybind11;
using namespace clauseforge;
namespace fs = std::filesystem;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vec(const DoubleArray& a) {
  if (a.ndim() != 1) throw ConfigError("expected a 1-d array");
  return {a.data(), a.data() + a.size()};
}

py::array_t<float> store_matrix(const embedding::EmbeddingStore& store) {
  py::array_t<float> out({static_cast<py::ssize_t>(store.size()), static_cast<py::ssize_t>(store.dim())});
  auto* dst = out.mutable_data();
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto v = store.at(i);
    std::copy(v.begin(), v.end(), dst + i * store.dim());
  }
  return out;
}

py::dict row_dict(const metrics::MetricRow& r) {
  py::dict d;
  d["label"] = r.label;
  d["count"] = r.count;
  d["rouge1"] = r.rouge1;
  d["rouge2"] = r.rouge2;
  d["rougeL"] = r.rougeL;
  d["bleu1"] = r.bleu1;
  d["bleu2"] = r.bleu2;
  d["bleu"] = r.bleu;
  return d;
}

py::dict report_dict(const metrics::MetricReport& rep) {
  py::dict d;
  py::list per_type;
  for (const auto& r : rep.per_type) per_type.append(row_dict(r));
  d["per_type"] = per_type;
  d["overall"] = row_dict(rep.overall);
  return d;
}

std::vector<metrics::ScoredOutput> to_outputs(const std::vector<std::tuple<std::string, std::string, std::string, std::string>>& rows) {
  std::vector<metrics::ScoredOutput> out;
  for (const auto& [id, type, gen, target] : rows) out.push_back({id, type, gen, target});
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Clause generation from contract context";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<SchemaError>(m, "SchemaError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<StaleCacheError>(m, "StaleCacheError", base.ptr());

  // Corpus.
  m.def(
      "write_synthetic_corpus",
      [](const fs::path& path, std::size_t contracts, std::uint64_t seed) {
        synthetic::Options o;
        o.contracts = contracts;
        o.seed = seed;
        corpus::write_contract_jsonl(path, synthetic::generate(o));
      },
      py::arg("path"), py::arg("contracts") = 300, py::arg("seed") = 7);
  m.def(
      "ingest",
      [](const fs::path& input, const fs::path& out, const std::string& format, std::size_t min_clauses,
         std::size_t top_types, std::array<double, 3> ratios, std::uint64_t seed) {
        const auto c = pipeline::prepare_corpus(corpus::ingest(input, corpus::parse_format(format)), min_clauses,
                                                top_types, ratios, seed);
        pipeline::write_corpus_dir(out, c);
        py::dict d;
        d["contracts"] = c.contracts.size();
        d["types"] = c.catalog.types();
        d["train"] = c.split.train;
        d["valid"] = c.split.valid;
        d["test"] = c.split.test;
        return d;
      },
      py::arg("input"), py::arg("out"), py::arg("format") = "contract", py::arg("min_clauses") = 5,
      py::arg("top_types") = 15, py::arg("ratios") = std::array<double, 3>{0.8, 0.1, 0.1}, py::arg("seed") = 7,
      "Parse, filter and split a JSONL corpus into a corpus directory.");

  // Embeddings.
  m.def(
      "hash_encode",
      [](const std::string& text, std::uint32_t dim, std::uint64_t seed) {
        const auto v = embedding::encode({embedding::EncoderKind::HashDeterministic, dim, seed, {}}, text);
        return py::array_t<float>(static_cast<py::ssize_t>(v.size()), v.data());
      },
      py::arg("text"), py::arg("dim") = 768, py::arg("seed") = 0);
  m.def(
      "embed",
      [](const fs::path& corpus_dir, const fs::path& out, std::uint32_t dim, std::uint64_t seed) {
        const auto c = corpus::read_corpus_dir(corpus_dir);
        const auto store = embedding::embed_corpus({embedding::EncoderKind::HashDeterministic, dim, seed, {}}, c.contracts);
        embedding::store_write(store, out);
        return store.size();
      },
      py::arg("corpus_dir"), py::arg("out"), py::arg("dim") = 768, py::arg("seed") = 0,
      "Hash-encode every clause of a corpus directory into a CREB file.");
  m.def(
      "read_creb",
      [](const fs::path& path, std::uint32_t expected_dim) {
        std::vector<std::string> warnings;
        const auto store = embedding::store_read(path, expected_dim, &warnings);
        return py::make_tuple(store.ids(), store_matrix(store), warnings);
      },
      py::arg("path"), py::arg("expected_dim") = 0, "Returns (ids, float32 matrix, warnings).");
  m.def(
      "write_creb",
      [](const fs::path& path, const std::vector<std::string>& ids, const FloatArray& matrix) {
        if (matrix.ndim() != 2 || static_cast<std::size_t>(matrix.shape(0)) != ids.size()) {
          throw ConfigError("write_creb: matrix must be (len(ids), dim)");
        }
        const auto dim = static_cast<std::uint32_t>(matrix.shape(1));
        embedding::EmbeddingStore store(dim);
        for (std::size_t i = 0; i < ids.size(); ++i) store.add(ids[i], {matrix.data() + i * dim, dim});
        embedding::store_write(store, path);
      },
      py::arg("path"), py::arg("ids"), py::arg("matrix"));

  // Similarity index.
  py::class_<simindex::HnswIndex>(m, "HnswIndex")
      .def_static(
          "build",
          [](const std::vector<std::string>& ids, const DoubleArray& matrix, std::uint32_t M,
             std::uint32_t ef_construction, std::uint32_t ef_search, std::uint64_t seed) {
            if (matrix.ndim() != 2) throw ConfigError("HnswIndex.build: expected a 2-d array");
            std::vector<std::vector<double>> rows;
            const auto d = static_cast<std::size_t>(matrix.shape(1));
            for (py::ssize_t i = 0; i < matrix.shape(0); ++i) rows.emplace_back(matrix.data() + i * d, matrix.data() + (i + 1) * d);
            simindex::IndexParams p;
            p.M = M;
            p.ef_construction = ef_construction;
            p.ef_search = ef_search;
            p.seed = seed;
            return simindex::HnswIndex::build(ids, rows, p);
          },
          py::arg("ids"), py::arg("matrix"), py::arg("M") = 16, py::arg("ef_construction") = 200,
          py::arg("ef_search") = 64, py::arg("seed") = 42)
      .def_static("load", &simindex::HnswIndex::load)
      .def("save", &simindex::HnswIndex::save)
      .def("__len__", &simindex::HnswIndex::size)
      .def(
          "search",
          [](const simindex::HnswIndex& idx, const DoubleArray& q, std::size_t k, std::optional<std::string> exclude) {
            const auto v = to_vec(q);
            const auto hits = exclude ? idx.search(v, k, std::string_view(*exclude)) : idx.search(v, k);
            std::vector<std::pair<std::string, double>> out;
            for (const auto& h : hits) out.emplace_back(h.contract_id, h.distance);
            return out;
          },
          py::arg("query"), py::arg("k") = 6, py::arg("exclude") = py::none(),
          "Nearest (id, squared L2 distance) pairs.");

  // Strategies.
  m.def("strategies", [] {
    std::vector<std::string> out;
    for (auto s : strategy::kAllStrategies) out.emplace_back(strategy::name(s));
    return out;
  });
  m.def(
      "assemble",
      [](const std::string& name, const DoubleArray& contract, std::optional<DoubleArray> type,
         std::optional<DoubleArray> full_sim, std::optional<DoubleArray> clause_sim) {
        auto opt = [](const std::optional<DoubleArray>& a) {
          return a ? std::optional<std::vector<double>>(to_vec(*a)) : std::nullopt;
        };
        const auto v = strategy::assemble(strategy::parse_strategy(name), to_vec(contract), opt(type),
                                          opt(full_sim), opt(clause_sim));
        return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
      },
      py::arg("strategy"), py::arg("contract"), py::arg("clause_type") = py::none(),
      py::arg("full_sim") = py::none(), py::arg("clause_sim") = py::none());
  m.def(
      "build_reps",
      [](const fs::path& corpus_dir, const fs::path& embeddings, const fs::path& out, std::size_t k,
         const std::string& strategies) {
        const auto c = corpus::read_corpus_dir(corpus_dir);
        const auto store = embedding::store_read(embeddings);
        const auto cache = representation::cache_build({c, store, k, strategy::parse_strategy_list(strategies)});
        fs::remove_all(out);
        representation::cache_write(cache, out);
        return cache.examples.size();
      },
      py::arg("corpus_dir"), py::arg("embeddings"), py::arg("out"), py::arg("k") = 6, py::arg("strategies") = "all",
      "Precompute the representation cache; returns the number of examples.");

  // Tokenizer.
  py::class_<tokenizer::Vocab>(m, "Vocab")
      .def_static("load", &tokenizer::Vocab::load)
      .def("save", &tokenizer::Vocab::save)
      .def("__len__", &tokenizer::Vocab::size)
      .def("tokens", &tokenizer::Vocab::tokens)
      .def("encode", &tokenizer::Vocab::encode)
      .def("decode", [](const tokenizer::Vocab& v, const std::vector<tokenizer::TokenId>& ids) { return v.decode(ids); });
  m.def("train_vocab", &tokenizer::train_vocab, py::arg("texts"), py::arg("target_size") = tokenizer::kDefaultVocabSize);
  m.def("normalize", &tokenizer::normalize);

  // Metrics.
  m.def("rouge_n", [](const std::string& c, const std::string& r, int n) { return metrics::rouge_n(c, r, n).f1; },
        py::arg("candidate"), py::arg("reference"), py::arg("n") = 1);
  m.def(
      "rouge_l",
      [](const std::string& c, const std::string& r) {
        const auto s = metrics::rouge_l(c, r);
        return py::make_tuple(s.precision, s.recall, s.f1);
      },
      py::arg("candidate"), py::arg("reference"), "Returns (precision, recall, f1).");
  m.def(
      "bleu",
      [](const std::vector<std::string>& c, const std::vector<std::string>& r) {
        const auto b = metrics::bleu(c, r);
        py::dict d;
        d["bleu1"] = b.bleu1;
        d["bleu2"] = b.bleu2;
        d["bleu"] = b.bleu;
        return d;
      },
      py::arg("candidates"), py::arg("references"));
  m.def("pearson", &metrics::pearson);
  m.def(
      "evaluate",
      [](const std::vector<std::tuple<std::string, std::string, std::string, std::string>>& rows) {
        return report_dict(metrics::aggregate_report(to_outputs(rows)));
      },
      py::arg("outputs"), "Outputs are (example_id, clause_type, generated, target) tuples.");

  // End to end.
  m.def(
      "run_pipeline",
      [](const fs::path& config, std::optional<fs::path> workspace) {
        auto c = pipeline::load_run_config(config);
        if (workspace) c.workspace = *workspace;
        c.workspace = pipeline::default_workspace(c.workspace.empty() ? std::nullopt : std::optional<fs::path>(c.workspace));
        std::ostringstream log;
        const auto result = [&] {
          py::gil_scoped_release release;
          return pipeline::run_pipeline(c, log);
        }();
        py::dict d;
        py::list stages;
        for (const auto& s : result.stages) {
          py::dict sd;
          sd["name"] = s.name;
          sd["ran"] = s.ran;
          sd["reason"] = s.reason;
          stages.append(sd);
        }
        d["stages"] = stages;
        d["report"] = report_dict(result.report);
        d["log"] = log.str();
        return d;
      },
      py::arg("config"), py::arg("workspace") = py::none(),
      "Run every stage for a JSON run configuration, skipping up-to-date stages.");
}
