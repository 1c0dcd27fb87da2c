#include "clauseforge/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "clauseforge/errors.hpp"
#include "clauseforge/hashing.hpp"

namespace clauseforge::corpus {

using json = nlohmann::json;

namespace {

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

const json& require(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw SchemaError("line " + std::to_string(line) + ": missing key \"" + key + "\"");
  }
  return *it;
}

std::string require_string(const json& obj, const char* key, std::size_t line) {
  const auto& v = require(obj, key, line);
  if (!v.is_string()) {
    throw SchemaError("line " + std::to_string(line) + ": \"" + key + "\" must be a string");
  }
  return v.get<std::string>();
}

json parse_line(const std::string& line, std::size_t line_no) {
  try {
    auto obj = json::parse(line);
    if (!obj.is_object()) throw ParseError("record is not a JSON object", line_no);
    return obj;
  } catch (const json::parse_error& e) {
    throw ParseError(e.what(), line_no);
  }
}

Clause make_clause(std::string clause_id, std::string contract_id, std::string type,
                   std::string text, std::size_t line_no) {
  if (is_blank(text)) {
    throw SchemaError("line " + std::to_string(line_no) + ": clause " + clause_id +
                      " has empty text");
  }
  Clause c;
  c.clause_id = std::move(clause_id);
  c.contract_id = std::move(contract_id);
  c.clause_type = lowercase(type);
  c.token_len = whitespace_token_count(text);
  c.text = std::move(text);
  return c;
}

void check_unique_ids(const std::vector<Contract>& contracts) {
  std::set<std::string_view> contract_ids;
  std::set<std::string_view> clause_ids;
  for (const auto& c : contracts) {
    if (!contract_ids.insert(c.contract_id).second) {
      throw SchemaError("duplicate contract_id " + c.contract_id);
    }
    for (const auto& cl : c.clauses) {
      if (!clause_ids.insert(cl.clause_id).second) {
        throw SchemaError("duplicate clause_id " + cl.clause_id);
      }
    }
  }
}

// Fisher-Yates with an explicit bounded draw so the permutation does not
// depend on the standard library's distribution implementations.
template <typename T>
void seeded_shuffle(std::vector<T>& items, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::uint64_t bound = i;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r;
    do {
      r = rng();
    } while (r >= limit);
    std::swap(items[i - 1], items[r % bound]);
  }
}

}  // namespace

Format parse_format(const std::string& name) {
  if (name == "contract" || name == "contract-jsonl") return Format::ContractJsonl;
  if (name == "provision" || name == "provision-jsonl") return Format::ProvisionJsonl;
  throw ConfigError("unknown corpus format: " + name);
}

std::size_t whitespace_token_count(std::string_view text) {
  std::size_t n = 0;
  bool in_token = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++n;
    }
  }
  return n;
}

std::string lowercase(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<Contract> read_contract_jsonl(std::istream& in) {
  std::vector<Contract> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    const auto obj = parse_line(line, line_no);
    Contract contract;
    contract.contract_id = require_string(obj, "contract_id", line_no);
    const auto& clauses = require(obj, "clauses", line_no);
    if (!clauses.is_array()) {
      throw SchemaError("line " + std::to_string(line_no) + ": \"clauses\" must be an array");
    }
    for (const auto& c : clauses) {
      if (!c.is_object()) {
        throw SchemaError("line " + std::to_string(line_no) + ": clause must be an object");
      }
      contract.clauses.push_back(make_clause(require_string(c, "clause_id", line_no),
                                             contract.contract_id,
                                             require_string(c, "type", line_no),
                                             require_string(c, "text", line_no), line_no));
    }
    out.push_back(std::move(contract));
  }
  check_unique_ids(out);
  return out;
}

std::vector<Contract> read_provision_jsonl(std::istream& in) {
  std::vector<Contract> out;
  std::unordered_map<std::string, std::size_t> slot;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    const auto obj = parse_line(line, line_no);
    auto contract_id = require_string(obj, "contract_id", line_no);
    auto text = require_string(obj, "provision", line_no);
    const auto& label = require(obj, "label", line_no);

    std::vector<std::string> labels;
    if (label.is_string()) {
      labels.push_back(label.get<std::string>());
    } else if (label.is_array()) {
      for (const auto& l : label) {
        if (!l.is_string()) {
          throw SchemaError("line " + std::to_string(line_no) + ": labels must be strings");
        }
        labels.push_back(l.get<std::string>());
      }
    } else {
      throw SchemaError("line " + std::to_string(line_no) +
                        ": \"label\" must be a string or an array of strings");
    }

    auto [it, inserted] = slot.try_emplace(contract_id, out.size());
    if (inserted) out.push_back(Contract{contract_id, {}});
    auto& contract = out[it->second];
    // Multi-label provisions become one clause per label.
    for (const auto& l : labels) {
      auto id = contract_id + "/" + std::to_string(contract.clauses.size());
      contract.clauses.push_back(make_clause(std::move(id), contract_id, l, text, line_no));
    }
  }
  check_unique_ids(out);
  return out;
}

std::vector<Contract> ingest(const std::filesystem::path& path, Format format) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus file " + path.string());
  return format == Format::ContractJsonl ? read_contract_jsonl(in) : read_provision_jsonl(in);
}

void write_contract_jsonl(std::ostream& out, const std::vector<Contract>& contracts) {
  for (const auto& c : contracts) {
    json clauses = json::array();
    for (const auto& cl : c.clauses) {
      clauses.push_back({{"clause_id", cl.clause_id}, {"type", cl.clause_type}, {"text", cl.text}});
    }
    json obj = {{"contract_id", c.contract_id}, {"clauses", std::move(clauses)}};
    out << obj.dump() << '\n';
  }
}

void write_contract_jsonl(const std::filesystem::path& path,
                          const std::vector<Contract>& contracts) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_contract_jsonl(out, contracts);
}

bool ClauseTypeCatalog::contains(const std::string& clause_type) const {
  return std::any_of(selected.begin(), selected.end(),
                     [&](const TypeStats& s) { return s.clause_type == clause_type; });
}

std::vector<std::string> ClauseTypeCatalog::types() const {
  std::vector<std::string> out;
  out.reserve(selected.size());
  for (const auto& s : selected) out.push_back(s.clause_type);
  return out;
}

FilterResult filter_corpus(std::vector<Contract> contracts, std::size_t min_clauses,
                           std::size_t top_k_types) {
  if (min_clauses < 1 || top_k_types < 1) {
    throw ConfigError("filter_corpus: min_clauses and top_k_types must be >= 1");
  }
  std::erase_if(contracts, [&](const Contract& c) { return c.clauses.size() < min_clauses; });

  struct Acc {
    std::size_t count = 0;
    double sum = 0.0;
    double sum_sq = 0.0;
  };
  std::map<std::string, Acc> acc;
  for (const auto& c : contracts) {
    for (const auto& cl : c.clauses) {
      auto& a = acc[cl.clause_type];
      const auto len = static_cast<double>(cl.token_len);
      ++a.count;
      a.sum += len;
      a.sum_sq += len * len;
    }
  }

  std::vector<TypeStats> stats;
  stats.reserve(acc.size());
  for (const auto& [type, a] : acc) {
    const double n = static_cast<double>(a.count);
    const double mean = a.sum / n;
    const double var = std::max(0.0, a.sum_sq / n - mean * mean);
    stats.push_back({type, a.count, mean, std::sqrt(var)});
  }
  std::stable_sort(stats.begin(), stats.end(), [](const TypeStats& a, const TypeStats& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.clause_type < b.clause_type;
  });
  if (stats.size() > top_k_types) stats.resize(top_k_types);
  return {std::move(contracts), ClauseTypeCatalog{std::move(stats)}};
}

CorpusSplit split(const std::vector<Contract>& contracts, std::array<double, 3> ratios,
                  std::uint64_t seed) {
  double total = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0)) throw ConfigError("split ratios must be positive");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  const std::size_t n = contracts.size();
  if (n < ratios.size()) {
    throw ConfigError("cannot split " + std::to_string(n) + " contracts into " +
                      std::to_string(ratios.size()) + " non-empty parts");
  }

  // Largest-remainder apportionment, then make sure no part is empty.
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> frac{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double exact = ratios[i] * static_cast<double>(n);
    sizes[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    frac[i] = exact - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t i = 0; assigned < n; i = (i + 1) % 3, ++assigned) ++sizes[order[i]];
  for (auto& s : sizes) {
    if (s == 0) {
      auto largest = std::max_element(sizes.begin(), sizes.end());
      --*largest;
      s = 1;
    }
  }

  std::vector<std::string> ids;
  ids.reserve(n);
  for (const auto& c : contracts) ids.push_back(c.contract_id);
  std::sort(ids.begin(), ids.end());
  seeded_shuffle(ids, seed);

  CorpusSplit out;
  out.seed = seed;
  out.ratios = ratios;
  const std::array<std::vector<std::string>*, 3> parts{&out.train, &out.valid, &out.test};
  auto it = ids.begin();
  for (std::size_t i = 0; i < 3; ++i) {
    const auto take = static_cast<std::ptrdiff_t>(sizes[i]);
    parts[i]->assign(it, it + take);
    std::sort(parts[i]->begin(), parts[i]->end());
    it += take;
  }
  return out;
}

std::vector<Example> make_examples(const std::vector<Contract>& contracts,
                                   const std::vector<std::string>& part,
                                   const ClauseTypeCatalog& catalog) {
  const std::set<std::string> members(part.begin(), part.end());
  std::vector<Example> out;
  for (const auto& c : contracts) {
    if (!members.contains(c.contract_id)) continue;
    for (const auto& cl : c.clauses) {
      if (catalog.contains(cl.clause_type)) out.push_back({c.contract_id, cl.clause_id});
    }
  }
  return out;
}

CorpusView::CorpusView(const std::vector<Contract>& contracts) : contracts_(&contracts) {
  for (std::size_t i = 0; i < contracts.size(); ++i) {
    by_contract_.emplace(contracts[i].contract_id, i);
    for (std::size_t j = 0; j < contracts[i].clauses.size(); ++j) {
      by_clause_.emplace(contracts[i].clauses[j].clause_id, std::make_pair(i, j));
    }
  }
}

const Contract& CorpusView::contract(const std::string& contract_id) const {
  auto it = by_contract_.find(contract_id);
  if (it == by_contract_.end()) throw Error("unknown contract_id " + contract_id);
  return (*contracts_)[it->second];
}

const Clause& CorpusView::clause(const std::string& clause_id) const {
  auto it = by_clause_.find(clause_id);
  if (it == by_clause_.end()) throw Error("unknown clause_id " + clause_id);
  return (*contracts_)[it->second.first].clauses[it->second.second];
}

bool CorpusView::has_contract(const std::string& contract_id) const {
  return by_contract_.contains(contract_id);
}

void write_catalog(const std::filesystem::path& path, const ClauseTypeCatalog& catalog) {
  json arr = json::array();
  for (const auto& s : catalog.selected) {
    arr.push_back({{"type", s.clause_type},
                   {"count", s.count},
                   {"mean_len", s.mean_len},
                   {"std_len", s.std_len}});
  }
  std::ofstream(path) << json{{"selected_types", arr}}.dump(2) << '\n';
}

ClauseTypeCatalog read_catalog(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  const auto obj = json::parse(in);
  ClauseTypeCatalog out;
  for (const auto& s : obj.at("selected_types")) {
    out.selected.push_back({s.at("type").get<std::string>(), s.at("count").get<std::size_t>(),
                            s.at("mean_len").get<double>(), s.at("std_len").get<double>()});
  }
  return out;
}

void write_split(const std::filesystem::path& path, const CorpusSplit& split) {
  json obj = {{"seed", split.seed},
              {"ratios", split.ratios},
              {"train", split.train},
              {"valid", split.valid},
              {"test", split.test}};
  std::ofstream(path) << obj.dump(2) << '\n';
}

CorpusSplit read_split(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  const auto obj = json::parse(in);
  CorpusSplit out;
  out.seed = obj.at("seed").get<std::uint64_t>();
  out.ratios = obj.at("ratios").get<std::array<double, 3>>();
  out.train = obj.at("train").get<std::vector<std::string>>();
  out.valid = obj.at("valid").get<std::vector<std::string>>();
  out.test = obj.at("test").get<std::vector<std::string>>();
  return out;
}

CorpusDir read_corpus_dir(const std::filesystem::path& dir) {
  CorpusDir out;
  out.contracts = ingest(dir / "corpus.jsonl", Format::ContractJsonl);
  out.catalog = read_catalog(dir / "catalog.json");
  if (std::filesystem::exists(dir / "split.json")) out.split = read_split(dir / "split.json");
  return out;
}

std::string corpus_fingerprint(const std::vector<Contract>& contracts) {
  std::ostringstream os;
  write_contract_jsonl(os, contracts);
  return sha256_hex(os.str());
}

}  // namespace clauseforge::corpus
