#include "clauseforge/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "clauseforge/errors.hpp"

namespace clauseforge::metrics {

namespace {

using Ngram = std::vector<std::string_view>;
using NgramCounts = std::map<Ngram, std::size_t>;

NgramCounts count_ngrams(const std::vector<std::string>& tokens, int n) {
  NgramCounts counts;
  const auto un = static_cast<std::size_t>(n);
  if (tokens.size() < un) return counts;
  for (std::size_t i = 0; i + un <= tokens.size(); ++i) {
    Ngram g(tokens.begin() + static_cast<std::ptrdiff_t>(i),
            tokens.begin() + static_cast<std::ptrdiff_t>(i + un));
    ++counts[g];
  }
  return counts;
}

std::size_t clipped_overlap(const NgramCounts& cand, const NgramCounts& ref) {
  std::size_t hit = 0;
  for (const auto& [g, c] : cand) {
    auto it = ref.find(g);
    if (it != ref.end()) hit += std::min(c, it->second);
  }
  return hit;
}

std::size_t total(const NgramCounts& counts) {
  std::size_t n = 0;
  for (const auto& [g, c] : counts) n += c;
  return n;
}

Prf make_prf(std::size_t overlap, std::size_t cand_total, std::size_t ref_total) {
  Prf out;
  if (cand_total == 0 || ref_total == 0) return out;
  const double p = static_cast<double>(overlap) / static_cast<double>(cand_total);
  const double r = static_cast<double>(overlap) / static_cast<double>(ref_total);
  out.precision = 100.0 * p;
  out.recall = 100.0 * r;
  out.f1 = (p + r) > 0.0 ? 100.0 * 2.0 * p * r / (p + r) : 0.0;
  return out;
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

SideStats side_stats(std::vector<double> v) {
  SideStats s;
  if (v.empty()) return s;
  const double n = static_cast<double>(v.size());
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / n;
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(ss / n);
  std::sort(v.begin(), v.end());
  const auto mid = v.size() / 2;
  s.median = v.size() % 2 ? v[mid] : (v[mid - 1] + v[mid]) / 2.0;
  return s;
}

MetricRow score_subset(const std::string& label, const std::vector<const ScoredOutput*>& subset) {
  MetricRow row;
  row.label = label;
  row.count = subset.size();
  if (subset.empty()) return row;
  std::vector<std::string> cands, refs;
  for (const auto* o : subset) {
    row.rouge1 += rouge_n(o->generated, o->target, 1).f1;
    row.rouge2 += rouge_n(o->generated, o->target, 2).f1;
    row.rougeL += rouge_l(o->generated, o->target).f1;
    cands.push_back(o->generated);
    refs.push_back(o->target);
  }
  const auto n = static_cast<double>(subset.size());
  row.rouge1 /= n;
  row.rouge2 /= n;
  row.rougeL /= n;
  const auto b = bleu(cands, refs);
  row.bleu1 = b.bleu1;
  row.bleu2 = b.bleu2;
  row.bleu = b.bleu;
  return row;
}

nlohmann::json row_json(const MetricRow& r) {
  return {{"label", r.label},   {"count", r.count},   {"rouge1", r.rouge1}, {"rouge2", r.rouge2},
          {"rougeL", r.rougeL}, {"bleu1", r.bleu1},   {"bleu2", r.bleu2},   {"bleu", r.bleu}};
}

MetricRow row_from_json(const nlohmann::json& j) {
  MetricRow r;
  r.label = j.at("label").get<std::string>();
  r.count = j.at("count").get<std::size_t>();
  r.rouge1 = j.at("rouge1").get<double>();
  r.rouge2 = j.at("rouge2").get<double>();
  r.rougeL = j.at("rougeL").get<double>();
  r.bleu1 = j.at("bleu1").get<double>();
  r.bleu2 = j.at("bleu2").get<double>();
  r.bleu = j.at("bleu").get<double>();
  return r;
}

}  // namespace

std::vector<std::string> metric_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Prf rouge_n(std::string_view candidate, std::string_view reference, int n) {
  if (n < 1) throw ConfigError("rouge_n: n must be >= 1");
  const auto cand_tokens = metric_tokens(candidate);
  const auto ref_tokens = metric_tokens(reference);
  const auto cand = count_ngrams(cand_tokens, n);
  const auto ref = count_ngrams(ref_tokens, n);
  // Both sides shorter than n: no n-grams to compare, so fall back to exact
  // equality. Keeps rouge_n(x, x, n) = 100 for every non-empty x.
  if (total(cand) == 0 && total(ref) == 0) {
    const bool same = !cand_tokens.empty() && cand_tokens == ref_tokens;
    return same ? Prf{100.0, 100.0, 100.0} : Prf{};
  }
  return make_prf(clipped_overlap(cand, ref), total(cand), total(ref));
}

Prf rouge_l(std::string_view candidate, std::string_view reference) {
  const auto cand = metric_tokens(candidate);
  const auto ref = metric_tokens(reference);
  return make_prf(lcs_length(cand, ref), cand.size(), ref.size());
}

double corpus_bleu(const std::vector<std::string>& candidates,
                   const std::vector<std::string>& references, int max_n) {
  if (candidates.size() != references.size()) {
    throw ConfigError("bleu: candidate and reference lists differ in length");
  }
  if (candidates.empty()) throw Error("bleu: empty corpus");
  if (max_n < 1) throw ConfigError("bleu: max_n must be >= 1");

  std::vector<std::size_t> matches(static_cast<std::size_t>(max_n), 0);
  std::vector<std::size_t> possible(static_cast<std::size_t>(max_n), 0);
  std::size_t cand_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto c = metric_tokens(candidates[i]);
    const auto r = metric_tokens(references[i]);
    cand_len += c.size();
    ref_len += r.size();
    for (int n = 1; n <= max_n; ++n) {
      const auto cc = count_ngrams(c, n);
      const auto rc = count_ngrams(r, n);
      matches[static_cast<std::size_t>(n - 1)] += clipped_overlap(cc, rc);
      possible[static_cast<std::size_t>(n - 1)] += total(cc);
    }
  }
  if (cand_len == 0) return 0.0;

  // Orders with no candidate n-grams anywhere in the corpus (every candidate
  // shorter than n) drop out of the geometric mean.
  double log_sum = 0.0;
  int orders = 0;
  for (int n = 0; n < max_n; ++n) {
    const auto un = static_cast<std::size_t>(n);
    if (possible[un] == 0) continue;
    if (matches[un] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matches[un]) / static_cast<double>(possible[un]));
    ++orders;
  }
  const double bp =
      std::exp(std::min(0.0, 1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len)));
  return 100.0 * bp * std::exp(log_sum / orders);
}

BleuScores bleu(const std::vector<std::string>& candidates,
                const std::vector<std::string>& references, int max_n) {
  return {corpus_bleu(candidates, references, 1), corpus_bleu(candidates, references, 2),
          corpus_bleu(candidates, references, max_n)};
}

MetricReport aggregate_report(const std::vector<ScoredOutput>& outputs) {
  std::map<std::string, std::vector<const ScoredOutput*>> by_type;
  std::vector<const ScoredOutput*> all;
  for (const auto& o : outputs) {
    by_type[o.clause_type].push_back(&o);
    all.push_back(&o);
  }
  MetricReport report;
  for (const auto& [type, subset] : by_type) report.per_type.push_back(score_subset(type, subset));
  report.overall = score_subset("overall", all);
  return report;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error("pearson: need at least two paired values");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw Error("pearson: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

LengthStats length_stats_from_pairs(const std::vector<double>& actual,
                                    const std::vector<double>& generated) {
  if (actual.size() != generated.size()) throw Error("length_stats: unpaired lengths");
  LengthStats s;
  s.pairs = actual.size();
  s.actual = side_stats(actual);
  s.generated = side_stats(generated);
  if (s.pairs >= 2 && s.actual.std > 0.0 && s.generated.std > 0.0) {
    s.pearson_r = pearson(actual, generated);
  }
  return s;
}

LengthStats length_stats(const std::vector<ScoredOutput>& outputs) {
  std::vector<double> actual, generated;
  for (const auto& o : outputs) {
    actual.push_back(static_cast<double>(metric_tokens(o.target).size()));
    generated.push_back(static_cast<double>(metric_tokens(o.generated).size()));
  }
  return length_stats_from_pairs(actual, generated);
}

std::string render_table(const MetricReport& report, std::string_view title) {
  std::string out;
  if (!title.empty()) out += fmt::format("{}\n", title);
  out += fmt::format("{:<28} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}\n", "Clause type / Overall",
                     "n", "ROUGE-1", "ROUGE-2", "ROUGE-L", "BLEU-1", "BLEU-2", "BLEU");
  auto line = [&](const MetricRow& r) {
    out += fmt::format("{:<28} {:>6} {:>8.2f} {:>8.2f} {:>8.2f} {:>8.2f} {:>8.2f} {:>8.2f}\n",
                       r.label, r.count, r.rouge1, r.rouge2, r.rougeL, r.bleu1, r.bleu2, r.bleu);
  };
  for (const auto& r : report.per_type) line(r);
  line(report.overall);
  return out;
}

std::string report_json(const MetricReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.per_type) rows.push_back(row_json(r));
  return nlohmann::json{{"per_type", rows}, {"overall", row_json(report.overall)}}.dump(2);
}

MetricReport report_from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  MetricReport r;
  for (const auto& row : j.at("per_type")) r.per_type.push_back(row_from_json(row));
  r.overall = row_from_json(j.at("overall"));
  return r;
}

std::string length_stats_json(const LengthStats& s) {
  auto side = [](const SideStats& x) {
    return nlohmann::json{{"mean", x.mean}, {"std", x.std}, {"median", x.median}};
  };
  nlohmann::json j = {{"pairs", s.pairs},
                      {"actual", side(s.actual)},
                      {"generated", side(s.generated)},
                      {"pearson_r", s.pearson_r ? nlohmann::json(*s.pearson_r) : nlohmann::json()},
                      {"pearson_defined", s.pearson_r.has_value()}};
  return j.dump(2);
}

std::string length_pairs_csv(const std::vector<ScoredOutput>& outputs) {
  std::ostringstream os;
  os << "example_id,clause_type,actual_len,generated_len\n";
  for (const auto& o : outputs) {
    os << o.example_id << ',' << '"' << o.clause_type << '"' << ','
       << metric_tokens(o.target).size() << ',' << metric_tokens(o.generated).size() << '\n';
  }
  return os.str();
}

}  // namespace clauseforge::metrics
