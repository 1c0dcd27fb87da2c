#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace clauseforge::metrics {

/// Scores are on a percent scale, [0, 100].
struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Lowercase, then split on whitespace.
std::vector<std::string> metric_tokens(std::string_view text);

Prf rouge_n(std::string_view candidate, std::string_view reference, int n);
Prf rouge_l(std::string_view candidate, std::string_view reference);

struct BleuScores {
  double bleu1 = 0.0;
  double bleu2 = 0.0;
  double bleu = 0.0;  // up to max_n (4 by default)
};

/// Corpus-level BLEU: clipped n-gram matches and lengths pooled over all
/// pairs, uniform weights, brevity penalty on pooled lengths, no smoothing.
BleuScores bleu(const std::vector<std::string>& candidates,
                const std::vector<std::string>& references, int max_n = 4);

/// Single corpus BLEU score with n-gram order up to `max_n`.
double corpus_bleu(const std::vector<std::string>& candidates,
                   const std::vector<std::string>& references, int max_n);

struct ScoredOutput {
  std::string example_id;
  std::string clause_type;
  std::string generated;
  std::string target;
};

struct MetricRow {
  std::string label;  // clause type, or "overall"
  std::size_t count = 0;
  double rouge1 = 0.0;
  double rouge2 = 0.0;
  double rougeL = 0.0;
  double bleu1 = 0.0;
  double bleu2 = 0.0;
  double bleu = 0.0;

  bool operator==(const MetricRow&) const = default;
};

struct MetricReport {
  std::vector<MetricRow> per_type;  // sorted by clause type
  MetricRow overall;

  bool operator==(const MetricReport&) const = default;
};

/// ROUGE rows average per-example F1; BLEU rows are corpus BLEU over the
/// subset. The overall row is computed over all outputs at once.
MetricReport aggregate_report(const std::vector<ScoredOutput>& outputs);

struct SideStats {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  double median = 0.0;
};

struct LengthStats {
  SideStats actual;
  SideStats generated;
  std::optional<double> pearson_r;  // empty when either side has zero variance
  std::size_t pairs = 0;
};

double pearson(const std::vector<double>& x, const std::vector<double>& y);
LengthStats length_stats_from_pairs(const std::vector<double>& actual,
                                    const std::vector<double>& generated);
LengthStats length_stats(const std::vector<ScoredOutput>& outputs);

std::string render_table(const MetricReport& report, std::string_view title = {});
std::string report_json(const MetricReport& report);
MetricReport report_from_json(std::string_view text);
std::string length_stats_json(const LengthStats& stats);
/// example_id,clause_type,actual_len,generated_len
std::string length_pairs_csv(const std::vector<ScoredOutput>& outputs);

}  // namespace clauseforge::metrics
