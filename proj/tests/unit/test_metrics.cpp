#include <doctest.h>

#include <algorithm>
#include <random>

#include "clauseforge/errors.hpp"
#include "clauseforge/metrics.hpp"

using namespace clauseforge;
using namespace clauseforge::metrics;

namespace {

struct OracleRow {
  const char* cand;
  const char* ref;
  double r1, r2, rl_p, rl_r, rl_f, b1, b2, b4;
};

#include "metric_oracle_values.inc"

}  // namespace

TEST_CASE("worked examples") {
  CHECK(rouge_n("a b c", "a b d", 1).f1 == doctest::Approx(66.6667).epsilon(1e-5));
  const auto l = rouge_l("a c b", "a b c");
  CHECK(l.recall == doctest::Approx(200.0 / 3.0));
  const auto b = bleu({"the cat sat"}, {"the cat sat down"});
  CHECK(std::abs(b.bleu2 - 71.65) <= 0.01);
  CHECK(b.bleu1 == doctest::Approx(b.bleu2));
}

TEST_CASE("identity scores 100 and disjoint scores 0") {
  for (const char* s : {"x", "the cat sat on the mat", "Governing law of Delaware"}) {
    CHECK(rouge_n(s, s, 1).f1 == 100.0);
    CHECK(rouge_l(s, s).f1 == 100.0);
  }
  CHECK(rouge_n("the cat sat on the mat", "the cat sat on the mat", 2).f1 == 100.0);
  const auto b = bleu({"the cat sat on the mat"}, {"the cat sat on the mat"});
  CHECK(b.bleu1 == 100.0);
  CHECK(b.bleu2 == 100.0);
  CHECK(b.bleu == 100.0);
  // Shorter than the n-gram order: identity still scores 100.
  CHECK(rouge_n("x", "x", 2).f1 == 100.0);
  CHECK(rouge_n("x", "y", 2).f1 == 0.0);
  CHECK(bleu({"a b"}, {"a b"}).bleu == 100.0);
  CHECK(bleu({"x"}, {"x"}).bleu2 == 100.0);
  CHECK(rouge_n("a b", "c d", 1).f1 == 0.0);
  CHECK(bleu({"a b c d"}, {"e f g h"}).bleu == 0.0);
}

TEST_CASE("edge cases") {
  CHECK(rouge_n("a b", "", 1).f1 == 0.0);
  CHECK(rouge_l("", "a b").f1 == 0.0);
  CHECK_THROWS_AS(rouge_n("a", "a", 0), ConfigError);
  CHECK_THROWS_AS(bleu({}, {}), Error);
  CHECK_THROWS_AS(bleu({"a"}, {"a", "b"}), ConfigError);
}

TEST_CASE("oracle agreement on fixed pairs") {
  std::vector<std::string> cands, refs;
  for (const auto& row : kOracle) {
    INFO(row.cand, " | ", row.ref);
    CHECK(std::abs(rouge_n(row.cand, row.ref, 1).f1 - row.r1) <= 1e-6);
    CHECK(std::abs(rouge_n(row.cand, row.ref, 2).f1 - row.r2) <= 1e-6);
    const auto l = rouge_l(row.cand, row.ref);
    CHECK(std::abs(l.precision - row.rl_p) <= 1e-6);
    CHECK(std::abs(l.recall - row.rl_r) <= 1e-6);
    CHECK(std::abs(l.f1 - row.rl_f) <= 1e-6);
    const auto b = bleu({row.cand}, {row.ref});
    CHECK(std::abs(b.bleu1 - row.b1) <= 1e-6);
    CHECK(std::abs(b.bleu2 - row.b2) <= 1e-6);
    CHECK(std::abs(b.bleu - row.b4) <= 1e-6);
    cands.push_back(row.cand);
    refs.push_back(row.ref);
  }
  const auto corpus = bleu(cands, refs);
  CHECK(std::abs(corpus.bleu1 - kCorpusBleu[0]) <= 1e-6);
  CHECK(std::abs(corpus.bleu2 - kCorpusBleu[1]) <= 1e-6);
  CHECK(std::abs(corpus.bleu - kCorpusBleu[2]) <= 1e-6);
}

TEST_CASE("corpus scores ignore example order") {
  std::vector<std::string> cands, refs;
  for (const auto& row : kOracle) {
    cands.push_back(row.cand);
    refs.push_back(row.ref);
  }
  const auto base = bleu(cands, refs);
  std::vector<std::size_t> perm(cands.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(3);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::string> c2, r2;
  for (auto i : perm) {
    c2.push_back(cands[i]);
    r2.push_back(refs[i]);
  }
  const auto shuffled = bleu(c2, r2);
  CHECK(shuffled.bleu == doctest::Approx(base.bleu).epsilon(1e-12));
}

TEST_CASE("brevity penalty never rewards shortening") {
  const std::string ref = "a b c d e f g h";
  double prev = bleu({"a b c d e f g h"}, {ref}, 1).bleu1;
  for (std::string cand : {"a b c d e f g", "a b c d e f", "a b c d", "a b"}) {
    const double now = bleu({cand}, {ref}, 1).bleu1;
    CHECK(now <= prev);
    prev = now;
  }
}

TEST_CASE("aggregate report on a six-output fixture") {
  const std::vector<ScoredOutput> outs{
      {"1", "alpha", "x y z", "x y z"},  {"2", "alpha", "p q", "p q"},
      {"3", "beta", "a b c", "a b d"},   {"4", "beta", "x y", "x y"},
      {"5", "gamma", "p", "q"},          {"6", "gamma", "r s", "t u"},
  };
  const auto rep = aggregate_report(outs);
  REQUIRE(rep.per_type.size() == 3);
  const auto& alpha = rep.per_type[0];
  const auto& beta = rep.per_type[1];
  const auto& gamma = rep.per_type[2];
  CHECK(alpha.label == "alpha");
  CHECK(alpha.count == 2);
  CHECK(alpha.rouge1 == 100.0);
  CHECK(alpha.bleu1 == 100.0);
  CHECK(beta.rouge1 == doctest::Approx((200.0 / 3.0 + 100.0) / 2.0));
  CHECK(beta.rouge2 == doctest::Approx(75.0));
  CHECK(beta.bleu1 == doctest::Approx(80.0));
  CHECK(gamma.rouge1 == 0.0);
  CHECK(gamma.bleu == 0.0);
  CHECK(rep.overall.count == 6);
  CHECK(rep.overall.label == "overall");
  // Overall is scored over the union: 9 of 13 unigrams match, equal lengths.
  CHECK(rep.overall.bleu1 == doctest::Approx(900.0 / 13.0));

  const auto single = aggregate_report({outs[2], outs[3]});
  CHECK(single.per_type.size() == 1);
  auto overall = single.overall;
  overall.label = single.per_type[0].label;
  CHECK(overall == single.per_type[0]);
}

TEST_CASE("report json round trip and table") {
  const std::vector<ScoredOutput> outs{{"1", "t", "a b c", "a b d"}, {"2", "u", "x", "x"}};
  const auto rep = aggregate_report(outs);
  CHECK(report_from_json(report_json(rep)) == rep);
  const auto table = render_table(rep, "demo");
  CHECK(table.find("ROUGE-L") != std::string::npos);
  CHECK(table.find("overall") != std::string::npos);
}

TEST_CASE("pearson and length stats") {
  CHECK(pearson({1, 2, 3}, {3, 1, 2}) == doctest::Approx(-0.5));
  CHECK(pearson({1, 2, 3}, {2, 4, 6}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(pearson({1, 1, 1}, {1, 2, 3}), Error);
  CHECK_THROWS_AS(pearson({1}, {2}), Error);

  const auto s = length_stats_from_pairs({1, 2, 3}, {3, 1, 2});
  CHECK(*s.pearson_r == doctest::Approx(-0.5));
  CHECK(s.actual.mean == doctest::Approx(2.0));
  CHECK(s.actual.std == doctest::Approx(std::sqrt(2.0 / 3.0)));
  CHECK(s.actual.median == 2.0);
  CHECK(s.pairs == 3);
  CHECK_FALSE(length_stats_from_pairs({2, 2}, {1, 3}).pearson_r.has_value());

  const std::vector<ScoredOutput> same{{"1", "t", "a b", "a b"}, {"2", "t", "a b c d", "a b c d"}};
  const auto ls = length_stats(same);
  CHECK(*ls.pearson_r == doctest::Approx(1.0));
  CHECK(ls.actual.mean == ls.generated.mean);
  CHECK(ls.actual.median == 3.0);
  CHECK(length_pairs_csv(same) == "example_id,clause_type,actual_len,generated_len\n1,\"t\",2,2\n2,\"t\",4,4\n");
}
