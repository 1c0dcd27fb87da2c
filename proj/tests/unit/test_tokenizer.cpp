#include <doctest.h>

#include <random>

#include "clauseforge/errors.hpp"
#include "clauseforge/synthetic.hpp"
#include "clauseforge/tokenizer.hpp"
#include "test_util.hpp"

using namespace clauseforge;
using namespace clauseforge::tokenizer;

TEST_CASE("pre-tokenization lowercases and splits punctuation") {
  CHECK(pre_tokenize("Governing LAW, (Delaware).") ==
        std::vector<std::string>{"governing", "law", ",", "(", "delaware", ")", "."});
  CHECK(normalize("  The   Party's  ") == "the party ' s");
}

TEST_CASE("induction on a two-letter corpus") {
  const auto v = train_vocab({"aaab aaab aaab"}, 8);
  // Alphabet: a, ##a, ##b. Scores tie at 1/6 for (a,##a) and (##a,##b); the
  // lexicographically smaller pair wins.
  CHECK(v.tokens() == std::vector<std::string>{"[PAD]", "[BOS]", "[EOS]", "[UNK]", "##a", "##b",
                                               "a", "##ab"});
  const auto full = train_vocab({"aaab aaab aaab"}, 100);
  CHECK(full.contains("aaab"));
  CHECK(full.size() < 100);
  CHECK(full.encode("aaab") == std::vector<TokenId>{full.id("aaab")});
}

TEST_CASE("target below alphabet size is an error") {
  CHECK_THROWS_AS(train_vocab({"abc"}, 6), ConfigError);
  CHECK_THROWS_AS(train_vocab({}, 100), ConfigError);
}

TEST_CASE("training is deterministic") {
  synthetic::Options opt;
  opt.contracts = 30;
  std::vector<std::string> texts;
  for (const auto& c : synthetic::generate(opt)) {
    for (const auto& cl : c.clauses) texts.push_back(cl.text);
  }
  const auto a = train_vocab(texts, 300);
  CHECK(a == train_vocab(texts, 300));
  CHECK(a.size() == 300);
}

TEST_CASE("encode and decode") {
  const auto v = train_vocab({"governing law shall govern", "the governing law of delaware"}, 200);
  CHECK(v.decode(v.encode("governing law")) == "governing law");
  CHECK(v.encode("").empty());
  const auto ids = v.encode("governing \xce\xa9mega");
  CHECK(std::find(ids.begin(), ids.end(), kUnk) != ids.end());
  CHECK(v.decode(std::vector<TokenId>{kBos, v.id("law"), kEos, kPad}) == "law");
  CHECK_THROWS_AS(v.decode(std::vector<TokenId>{static_cast<TokenId>(v.size())}), Error);
}

TEST_CASE("round trip on sampled clauses") {
  synthetic::Options opt;
  opt.contracts = 200;
  std::vector<std::string> texts;
  for (const auto& c : synthetic::generate(opt)) {
    for (const auto& cl : c.clauses) texts.push_back(cl.text);
  }
  const auto v = train_vocab(texts, 400);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const auto& t = texts[rng() % texts.size()];
    const auto ids = v.encode(t);
    for (auto id : ids) {
      CHECK(id < v.size());
      CHECK(id != kPad);
    }
    if (std::find(ids.begin(), ids.end(), kUnk) == ids.end()) CHECK(v.decode(ids) == normalize(t));
    CHECK(v.encode(t) == ids);
  }
}

TEST_CASE("vocab files round trip") {
  testutil::TempDir dir("vocab");
  const auto v = train_vocab({"some clause text here", "another clause"}, 40);
  v.save(dir.path());
  CHECK(Vocab::load(dir.path()) == v);
  CHECK(testutil::slurp(dir / "vocab.txt").starts_with("[PAD]\n[BOS]\n[EOS]\n[UNK]\n"));
  testutil::write_file(dir / "vocab.txt", "[BOS]\n[PAD]\n");
  CHECK_THROWS_AS(Vocab::load(dir.path()), FormatError);
}
