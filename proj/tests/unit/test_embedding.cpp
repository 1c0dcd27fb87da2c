#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "clauseforge/binary_io.hpp"
#include "clauseforge/corpus.hpp"
#include "clauseforge/embedding.hpp"
#include "clauseforge/errors.hpp"
#include "test_util.hpp"

using namespace clauseforge;
using namespace clauseforge::embedding;

namespace {

EncoderSpec hash_spec(std::uint32_t dim = 768, std::uint64_t seed = 0) {
  EncoderSpec s;
  s.dim = dim;
  s.seed = seed;
  return s;
}

std::string random_doc(std::mt19937_64& rng, std::size_t words) {
  std::string out;
  for (std::size_t i = 0; i < words; ++i) {
    if (i) out += ' ';
    out += "w" + std::to_string(rng() % 5000);
  }
  return out;
}

}  // namespace

TEST_CASE("hash encoder is deterministic and normalizes case and spacing") {
  const auto s = hash_spec();
  const auto a = encode(s, "governing law");
  CHECK(a == encode(s, "governing law"));
  CHECK(a == encode(s, "Governing   LAW"));
  CHECK(a.size() == 768);
}

TEST_CASE("hash encoder output has unit norm") {
  const auto s = hash_spec(64, 3);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto v = encode(s, random_doc(rng, 1 + rng() % 40));
    double n = 0;
    for (float x : v) n += static_cast<double>(x) * x;
    CHECK(std::sqrt(n) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("hash encoder rejects text without tokens") {
  CHECK_THROWS_WITH_AS(encode(hash_spec(), " ,.; "), "unencodable text", Error);
  CHECK_THROWS_AS(encode(hash_spec(), ""), Error);
}

TEST_CASE("hash encoder similarity sanity") {
  const auto s = hash_spec();
  std::mt19937_64 rng(2024);
  int wins = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto a_text = random_doc(rng, 30);
    auto words = a_text;
    // Replace the first token of A.
    const auto sp = words.find(' ');
    const auto a2_text = "zz" + std::to_string(t) + words.substr(sp);
    const auto b_text = random_doc(rng, 30);
    const auto a = encode(s, a_text);
    wins += cosine(a, encode(s, a2_text)) > cosine(a, encode(s, b_text)) ? 1 : 0;
  }
  CHECK(wins >= 950);
}

TEST_CASE("store round trip is bit exact and preserves order") {
  testutil::TempDir dir("emb");
  EmbeddingStore store(8, "test-provenance");
  std::mt19937_64 rng(5);
  std::normal_distribution<float> nd;
  for (const char* id : {"z", "a", "m"}) {
    std::vector<float> v(8);
    for (auto& x : v) x = nd(rng);
    store.add(id, v);
  }
  store_write(store, dir / "s.creb");
  std::vector<std::string> warnings;
  const auto back = store_read(dir / "s.creb", 8, &warnings);
  CHECK(back == store);
  CHECK(back.ids() == std::vector<std::string>{"z", "a", "m"});
  CHECK(back.provenance() == "test-provenance");
  CHECK(warnings.empty());
  CHECK(std::filesystem::file_size(dir / "s.creb") == creb_file_size(store));
  CHECK(creb_file_size(store) == 16 + 3 * (4 + 1 + 4 * 8));
}

TEST_CASE("CREB header layout") {
  testutil::TempDir dir("emb");
  EmbeddingStore store(2);
  store.add("ab", std::vector<float>{1.0f, -2.5f});
  store_write(store, dir / "s.creb");
  const auto bytes = testutil::slurp(dir / "s.creb");
  REQUIRE(bytes.size() == 16 + 4 + 2 + 8);
  CHECK(bytes.substr(0, 4) == "CREB");
  std::uint32_t header[3];
  std::memcpy(header, bytes.data() + 4, 12);
  CHECK(header[0] == 1);
  CHECK(header[1] == 2);
  CHECK(header[2] == 1);
  float v[2];
  std::memcpy(v, bytes.data() + 16 + 4 + 2, 8);
  CHECK(v[0] == 1.0f);
  CHECK(v[1] == -2.5f);
}

TEST_CASE("store_read rejects malformed files") {
  testutil::TempDir dir("emb");
  EmbeddingStore store(4);
  store.add("x", std::vector<float>{1, 2, 3, 4});
  store.add("y", std::vector<float>{0, 0, 0, 0});
  store_write(store, dir / "ok.creb");
  const auto good = testutil::slurp(dir / "ok.creb");

  std::vector<std::string> warnings;
  store_read(dir / "ok.creb", 0, &warnings);
  CHECK(warnings.size() == 1);

  auto bad_magic = good;
  bad_magic.replace(0, 4, "XXXX");
  testutil::write_file(dir / "magic.creb", bad_magic);
  CHECK_THROWS_AS(store_read(dir / "magic.creb"), FormatError);

  auto bad_version = good;
  bad_version[4] = 2;
  testutil::write_file(dir / "version.creb", bad_version);
  CHECK_THROWS_AS(store_read(dir / "version.creb"), FormatError);

  CHECK_THROWS_AS(store_read(dir / "ok.creb", 8), FormatError);

  testutil::write_file(dir / "trunc.creb", good.substr(0, good.size() - 3));
  CHECK_THROWS_AS(store_read(dir / "trunc.creb"), FormatError);

  testutil::write_file(dir / "trail.creb", good + "!");
  CHECK_THROWS_AS(store_read(dir / "trail.creb"), FormatError);

  // Second record renamed to the first id.
  auto dup = good;
  dup[16 + 4 + 1 + 16 + 4] = 'x';
  testutil::write_file(dir / "dup.creb", dup);
  CHECK_THROWS_AS(store_read(dir / "dup.creb"), FormatError);
}

TEST_CASE("store rejects inconsistent entries") {
  EmbeddingStore store(2);
  CHECK_THROWS_AS(store.add("a", std::vector<float>{1, 2, 3}), FormatError);
  CHECK_THROWS_AS(store.add("a", std::vector<float>{1, NAN}), FormatError);
  store.add("a", std::vector<float>{1, 2});
  CHECK_THROWS_AS(store.add("a", std::vector<float>{1, 2}), FormatError);
  CHECK_THROWS_AS(store_write(EmbeddingStore(2), "/tmp/never.creb"), Error);
}

TEST_CASE("embed_corpus covers every clause and depends on the seed") {
  const auto contracts =
      corpus::ingest(testutil::data("fixture_contracts.jsonl"), corpus::Format::ContractJsonl);
  const std::vector<corpus::Contract> two(contracts.begin(), contracts.begin() + 2);
  const auto a = embed_corpus(hash_spec(32, 1), two);
  CHECK(a.size() == 10);
  CHECK(a == embed_corpus(hash_spec(32, 1), two));
  const auto b = embed_corpus(hash_spec(32, 2), two);
  bool differs = false;
  for (const auto& id : a.ids()) {
    const auto x = a.get(id);
    const auto y = b.get(id);
    differs = differs || !std::equal(x.begin(), x.end(), y.begin());
  }
  CHECK(differs);
}

TEST_CASE("embed_corpus names the failing clause") {
  std::vector<corpus::Contract> contracts{{"c", {{"c-bad", "c", "t", "!!!", 1}}}};
  CHECK_THROWS_WITH(embed_corpus(hash_spec(8), contracts), doctest::Contains("c-bad"));
}

TEST_CASE("load_external checks coverage") {
  testutil::TempDir dir("emb");
  const auto contracts =
      corpus::ingest(testutil::data("fixture_contracts.jsonl"), corpus::Format::ContractJsonl);
  auto full = embed_corpus(hash_spec(16), contracts);
  full.set_provenance("legal-encoder(mean)");
  store_write(full, dir / "ext.creb");

  EncoderSpec spec;
  spec.kind = EncoderKind::ExternalFile;
  spec.dim = 16;
  spec.file = dir / "ext.creb";
  const auto loaded = load_external(spec, contracts);
  CHECK(loaded == full);
  CHECK(loaded.provenance() == "legal-encoder(mean)");

  EmbeddingStore partial(16);
  partial.add("c1-0", full.get("c1-0"));
  store_write(partial, dir / "partial.creb");
  spec.file = dir / "partial.creb";
  CHECK_THROWS_AS(load_external(spec, contracts), Error);
}
