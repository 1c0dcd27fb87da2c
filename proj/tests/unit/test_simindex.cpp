#include <doctest.h>

#include <random>

#include "clauseforge/errors.hpp"
#include "clauseforge/simindex.hpp"
#include "test_util.hpp"

using namespace clauseforge;
using namespace clauseforge::simindex;

namespace {

struct Points {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> vecs;
};

Points random_points(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  Points p;
  for (std::size_t i = 0; i < n; ++i) {
    p.ids.push_back("p" + std::to_string(i));
    std::vector<double> v(d);
    for (auto& x : v) x = u(rng);
    p.vecs.push_back(std::move(v));
  }
  return p;
}

}  // namespace

TEST_CASE("three points on a line") {
  const std::vector<std::string> ids{"a", "b", "c"};
  const std::vector<std::vector<double>> v{{0, 0}, {1, 0}, {5, 0}};
  const auto idx = HnswIndex::build(ids, v);
  const std::vector<double> q{0.1, 0};
  const auto hits = idx.search(q, 2);
  REQUIRE(hits.size() == 2);
  CHECK(hits[0].contract_id == "a");
  CHECK(hits[1].contract_id == "b");
  CHECK(hits[0].distance == doctest::Approx(0.01));
  CHECK(hits[1].distance == doctest::Approx(0.81));
  CHECK(brute_force_search(ids, v, q, 2) == hits);
}

TEST_CASE("single vector excluded gives nothing") {
  const std::vector<std::string> ids{"only"};
  const std::vector<std::vector<double>> v{{1, 2, 3}};
  const auto idx = HnswIndex::build(ids, v);
  CHECK(idx.search(v[0], 2, std::string_view("only")).empty());
}

TEST_CASE("exclusion returns the nearest other ids") {
  const auto p = random_points(200, 8, 4);
  const auto idx = HnswIndex::build(p.ids, p.vecs);
  for (std::size_t i = 0; i < 50; ++i) {
    const auto hits = idx.search(p.vecs[i], 2, std::string_view(p.ids[i]));
    REQUIRE(hits.size() == 2);
    for (const auto& h : hits) CHECK(h.contract_id != p.ids[i]);
    CHECK(hits[0].distance <= hits[1].distance);
  }
}

TEST_CASE("k below the floor and dim mismatch are errors") {
  const auto p = random_points(10, 4, 1);
  const auto idx = HnswIndex::build(p.ids, p.vecs);
  CHECK_THROWS_AS(idx.search(p.vecs[0], 1), ConfigError);
  CHECK_THROWS_AS(idx.search(std::vector<double>{1, 2}, 2), ConfigError);
  auto bad = p.vecs;
  bad[3].push_back(0.0);
  CHECK_THROWS_AS(HnswIndex::build(p.ids, bad), ConfigError);
  CHECK_THROWS_AS(HnswIndex::build({}, {}), ConfigError);
}

TEST_CASE("recall against brute force") {
  const auto p = random_points(1000, 32, 99);
  const auto idx = HnswIndex::build(p.ids, p.vecs);
  const auto q = random_points(100, 32, 100);
  double total = 0;
  for (const auto& v : q.vecs) {
    total += recall(idx.search(v, 10), brute_force_search(p.ids, p.vecs, v, 10));
  }
  CHECK(total / 100.0 >= 0.95);
}

TEST_CASE("deterministic build and snapshot round trip") {
  testutil::TempDir dir("idx");
  const auto p = random_points(300, 16, 5);
  const auto a = HnswIndex::build(p.ids, p.vecs);
  const auto b = HnswIndex::build(p.ids, p.vecs);
  a.save(dir / "a.hnsw");
  b.save(dir / "b.hnsw");
  CHECK(testutil::slurp(dir / "a.hnsw") == testutil::slurp(dir / "b.hnsw"));
  const auto loaded = HnswIndex::load(dir / "a.hnsw");
  CHECK(loaded.ids() == a.ids());
  for (std::size_t i = 0; i < 30; ++i) {
    CHECK(loaded.search(p.vecs[i], 6, std::string_view(p.ids[i])) ==
          a.search(p.vecs[i], 6, std::string_view(p.ids[i])));
  }
  testutil::write_file(dir / "bad.hnsw", "nope");
  CHECK_THROWS_AS(HnswIndex::load(dir / "bad.hnsw"), FormatError);
}

TEST_CASE("k sweep keeps shared prefixes") {
  const auto p = random_points(400, 16, 8);
  const auto idx = HnswIndex::build(p.ids, p.vecs);
  for (std::size_t i = 0; i < 40; ++i) {
    const auto longest = idx.search(p.vecs[i], 12, std::string_view(p.ids[i]));
    for (std::size_t k : {2, 4, 6, 8, 10}) {
      const auto hits = idx.search(p.vecs[i], k, std::string_view(p.ids[i]));
      REQUIRE(hits.size() == k);
      CHECK(std::equal(hits.begin(), hits.end(), longest.begin()));
    }
  }
}

TEST_CASE("brute force tie-break and full enumeration") {
  const std::vector<std::string> ids{"b", "a", "c"};
  const std::vector<std::vector<double>> v{{1, 0}, {-1, 0}, {0, 5}};
  const std::vector<double> q{0, 0};
  const auto hits = brute_force_search(ids, v, q, 2);
  CHECK(hits[0].contract_id == "a");
  CHECK(hits[1].contract_id == "b");
  const auto rest = brute_force_search(ids, v, v[2], 2, std::string_view("c"));
  CHECK(rest.size() == 2);
}
