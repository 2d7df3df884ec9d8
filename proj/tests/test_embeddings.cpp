#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "pprsim/embeddings.hpp"
#include "support.hpp"

using namespace pprsim;

namespace {

EmbeddingStore store_of(std::vector<std::string> tokens, std::vector<std::vector<double>> rows) {
  RowMatrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < rows[i].size(); ++c) m(i, c) = rows[i][c];
  }
  return EmbeddingStore(std::move(tokens), std::move(m));
}

double norm(std::span<const double> v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

}  // namespace

TEST_SUITE("embeddings") {

TEST_CASE("single-line vector file") {
  std::istringstream in("a 1.0 0.0\n");
  auto s = read_vectors(in, "mem");
  CHECK(s.size() == 1);
  CHECK(s.dim() == 2);
  CHECK(s.token(0) == "a");
  CHECK(s.find("a") == std::size_t{0});
  CHECK_FALSE(s.find("b").has_value());
}

TEST_CASE("header line and limit") {
  std::istringstream in("3 2\nx 3 4\ny 0 2\nz 1 1\n");
  auto s = read_vectors(in, "mem", 2);
  CHECK(s.size() == 2);
  CHECK(s.vector(0)[0] == doctest::Approx(0.6));
  CHECK(s.vector(0)[1] == doctest::Approx(0.8));
}

TEST_CASE("inconsistent dimensions name the token") {
  std::istringstream in("a 1 0\nbad 1 0 0\n");
  try {
    read_vectors(in, "mem");
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("bad") != std::string::npos);
  }
}

TEST_CASE("unparsable floats and zero vectors are rejected") {
  std::istringstream bad_float("a 1 zz\n");
  CHECK_THROWS(read_vectors(bad_float, "mem"));
  std::istringstream zero("a 0 0\n");
  CHECK_THROWS(read_vectors(zero, "mem"));
  std::istringstream dup("a 1 0\na 0 1\n");
  CHECK_THROWS(read_vectors(dup, "mem"));
}

TEST_CASE("vectors are unit length after loading") {
  auto s = store_of({"p", "q"}, {{3, 4}, {-2, 0}});
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(norm(s.vector(i)) - 1.0) <= 1e-9);
}

TEST_CASE("synthetic stores") {
  auto a = synthesize_store(10, 4, 7);
  auto b = synthesize_store(10, 4, 7);
  CHECK(a.vectors() == b.vectors());
  auto one = synthesize_store(1, 2, 0);
  CHECK(one.size() == 1);
  CHECK(std::abs(norm(one.vector(0)) - 1.0) <= 1e-9);

  // Monte-Carlo oracle: mean pairwise cosine of isotropic vectors is 0.
  auto big = synthesize_store(1000, 8, 1);
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> pick(0, 999);
  double sum = 0;
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) {
    std::size_t x = pick(rng), y = pick(rng);
    while (y == x) y = pick(rng);
    sum += score(big.vector(x), big.vector(y));
  }
  CHECK(std::abs(sum / draws) < 0.05);
  CHECK_THROWS(synthesize_store(0, 4, 1));
  CHECK_THROWS(synthesize_store(4, 1, 1));
}

TEST_CASE("score") {
  std::vector<double> q{0.6, 0.8}, d{1, 0}, o{0, 1}, o2{-0.8, 0.6};
  CHECK(score(q, d) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(score(q, q) == doctest::Approx(1.0));
  CHECK(score(q, o2) == doctest::Approx(0.0));
  CHECK(score(d, o) == 0.0);
  CHECK(score(q, d) == score(d, q));
  std::vector<double> three{1, 0, 0};
  CHECK_THROWS(score(q, three));
}

TEST_CASE("score is linear in the document argument") {
  std::mt19937_64 rng(4);
  auto s = synthesize_store(200, 16, 3);
  std::uniform_int_distribution<std::size_t> pick(0, 199);
  for (int t = 0; t < 200; ++t) {
    auto q = s.vector(pick(rng));
    std::vector<double> sum(16, 0.0);
    double separate = 0;
    const int count = 1 + t % 20;
    for (int i = 0; i < count; ++i) {
      auto d = s.vector(pick(rng));
      for (std::size_t c = 0; c < 16; ++c) sum[c] += d[c];
      separate += score(q, d);
    }
    CHECK(std::abs(score(q, sum) - separate) < 1e-9 * count);
  }
}

TEST_CASE("top_k ordering") {
  std::vector<double> q{1, 0};
  std::vector<double> hi{0.9, std::sqrt(1 - 0.81)}, lo{0.3, std::sqrt(1 - 0.09)};
  std::vector<DocumentRef> docs{{4, lo}, {2, hi}};
  auto best = top_k(q, docs, 1);
  REQUIRE(best.size() == 1);
  CHECK(best[0].id == 2);

  std::vector<DocumentRef> tied{{9, hi}, {3, hi}};
  CHECK(top_k(q, tied, 1)[0].id == 3);
  CHECK(top_k(q, tied, 5).size() == 2);
  std::vector<DocumentRef> gold{{0, hi}};
  CHECK(top_k(q, gold, 1)[0].id == 0);
  CHECK_THROWS(top_k(q, gold, 0));
}

TEST_CASE("top_k over everything is a total order consistent with scores") {
  auto s = synthesize_store(64, 4, 11);
  std::vector<DocumentRef> docs;
  for (std::size_t i = 0; i < s.size(); ++i) docs.push_back({static_cast<DocId>(i), s.vector(i)});
  auto q = s.vector(0);
  auto all = top_k(q, docs, docs.size());
  REQUIRE(all.size() == docs.size());
  for (std::size_t i = 1; i < all.size(); ++i) {
    CHECK(ranks_before(all[i - 1], all[i]));
    CHECK(all[i - 1].score >= all[i].score);
  }
}

TEST_CASE("three-token dataset pairs a with b") {
  auto store = std::make_shared<const EmbeddingStore>(
      store_of({"a", "b", "c"}, {{1, 0}, {0.9, 0.436}, {0, 1}}));
  bool saw_a = false;
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    auto ds = generate_dataset(store, 1, 0.6, seed);
    REQUIRE(ds.pair_count() == 1);
    CHECK(ds.irrelevant_pool == std::vector<std::size_t>{2});
    if (ds.queries[0] == 0) {
      saw_a = true;
      CHECK(ds.gold[0] == 1);
    } else {
      CHECK(ds.queries[0] == 1);
      CHECK(ds.gold[0] == 0);
    }
  }
  CHECK(saw_a);
}

TEST_CASE("dataset invariants") {
  auto store = std::make_shared<const EmbeddingStore>(synthesize_store(3000, 16, 5));
  auto ds = generate_dataset(store, 100, 0.6, 8);
  CHECK(ds.pair_count() == 100);
  std::set<std::size_t> queries(ds.queries.begin(), ds.queries.end());
  std::set<std::size_t> gold(ds.gold.begin(), ds.gold.end());
  CHECK(queries.size() == 100);
  for (auto g : gold) CHECK(queries.count(g) == 0);
  for (std::size_t i = 0; i < 100; ++i) {
    CHECK(score(ds.query_vector(i), ds.gold_vector(i)) > 0.6);
    CHECK(ds.pair_similarity[i] == score(ds.query_vector(i), ds.gold_vector(i)));
    // Gold is the exact nearest neighbor among non-query tokens.
    for (std::size_t t = 0; t < store->size(); ++t) {
      if (t == ds.queries[i] || queries.count(t) != 0) continue;
      CHECK(score(ds.query_vector(i), store->vector(t)) <= ds.pair_similarity[i]);
    }
  }
  for (auto p : ds.irrelevant_pool) {
    CHECK(queries.count(p) == 0);
    CHECK(gold.count(p) == 0);
  }
  CHECK(ds.irrelevant_pool.size() + queries.size() + gold.size() == store->size());

  auto again = generate_dataset(store, 100, 0.6, 8, Execution::Serial);
  CHECK(again.queries == ds.queries);
  CHECK(again.gold == ds.gold);
  CHECK(again.irrelevant_pool == ds.irrelevant_pool);
}

TEST_CASE("exhausted vocabulary reports how many pairs were found") {
  auto store = std::make_shared<const EmbeddingStore>(synthesize_store(200, 8, 2));
  try {
    generate_dataset(store, 5, 1.0, 1);
    FAIL("expected DatasetError");
  } catch (const DatasetError& e) {
    CHECK(e.found() == 0);
  }
}

}  // TEST_SUITE
