#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "multispans/minimize.hpp"
#include "oracles.hpp"

using namespace multispans;

namespace {

constexpr double kBarbellTriangles = 1.6995138503199656;
constexpr double kBarbellUnbounded = 1.4688410154463647;

// Brute force over set partitions, independent of the library's enumerator.
double oracle_min(const Graph& g) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : oracle::all_partitions(g.size()))
    best = std::min(best, oracle::two_level_entropy(g.adjacency(), p));
  return best;
}

}  // namespace

TEST_CASE("greedy on C4 pairs up adjacent vertices") {
  const auto g = fixtures::c4();
  const auto r = minimize_traced(g);
  CHECK(r.flat_entropy == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(std::abs(r.entropy - 1.5) < 1e-12);
  CHECK(std::abs(structural_entropy(g, r.tree) - r.entropy) < 1e-12);
  CHECK(r.tree.height() == 2);
  REQUIRE_FALSE(r.trace.empty());
  CHECK(r.trace.front().op == TreeOp::Combine);
  CHECK(r.trace.front().first_vertex == 0);
  CHECK(r.trace.front().second_vertex == 1);
}

TEST_CASE("greedy on the barbell") {
  const auto g = fixtures::barbell();
  SUBCASE("bounded height recovers the triangles") {
    const auto r = minimize_traced(g, {.max_height = 2});
    CHECK(std::abs(r.entropy - kBarbellTriangles) < 1e-9);
    CHECK(std::abs(r.entropy - 1.699518) < 1e-5);
    CHECK(r.tree.height() <= 2);
    CHECK(level_partition(r.tree, 1) ==
          std::vector<std::vector<std::size_t>>{{0, 1, 2}, {3, 4, 5}});
    CHECK(r.compressions.size() == 2);
    for (const auto& c : r.compressions) CHECK(c.delta > 0.0);
  }
  SUBCASE("unbounded run goes deeper and lower") {
    const auto r = minimize_traced(g);
    CHECK(std::abs(r.entropy - kBarbellUnbounded) < 1e-9);
    CHECK(r.entropy < kBarbellTriangles);
    CHECK(r.compressions.empty());
  }
}

TEST_CASE("trivial graphs") {
  const Graph one(Matrix::Zero(1, 1), false);
  const auto r = minimize_traced(one);
  CHECK(r.trace.empty());
  CHECK(r.tree == flat_tree(one));
  CHECK(r.entropy == 0.0);

  const Graph empty(Matrix::Zero(4, 4), false);
  CHECK(minimize_traced(empty).entropy == 0.0);

  CHECK_THROWS_AS(minimize(fixtures::c4(), {.max_height = 0}), std::invalid_argument);
}

TEST_CASE("greedy trace strictly decreases and every tree is valid") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto g = fixtures::community(seed, 24, 3);
    std::size_t seen = 0;
    const auto r = minimize_traced(g, {.max_height = 3}, [&](const EncodingTree& t) {
      ++seen;
      const auto report = validate(t, g);
      CHECK_MESSAGE(report.ok(), report.summary());
    });
    CHECK(seen == 1 + r.trace.size() + r.compressions.size());
    double prev = r.flat_entropy;
    for (const auto& s : r.trace) {
      CHECK(s.delta < 0.0);
      CHECK(s.entropy < prev);
      CHECK(std::abs((prev + s.delta) - s.entropy) < 1e-9);
      prev = s.entropy;
    }
    CHECK(r.tree.height() <= 3);
    CHECK(std::abs(structural_entropy(g, r.tree) - r.entropy) < 1e-9);
  }
}

TEST_CASE("height bound holds across limits") {
  const auto g = fixtures::community(99, 30, 3);
  for (std::size_t h = 1; h <= 4; ++h) {
    const auto r = minimize_traced(g, {.max_height = h});
    CHECK(r.tree.height() <= h);
    CHECK(validate(r.tree, g).ok());
    if (h == 1) CHECK(r.entropy == doctest::Approx(r.flat_entropy).epsilon(1e-12));
  }
}

TEST_CASE("exhaustive two-level oracle") {
  SUBCASE("partition counts follow Bell numbers") {
    CHECK(oracle::all_partitions(4).size() == 15);
    CHECK(oracle::all_partitions(6).size() == 203);
  }
  SUBCASE("C4") {
    const auto r = exhaustive_min_2level(fixtures::c4());
    CHECK(std::abs(r.entropy - 1.5) < 1e-12);
    CHECK(std::abs(r.entropy - oracle_min(fixtures::c4())) < 1e-12);
    CHECK(r.partition.size() == 2);
  }
  SUBCASE("barbell") {
    const auto r = exhaustive_min_2level(fixtures::barbell());
    CHECK(std::abs(r.entropy - kBarbellTriangles) < 1e-12);
    CHECK(r.partition == std::vector<std::vector<std::size_t>>{{0, 1, 2}, {3, 4, 5}});
    CHECK(std::abs(structural_entropy(fixtures::barbell(), r.tree) - r.entropy) < 1e-12);
  }
  SUBCASE("single edge keeps the flat tree") {
    const auto r = exhaustive_min_2level(fixtures::p2());
    CHECK(r.entropy == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(r.partition.size() == 2);
  }
  SUBCASE("random graphs agree with brute force") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto g = fixtures::community(seed, 7, 2, 0.6, 0.2);
      CHECK(std::abs(exhaustive_min_2level(g).entropy - oracle_min(g)) < 1e-12);
    }
  }
  SUBCASE("refuses large graphs") {
    const auto g = synth_graph(SynthKind::Cycle, {.n = 11}, 0);
    CHECK_THROWS_AS(exhaustive_min_2level(g), std::invalid_argument);
  }
}

TEST_CASE("greedy with height 2 never beats the exhaustive optimum") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto g = fixtures::community(seed, 9, 3, 0.7, 0.1);
    const double greedy = minimize_traced(g, {.max_height = 2}).entropy;
    CHECK(greedy >= exhaustive_min_2level(g).entropy - 1e-12);
  }
}

TEST_CASE("minimize is deterministic") {
  const auto g = fixtures::community(5, 30, 3);
  CHECK(minimize(g).to_json() == minimize(g).to_json());
}
