#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "multispans/encoding_tree.hpp"
#include "multispans/error.hpp"
#include "multispans/rng.hpp"
#include "oracles.hpp"

using namespace multispans;

namespace {

// Frozen by the brute-force oracle (oracle::two_level_entropy, also checked
// against an independent Python evaluation).
constexpr double kBarbellFlat = 2.556656707462823;
constexpr double kBarbellTriangles = 1.6995138503199656;

EncodingTree barbell_triangles() {
  return EncodingTree::two_level(fixtures::barbell(), {{0, 1, 2}, {3, 4, 5}});
}

NodeId parent_of(const EncodingTree& t, NodeId id) { return *t.node(id).parent; }

}  // namespace

TEST_CASE("flat tree") {
  SUBCASE("C4") {
    const auto t = flat_tree(fixtures::c4());
    CHECK(t.node(t.root()).children.size() == 4);
    for (std::size_t v = 0; v < 4; ++v) {
      const auto& leaf = t.node(t.leaf_of(v));
      CHECK(leaf.cut == 2.0);
      CHECK(leaf.volume == 2.0);
      CHECK(leaf.vertex == v);
    }
    CHECK(t.height() == 1);
  }
  SUBCASE("single vertex") {
    const Graph g(Matrix::Zero(1, 1), false);
    const auto t = flat_tree(g);
    CHECK(t.node(t.root()).children.size() == 1);
    CHECK(structural_entropy(g, t) == 0.0);
  }
  SUBCASE("barbell caches follow degrees") {
    const auto t = flat_tree(fixtures::barbell());
    const double expected[] = {2, 2, 3, 3, 2, 2};
    for (std::size_t v = 0; v < 6; ++v) {
      CHECK(t.node(t.leaf_of(v)).cut == expected[v]);
      CHECK(t.node(t.leaf_of(v)).volume == expected[v]);
    }
    CHECK(t.node(t.root()).volume == 14.0);
  }
}

TEST_CASE("node entropy") {
  const auto c4 = fixtures::c4();
  const auto flat = flat_tree(c4);
  CHECK(node_entropy(c4, flat, flat.leaf_of(0)) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(node_entropy(c4, flat, flat.root()), std::invalid_argument);

  const Graph two = Graph::from_edges(4, {{0, 1, 1.0}, {2, 3, 1.0}}, false);
  const auto t = EncodingTree::two_level(two, {{0, 1}, {2, 3}});
  const NodeId comp = parent_of(t, t.leaf_of(0));
  CHECK(t.node(comp).cut == 0.0);
  CHECK(node_entropy(two, t, comp) == 0.0);

  const auto bb = fixtures::barbell();
  const auto tri = barbell_triangles();
  CHECK(node_entropy(bb, tri, parent_of(tri, tri.leaf_of(0))) ==
        doctest::Approx(1.0 / 14.0).epsilon(1e-14));
}

TEST_CASE("structural entropy") {
  const auto c4 = fixtures::c4();
  CHECK(structural_entropy(c4, flat_tree(c4)) == doctest::Approx(2.0).epsilon(1e-15));

  const auto bb = fixtures::barbell();
  const double tri = structural_entropy(bb, barbell_triangles());
  CHECK(std::abs(tri - kBarbellTriangles) < 1e-12);
  CHECK(std::abs(tri - oracle::two_level_entropy(bb.adjacency(), {{0, 1, 2}, {3, 4, 5}})) < 1e-12);
  CHECK(std::abs(tri - 1.699518) < 1e-5);  // 6-decimal reference value
  CHECK(std::abs(structural_entropy(bb, flat_tree(bb)) - kBarbellFlat) < 1e-12);
}

TEST_CASE("flat-tree entropy equals the degree-distribution entropy") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = fixtures::community(seed, 10 + seed * 2, 3, 0.4, 0.05);
    const double vol = volume(g);
    double expected = 0.0;
    for (std::size_t v = 0; v < g.size(); ++v) {
      const double p = degree(g, v) / vol;
      if (p > 0) expected -= p * std::log2(p);
    }
    CHECK(std::abs(structural_entropy(g, flat_tree(g)) - expected) <= 1e-9);
  }
}

TEST_CASE("combine") {
  const auto c4 = fixtures::c4();
  const auto flat = flat_tree(c4);
  const auto t = combine(c4, flat, flat.leaf_of(0), flat.leaf_of(1));
  const NodeId gamma = parent_of(t, t.leaf_of(0));
  CHECK(gamma == parent_of(t, t.leaf_of(1)));
  CHECK(t.node(gamma).volume == 4.0);
  CHECK(t.node(gamma).cut == 2.0);
  CHECK(parent_of(t, gamma) == t.root());
  CHECK(validate(t, c4).ok());
  // Leaves of the other pair are untouched.
  CHECK(t.node(t.leaf_of(2)) == flat.node(flat.leaf_of(2)));

  CHECK_THROWS_AS(combine(c4, flat, flat.root(), flat.leaf_of(0)), std::invalid_argument);
  CHECK_THROWS_AS(combine(c4, flat, flat.leaf_of(0), flat.leaf_of(0)), std::invalid_argument);
  CHECK_THROWS_AS(combine(c4, t, gamma, t.leaf_of(0)), std::invalid_argument);

  const auto bb = fixtures::barbell();
  auto tb = flat_tree(bb);
  tb = combine(bb, tb, tb.leaf_of(0), tb.leaf_of(1));
  tb = combine(bb, tb, parent_of(tb, tb.leaf_of(0)), tb.leaf_of(2));
  const NodeId tri = parent_of(tb, tb.leaf_of(2));
  CHECK(tb.node(tri).cut == 1.0);
  CHECK(tb.node(tri).volume == 7.0);
  CHECK(validate(tb, bb).ok());
}

TEST_CASE("merge") {
  const auto c4 = fixtures::c4();
  const auto pairs = EncodingTree::two_level(c4, {{0, 1}, {2, 3}});
  const NodeId a = parent_of(pairs, pairs.leaf_of(0));
  const NodeId b = parent_of(pairs, pairs.leaf_of(2));
  const auto merged = merge(c4, pairs, a, b);
  const NodeId all = parent_of(merged, merged.leaf_of(0));
  CHECK(merged.vertices(all) == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(merged.node(all).children.size() == 4);
  CHECK_FALSE(merged.is_alive(a));
  CHECK(validate(merged, c4).ok());

  const auto flat = flat_tree(c4);
  CHECK_THROWS_AS(merge(c4, flat, flat.leaf_of(0), flat.leaf_of(1)), std::invalid_argument);

  const auto bb = fixtures::barbell();
  const auto tri = barbell_triangles();
  const auto one = merge(bb, tri, parent_of(tri, tri.leaf_of(0)), parent_of(tri, tri.leaf_of(3)));
  const NodeId fused = parent_of(one, one.leaf_of(0));
  CHECK(one.node(fused).cut == 0.0);
  CHECK(one.node(fused).volume == 14.0);
  CHECK(structural_entropy(bb, one) > structural_entropy(bb, tri));
}

TEST_CASE("entropy delta") {
  const auto c4 = fixtures::c4();
  const auto flat = flat_tree(c4);
  const double d = entropy_delta(c4, flat, TreeOp::Combine, flat.leaf_of(0), flat.leaf_of(1));
  CHECK(d == doctest::Approx(-0.25).epsilon(1e-14));
  const auto after = combine(c4, flat, flat.leaf_of(0), flat.leaf_of(1));
  CHECK(structural_entropy(c4, after) == doctest::Approx(1.75).epsilon(1e-14));

  SUBCASE("zero-cut components") {
    const Graph g = Graph::from_edges(4, {{0, 1, 1.0}, {2, 3, 1.0}}, false);
    const auto t = EncodingTree::two_level(g, {{0, 1}, {2, 3}});
    const NodeId a = parent_of(t, t.leaf_of(0));
    const NodeId b = parent_of(t, t.leaf_of(2));
    for (auto op : {TreeOp::Combine, TreeOp::Merge}) {
      const auto next = op == TreeOp::Combine ? combine(g, t, a, b) : merge(g, t, a, b);
      const double full = oracle::tree_entropy(g.adjacency(), oracle::from_json(next.to_json())) -
                          oracle::tree_entropy(g.adjacency(), oracle::from_json(t.to_json()));
      CHECK(std::abs(entropy_delta(g, t, op, a, b) - full) <= 1e-10);
    }
  }
  SUBCASE("precondition violations") {
    CHECK_THROWS_AS(entropy_delta(c4, flat, TreeOp::Merge, flat.leaf_of(0), flat.leaf_of(1)),
                    std::invalid_argument);
    CHECK_THROWS_AS(entropy_delta(c4, after, TreeOp::Combine, after.leaf_of(0), after.leaf_of(2)),
                    std::invalid_argument);
  }
}

TEST_CASE("entropy delta matches full recomputation on random operator sequences") {
  Rng rng(2024);
  int applied = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = fixtures::community(seed, 16, 3, 0.5, 0.1);
    auto t = flat_tree(g);
    for (int step = 0; step < 12; ++step) {
      std::vector<std::pair<NodeId, NodeId>> pairs;
      for (auto p : t.live_nodes()) {
        const auto& kids = t.node(p).children;
        for (std::size_t i = 0; i < kids.size(); ++i)
          for (std::size_t j = i + 1; j < kids.size(); ++j) pairs.emplace_back(kids[i], kids[j]);
      }
      if (pairs.empty()) break;
      const auto [a, b] = pairs[rng.next() % pairs.size()];
      const bool can_merge = !t.node(a).is_leaf() && !t.node(b).is_leaf();
      const TreeOp op = can_merge && rng.uniform() < 0.5 ? TreeOp::Merge : TreeOp::Combine;
      const double local = entropy_delta(g, t, op, a, b);
      auto next = op == TreeOp::Combine ? combine(g, t, a, b) : merge(g, t, a, b);
      const double full = oracle::tree_entropy(g.adjacency(), oracle::from_json(next.to_json())) -
                          oracle::tree_entropy(g.adjacency(), oracle::from_json(t.to_json()));
      CHECK(std::abs(local - full) <= 1e-10);
      REQUIRE(validate(next, g).ok());
      t = std::move(next);
      ++applied;
    }
  }
  CHECK(applied > 50);
}

TEST_CASE("combine then merge keeps caches valid") {
  const auto g = fixtures::community(4, 12, 2, 0.6, 0.1);
  auto t = EncodingTree::two_level(g, {{0, 1, 2}, {3, 4}, {5, 6, 7}, {8, 9, 10, 11}});
  const NodeId a = *t.node(t.leaf_of(0)).parent;
  const NodeId b = *t.node(t.leaf_of(3)).parent;
  const NodeId c = *t.node(t.leaf_of(5)).parent;
  t = combine(g, t, a, b);
  const NodeId gamma = *t.node(a).parent;
  t = merge(g, t, gamma, c);
  CHECK(validate(t, g).ok());
}

TEST_CASE("validate reports violations by invariant") {
  const auto g = fixtures::c4();
  CHECK(validate(flat_tree(g), g).ok());

  SUBCASE("vertex in two leaves") {
    auto j = flat_tree(g).to_json();
    // Extra leaf for vertex 0 hung under the root.
    j["nodes"].push_back({{"id", 5}, {"parent", 4}, {"children", nlohmann::json::array()},
                          {"vertex", 0}, {"g", 2.0}, {"V", 2.0}});
    for (auto& n : j["nodes"])
      if (n["id"] == 4) n["children"].push_back(5);
    const auto report = validate(EncodingTree::from_json(j), g);
    CHECK(report.has("disjointness"));
  }
  SUBCASE("stale volume cache") {
    auto j = flat_tree(g).to_json();
    for (auto& n : j["nodes"])
      if (n["id"] == 0) n["V"] = 3.0;
    const auto report = validate(EncodingTree::from_json(j), g);
    CHECK(report.has("cache"));
    CHECK_THROWS_AS(structural_entropy(g, EncodingTree::from_json(j)), InputError);
  }
  SUBCASE("broken parent link") {
    auto j = EncodingTree::two_level(g, {{0, 1}, {2, 3}}).to_json();
    for (auto& n : j["nodes"])
      if (n["id"] == 0) n["parent"] = 4;
    CHECK(validate(EncodingTree::from_json(j), g).has("structure"));
  }
  SUBCASE("wrong graph size") {
    CHECK(validate(flat_tree(fixtures::barbell()), g).has("coverage"));
  }
}

TEST_CASE("tree JSON round-trips exactly") {
  const auto g = fixtures::community(12, 14, 2, 0.6, 0.1);
  auto t = flat_tree(g);
  t = combine(g, t, t.leaf_of(0), t.leaf_of(1));
  t = combine(g, t, t.leaf_of(2), t.leaf_of(3));
  t = merge(g, t, *t.node(t.leaf_of(0)).parent, *t.node(t.leaf_of(2)).parent);
  const auto j = t.to_json();
  const auto back = EncodingTree::from_json(nlohmann::json::parse(j.dump()));
  CHECK(back == t);
  CHECK(back.to_json() == j);
  CHECK_THROWS_AS(EncodingTree::from_json(nlohmann::json{{"root", 0}}), InputError);
}

TEST_CASE("level partition") {
  const auto bb = fixtures::barbell();
  const auto tri = barbell_triangles();
  CHECK(level_partition(tri, 1) ==
        std::vector<std::vector<std::size_t>>{{0, 1, 2}, {3, 4, 5}});
  const auto flat = flat_tree(bb);
  const auto singles = level_partition(flat, 1);
  CHECK(singles.size() == 6);
  for (const auto& s : singles) CHECK(s.size() == 1);
  CHECK_THROWS_AS(level_partition(tri, 0), std::out_of_range);
  CHECK_THROWS_AS(level_partition(tri, 3), std::out_of_range);

  // Ragged tree: vertex 5 stays a child of the root.
  auto ragged = EncodingTree::two_level(bb, {{0, 1, 2}, {3, 4}, {5}});
  ragged = combine(bb, ragged, ragged.leaf_of(0), ragged.leaf_of(1));
  CHECK(ragged.height() == 3);
  CHECK(level_partition(ragged, 2) ==
        std::vector<std::vector<std::size_t>>{{0, 1}, {2}, {3}, {4}, {5}});
}
