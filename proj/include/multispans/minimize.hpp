#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "multispans/encoding_tree.hpp"

namespace multispans {

struct MinimizeConfig {
  // Unbounded when empty. A bounded run compresses the greedy result.
  std::optional<std::size_t> max_height;
  double tol = 1e-12;
};

struct GreedyStep {
  std::size_t iteration;
  TreeOp op;
  std::size_t first_vertex;   // smaller of the two nodes' minimum vertices
  std::size_t second_vertex;  // larger of the two
  double delta;
  double entropy;  // after the step
};

struct CompressionStep {
  std::size_t min_vertex;  // identifies the removed node
  double delta;
  double entropy;
};

struct MinimizeResult {
  EncodingTree tree;
  double flat_entropy;
  double entropy;
  std::vector<GreedyStep> trace;  // strictly decreasing entropy
  std::vector<CompressionStep> compressions;
};

using TreeObserver = std::function<void(const EncodingTree&)>;

// Greedy structural-entropy minimization from the flat tree. Each iteration
// applies the sibling pair and operator with the most negative delta until
// no candidate improves by more than tol. With max_height set, internal
// nodes above too-deep leaves are then removed one at a time, cheapest
// first, until the height fits. The observer sees every intermediate tree.
MinimizeResult minimize_traced(const Graph& g, const MinimizeConfig& config = {},
                               const TreeObserver& observer = {});

EncodingTree minimize(const Graph& g, const MinimizeConfig& config = {});

inline constexpr std::size_t kExhaustiveMaxVertices = 10;

struct OracleResult {
  EncodingTree tree;
  double entropy;
  std::vector<std::vector<std::size_t>> partition;
};

// Minimum-entropy 2-level tree over all set partitions of the vertices.
// Ties keep the earlier candidate; the all-singletons partition goes first.
OracleResult exhaustive_min_2level(const Graph& g);

}  // namespace multispans
