#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "multispans/graph.hpp"

namespace multispans {

using NodeId = std::size_t;

struct TreeNode {
  std::optional<NodeId> parent;
  std::vector<NodeId> children;
  std::optional<std::size_t> vertex;  // set on leaves only
  double cut = 0.0;                   // g: weight crossing into the subtree
  double volume = 0.0;                // V: degree sum of the subtree
  bool alive = true;

  bool is_leaf() const { return children.empty(); }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

// Rooted hierarchy over graph vertices with one singleton leaf per vertex.
// Nodes live in an arena; operators that remove nodes leave dead slots so
// that node ids stay stable.
class EncodingTree {
 public:
  // Root with one leaf per vertex, caches filled from the symmetrized graph.
  static EncodingTree flat(const Graph& g);
  // Root over one node per block; singleton blocks stay leaves of the root.
  // Blocks must partition the vertex set.
  static EncodingTree two_level(const Graph& g,
                                const std::vector<std::vector<std::size_t>>& blocks);

  NodeId root() const { return root_; }
  const TreeNode& node(NodeId id) const { return nodes_.at(id); }
  std::size_t arena_size() const { return nodes_.size(); }
  std::size_t vertex_count() const { return leaf_of_.size(); }
  bool is_alive(NodeId id) const { return id < nodes_.size() && nodes_[id].alive; }

  NodeId leaf_of(std::size_t vertex) const { return leaf_of_.at(vertex); }

  // Alive node ids in ascending order.
  std::vector<NodeId> live_nodes() const;
  // Sorted vertex ids under a node.
  std::vector<std::size_t> vertices(NodeId id) const;
  std::size_t min_vertex(NodeId id) const;
  std::size_t depth(NodeId id) const;
  // Maximum leaf depth; a flat tree has height 1.
  std::size_t height() const;
  std::vector<NodeId> ancestors(NodeId id) const;  // parent first, root last

  // In-place edits used by the optimizer. `sym` must be a symmetric graph.
  NodeId combine_in_place(const Graph& sym, NodeId a, NodeId b);
  NodeId merge_in_place(const Graph& sym, NodeId a, NodeId b);
  // Splices the children of an internal non-root node into its parent.
  void remove_in_place(NodeId id);

  nlohmann::json to_json() const;
  // Parses structure only; run validate() to check invariants.
  static EncodingTree from_json(const nlohmann::json& j);

  friend bool operator==(const EncodingTree&, const EncodingTree&) = default;

 private:
  EncodingTree() = default;
  void check_siblings(NodeId a, NodeId b) const;

  std::vector<TreeNode> nodes_;
  NodeId root_ = 0;
  std::vector<NodeId> leaf_of_;
};

EncodingTree flat_tree(const Graph& g);

// One term of the structural entropy sum, in bits:
// -(cut / vol) * log2(V / V_parent), zero when cut = 0 or V = V_parent.
double entropy_term(double cut, double vol, double volume_parent,
                    double graph_volume);

// H^T(G; a) for a non-root node, from cached g and V.
double node_entropy(const Graph& g, const EncodingTree& t, NodeId a);

// Sum of node entropies over all non-root nodes; validates the tree first.
double structural_entropy(const Graph& g, const EncodingTree& t);

// Same sum straight from the caches, no validation.
double cached_entropy(const EncodingTree& t, double graph_volume);

// Total weight between the vertex sets of two nodes.
double cross_weight(const Graph& sym, const EncodingTree& t, NodeId a,
                    NodeId b);

EncodingTree combine(const Graph& g, const EncodingTree& t, NodeId a, NodeId b);
EncodingTree merge(const Graph& g, const EncodingTree& t, NodeId a, NodeId b);

enum class TreeOp { Combine, Merge };

std::string to_string(TreeOp op);

namespace detail {
// entropy_delta with the cross weight between a and b already known.
double delta_from_weight(const EncodingTree& t, TreeOp op, NodeId a, NodeId b,
                         double cross, double graph_volume);
}  // namespace detail

// Entropy change of applying `op` to siblings a and b, evaluated from the
// affected terms only.
double entropy_delta(const Graph& g, const EncodingTree& t, TreeOp op,
                     NodeId a, NodeId b);

struct Violation {
  std::string invariant;  // partition, disjointness, coverage, structure, cache
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  bool has(const std::string& invariant) const;
  std::string summary() const;
};

ValidationReport validate(const EncodingTree& t, const Graph& g);

// Vertex sets of the nodes at depth l (0 < l <= height); leaves shallower
// than l contribute singletons. Sets are ordered by their smallest vertex.
std::vector<std::vector<std::size_t>> level_partition(const EncodingTree& t,
                                                      std::size_t level);

}  // namespace multispans
