#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "multispans/array_io.hpp"
#include "multispans/encoding_tree.hpp"

namespace multispans {

struct LevelMask {
  // Tree level for hierarchy masks, empty for the adjacency mask.
  std::optional<std::size_t> level;
  BoolMatrix allow;
};

struct MaskSet {
  std::vector<LevelMask> masks;  // coarse to fine, adjacency last
  std::vector<std::optional<std::size_t>> head_assignment;  // head -> mask

  std::size_t heads() const { return head_assignment.size(); }
  nlohmann::json manifest() const;
};

// allow[i, j] iff v_i and v_j share a node at depth `level`.
LevelMask level_mask(const EncodingTree& t, std::size_t level, std::size_t n);

// Symmetrized nonzero pattern of the original adjacency plus the diagonal.
LevelMask adjacency_mask(const Graph& g);

// Number of masks a tree yields: one per level 1..height-1 plus adjacency.
std::size_t mask_count(const EncodingTree& t);

// Heads 0..L-1 take the masks in order; the remaining heads are unmasked.
// Throws ConstraintError when heads <= L.
MaskSet build_mask_set(const EncodingTree& t, const Graph& g, std::size_t heads);

// Node entropies are floored at this value before any ratio is taken.
inline constexpr double kEntropyFloor = 1e-12;

enum class Direction { Up, Down };

// Up: H(parent) / H(child). Down: H(child) / H(parent). The root's entropy
// is taken as the total structural entropy of the tree.
double relative_entropy_step(const Graph& g, const EncodingTree& t,
                             NodeId child, Direction direction);

// s[i, j]: up-steps from leaf(v_i) to the lowest common ancestor plus
// down-steps from there to leaf(v_j). Diagonal is zero.
Matrix hier_score(const Graph& g, const EncodingTree& t);

}  // namespace multispans
