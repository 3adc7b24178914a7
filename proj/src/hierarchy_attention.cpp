#include "multispans/hierarchy_attention.hpp"

#include <algorithm>
#include <stdexcept>

#include "multispans/error.hpp"

namespace multispans {

LevelMask level_mask(const EncodingTree& t, std::size_t level, std::size_t n) {
  if (t.vertex_count() != n)
    throw std::invalid_argument("level_mask: tree and graph sizes differ");
  if (level == 0 || level >= t.height())
    throw std::out_of_range("mask level must satisfy 0 < l < height (" +
                            std::to_string(t.height()) + ")");
  LevelMask mask{level, BoolMatrix::Constant(n, n, false)};
  for (const auto& part : level_partition(t, level))
    for (auto i : part)
      for (auto j : part) mask.allow(i, j) = true;
  return mask;
}

LevelMask adjacency_mask(const Graph& g) {
  const auto& a = g.adjacency();
  const auto n = a.rows();
  LevelMask mask{std::nullopt, BoolMatrix::Constant(n, n, false)};
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      mask.allow(i, j) = i == j || a(i, j) > 0.0 || a(j, i) > 0.0;
  return mask;
}

std::size_t mask_count(const EncodingTree& t) { return t.height(); }

MaskSet build_mask_set(const EncodingTree& t, const Graph& g, std::size_t heads) {
  const std::size_t l_count = mask_count(t);
  if (heads <= l_count)
    throw ConstraintError("need more heads than masks: heads=" +
                          std::to_string(heads) + ", L=" + std::to_string(l_count));
  MaskSet set;
  for (std::size_t level = 1; level < t.height(); ++level)
    set.masks.push_back(level_mask(t, level, g.size()));
  set.masks.push_back(adjacency_mask(g));
  set.head_assignment.assign(heads, std::nullopt);
  for (std::size_t h = 0; h < set.masks.size(); ++h) set.head_assignment[h] = h;
  return set;
}

nlohmann::json MaskSet::manifest() const {
  nlohmann::json j;
  j["heads"] = heads();
  j["mask_count"] = masks.size();
  nlohmann::json ms = nlohmann::json::array();
  for (std::size_t i = 0; i < masks.size(); ++i) {
    nlohmann::json m;
    m["index"] = i;
    if (masks[i].level) {
      m["source"] = "tree-level";
      m["level"] = *masks[i].level;
    } else {
      m["source"] = "adjacency";
    }
    ms.push_back(m);
  }
  j["masks"] = ms;
  nlohmann::json assign = nlohmann::json::array();
  for (const auto& a : head_assignment)
    assign.push_back(a ? nlohmann::json(*a) : nlohmann::json(nullptr));
  j["head_assignment"] = assign;
  return j;
}

namespace {

// Floored node entropy with H(root) = total structural entropy.
class NodeEntropies {
 public:
  NodeEntropies(const Graph& g, const EncodingTree& t)
      : t_(t), h_(t.arena_size(), 0.0) {
    const double vol = volume(g);
    double total = 0.0;
    for (auto id : t.live_nodes()) {
      if (id == t.root()) continue;
      const auto& n = t.node(id);
      h_[id] = entropy_term(n.cut, n.volume, t.node(*n.parent).volume, vol);
      total += h_[id];
    }
    h_[t.root()] = total;
    for (auto& v : h_) v = std::max(v, kEntropyFloor);
  }

  double operator()(NodeId id) const { return h_.at(id); }

  double step(NodeId child, Direction dir) const {
    const NodeId parent = *t_.node(child).parent;
    return dir == Direction::Up ? h_[parent] / h_[child] : h_[child] / h_[parent];
  }

 private:
  const EncodingTree& t_;
  std::vector<double> h_;
};

}  // namespace

double relative_entropy_step(const Graph& g, const EncodingTree& t,
                             NodeId child, Direction direction) {
  if (!t.is_alive(child) || child == t.root())
    throw std::invalid_argument("relative_entropy_step needs a non-root node");
  return NodeEntropies(g, t).step(child, direction);
}

Matrix hier_score(const Graph& g, const EncodingTree& t) {
  const auto report = validate(t, g);
  if (!report.ok()) throw InputError("invalid encoding tree: " + report.summary());
  const NodeEntropies h(g, t);
  const std::size_t n = g.size();

  std::vector<std::vector<NodeId>> paths(n);  // root ... leaf
  for (std::size_t v = 0; v < n; ++v) {
    auto anc = t.ancestors(t.leaf_of(v));
    paths[v].assign(anc.rbegin(), anc.rend());
    paths[v].push_back(t.leaf_of(v));
  }

  Matrix s = Matrix::Zero(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto& pi = paths[i];
      const auto& pj = paths[j];
      std::size_t k = 0;
      while (k + 1 < pi.size() && k + 1 < pj.size() && pi[k + 1] == pj[k + 1]) ++k;
      double up = 0.0;
      for (std::size_t m = pi.size() - 1; m > k; --m) up += h.step(pi[m], Direction::Up);
      double down = 0.0;
      for (std::size_t m = k + 1; m < pj.size(); ++m) down += h.step(pj[m], Direction::Down);
      s(i, j) = up + down;
    }
  return s;
}

}  // namespace multispans
