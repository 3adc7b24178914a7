#include "multispans/encoding_tree.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "multispans/error.hpp"

namespace multispans {

namespace {

// Avoids copying undirected graphs when a symmetric view is needed.
class SymmetricView {
 public:
  explicit SymmetricView(const Graph& g) {
    if (g.directed()) owned_.emplace(g.symmetrized());
    ptr_ = owned_ ? &*owned_ : &g;
  }
  const Graph& get() const { return *ptr_; }

 private:
  std::optional<Graph> owned_;
  const Graph* ptr_;
};

double cut_of(const Graph& sym, const std::vector<std::size_t>& set) {
  std::vector<char> inside(sym.size(), 0);
  for (auto v : set) inside[v] = 1;
  double cut = 0.0;
  for (auto v : set)
    for (std::size_t j = 0; j < sym.size(); ++j)
      if (!inside[j]) cut += sym.weight(v, j);
  return cut;
}

double volume_of(const Graph& sym, const std::vector<std::size_t>& set) {
  double vol = 0.0;
  for (auto v : set) vol += degree(sym, v);
  return vol;
}

}  // namespace

EncodingTree EncodingTree::flat(const Graph& g) {
  const SymmetricView view(g);
  const Graph& sym = view.get();
  EncodingTree t;
  const std::size_t n = sym.size();
  t.nodes_.resize(n + 1);
  t.root_ = n;
  t.leaf_of_.resize(n);
  auto& root = t.nodes_[n];
  root.volume = volume(sym);
  for (std::size_t v = 0; v < n; ++v) {
    auto& leaf = t.nodes_[v];
    leaf.parent = n;
    leaf.vertex = v;
    leaf.cut = degree(sym, v);
    leaf.volume = leaf.cut;
    root.children.push_back(v);
    t.leaf_of_[v] = v;
  }
  return t;
}

EncodingTree EncodingTree::two_level(
    const Graph& g, const std::vector<std::vector<std::size_t>>& blocks) {
  const SymmetricView view(g);
  EncodingTree t = flat(view.get());
  std::vector<int> hits(t.vertex_count(), 0);
  auto& root_children = t.nodes_[t.root_].children;
  root_children.clear();
  for (const auto& block : blocks) {
    for (auto v : block) {
      if (v >= hits.size() || hits[v]++)
        throw std::invalid_argument("blocks must partition the vertex set");
    }
    if (block.size() == 1) {
      t.nodes_[t.root_].children.push_back(block.front());
      continue;
    }
    const NodeId id = t.nodes_.size();
    TreeNode node;
    node.parent = t.root_;
    node.children.assign(block.begin(), block.end());
    node.volume = volume_of(view.get(), block);
    node.cut = cut_of(view.get(), block);
    t.nodes_.push_back(std::move(node));
    for (auto v : block) t.nodes_[v].parent = id;
    t.nodes_[t.root_].children.push_back(id);
  }
  for (int h : hits)
    if (h != 1) throw std::invalid_argument("blocks must partition the vertex set");
  return t;
}

EncodingTree flat_tree(const Graph& g) { return EncodingTree::flat(g); }

std::vector<NodeId> EncodingTree::live_nodes() const {
  std::vector<NodeId> ids;
  for (NodeId i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].alive) ids.push_back(i);
  return ids;
}

std::vector<std::size_t> EncodingTree::vertices(NodeId id) const {
  std::vector<std::size_t> out;
  std::vector<NodeId> stack{id};
  while (!stack.empty()) {
    const auto& n = nodes_.at(stack.back());
    stack.pop_back();
    if (n.vertex) out.push_back(*n.vertex);
    for (auto c : n.children) stack.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t EncodingTree::min_vertex(NodeId id) const {
  const auto set = vertices(id);
  return set.empty() ? std::numeric_limits<std::size_t>::max() : set.front();
}

std::size_t EncodingTree::depth(NodeId id) const {
  std::size_t d = 0;
  for (auto p = nodes_.at(id).parent; p; p = nodes_.at(*p).parent) ++d;
  return d;
}

std::size_t EncodingTree::height() const {
  std::size_t h = 0;
  for (auto leaf : leaf_of_) h = std::max(h, depth(leaf));
  return h;
}

std::vector<NodeId> EncodingTree::ancestors(NodeId id) const {
  std::vector<NodeId> out;
  for (auto p = nodes_.at(id).parent; p; p = nodes_.at(*p).parent)
    out.push_back(*p);
  return out;
}

void EncodingTree::check_siblings(NodeId a, NodeId b) const {
  if (!is_alive(a) || !is_alive(b))
    throw std::invalid_argument("operator on a missing node");
  if (a == b) throw std::invalid_argument("operator needs two distinct nodes");
  if (a == root_ || b == root_)
    throw std::invalid_argument("the root has no siblings");
  if (nodes_[a].parent != nodes_[b].parent)
    throw std::invalid_argument("operator needs sibling nodes");
}

NodeId EncodingTree::combine_in_place(const Graph& sym, NodeId a, NodeId b) {
  check_siblings(a, b);
  const NodeId p = *nodes_[a].parent;
  const NodeId gamma = nodes_.size();
  TreeNode node;
  node.parent = p;
  node.children = {a, b};
  node.volume = nodes_[a].volume + nodes_[b].volume;
  nodes_.push_back(std::move(node));
  nodes_[a].parent = gamma;
  nodes_[b].parent = gamma;

  auto& siblings = nodes_[p].children;
  auto first = std::find_if(siblings.begin(), siblings.end(),
                            [&](NodeId c) { return c == a || c == b; });
  const NodeId other = *first == a ? b : a;
  *first = gamma;
  siblings.erase(std::find(siblings.begin(), siblings.end(), other));
  nodes_[gamma].cut = cut_of(sym, vertices(gamma));
  return gamma;
}

NodeId EncodingTree::merge_in_place(const Graph& sym, NodeId a, NodeId b) {
  check_siblings(a, b);
  if (nodes_[a].is_leaf() || nodes_[b].is_leaf())
    throw std::invalid_argument("merge needs two non-leaf nodes");
  const NodeId p = *nodes_[a].parent;
  const NodeId gamma = nodes_.size();
  TreeNode node;
  node.parent = p;
  node.children = nodes_[a].children;
  node.children.insert(node.children.end(), nodes_[b].children.begin(),
                       nodes_[b].children.end());
  node.volume = nodes_[a].volume + nodes_[b].volume;
  nodes_.push_back(std::move(node));
  for (auto c : nodes_[gamma].children) nodes_[c].parent = gamma;

  auto& siblings = nodes_[p].children;
  auto first = std::find_if(siblings.begin(), siblings.end(),
                            [&](NodeId c) { return c == a || c == b; });
  const NodeId other = *first == a ? b : a;
  *first = gamma;
  siblings.erase(std::find(siblings.begin(), siblings.end(), other));
  for (NodeId dead : {a, b}) {
    nodes_[dead] = TreeNode{};
    nodes_[dead].alive = false;
  }
  nodes_[gamma].cut = cut_of(sym, vertices(gamma));
  return gamma;
}

void EncodingTree::remove_in_place(NodeId id) {
  if (!is_alive(id) || id == root_ || nodes_[id].is_leaf())
    throw std::invalid_argument("only internal non-root nodes can be removed");
  const NodeId p = *nodes_[id].parent;
  auto& siblings = nodes_[p].children;
  auto pos = std::find(siblings.begin(), siblings.end(), id);
  const auto kids = nodes_[id].children;
  for (auto c : kids) nodes_[c].parent = p;
  pos = siblings.erase(pos);
  siblings.insert(pos, kids.begin(), kids.end());
  nodes_[id] = TreeNode{};
  nodes_[id].alive = false;
}

nlohmann::json EncodingTree::to_json() const {
  nlohmann::json nodes = nlohmann::json::array();
  for (NodeId i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (!n.alive) continue;
    nlohmann::json j;
    j["id"] = i;
    j["parent"] = n.parent ? nlohmann::json(*n.parent) : nlohmann::json(nullptr);
    j["children"] = n.children;
    j["vertex"] = n.vertex ? nlohmann::json(*n.vertex) : nlohmann::json(nullptr);
    j["g"] = n.cut;
    j["V"] = n.volume;
    nodes.push_back(std::move(j));
  }
  return {{"root", root_}, {"vertices", leaf_of_.size()}, {"nodes", nodes}};
}

EncodingTree EncodingTree::from_json(const nlohmann::json& j) {
  try {
    EncodingTree t;
    t.root_ = j.at("root").get<NodeId>();
    const auto n = j.at("vertices").get<std::size_t>();
    NodeId max_id = t.root_;
    for (const auto& jn : j.at("nodes")) max_id = std::max(max_id, jn.at("id").get<NodeId>());
    t.nodes_.assign(max_id + 1, TreeNode{});
    for (auto& node : t.nodes_) node.alive = false;
    t.leaf_of_.assign(n, std::numeric_limits<NodeId>::max());
    for (const auto& jn : j.at("nodes")) {
      const auto id = jn.at("id").get<NodeId>();
      TreeNode node;
      if (!jn.at("parent").is_null()) node.parent = jn.at("parent").get<NodeId>();
      node.children = jn.at("children").get<std::vector<NodeId>>();
      if (!jn.at("vertex").is_null()) {
        node.vertex = jn.at("vertex").get<std::size_t>();
        if (*node.vertex >= n) throw InputError("tree leaf vertex out of range");
        if (t.leaf_of_[*node.vertex] == std::numeric_limits<NodeId>::max())
          t.leaf_of_[*node.vertex] = id;
      }
      node.cut = jn.at("g").get<double>();
      node.volume = jn.at("V").get<double>();
      for (auto c : node.children)
        if (c > max_id) throw InputError("tree child id out of range");
      t.nodes_[id] = std::move(node);
    }
    for (auto leaf : t.leaf_of_)
      if (leaf == std::numeric_limits<NodeId>::max())
        throw InputError("tree is missing a leaf for some vertex");
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed tree JSON: ") + e.what());
  }
}

double entropy_term(double cut, double vol, double volume_parent,
                    double graph_volume) {
  if (graph_volume <= 0.0 || cut == 0.0 || vol == volume_parent) return 0.0;
  return -(cut / graph_volume) * std::log2(vol / volume_parent);
}

double node_entropy(const Graph& g, const EncodingTree& t, NodeId a) {
  if (a == t.root()) throw std::invalid_argument("node entropy of the root is undefined");
  const auto& node = t.node(a);
  return entropy_term(node.cut, node.volume, t.node(*node.parent).volume,
                      volume(g));
}

double cached_entropy(const EncodingTree& t, double graph_volume) {
  double h = 0.0;
  for (auto id : t.live_nodes()) {
    if (id == t.root()) continue;
    const auto& node = t.node(id);
    h += entropy_term(node.cut, node.volume, t.node(*node.parent).volume,
                      graph_volume);
  }
  return h;
}

double structural_entropy(const Graph& g, const EncodingTree& t) {
  const auto report = validate(t, g);
  if (!report.ok()) throw InputError("invalid encoding tree: " + report.summary());
  return cached_entropy(t, volume(g));
}

double cross_weight(const Graph& sym, const EncodingTree& t, NodeId a,
                    NodeId b) {
  double w = 0.0;
  const auto va = t.vertices(a);
  const auto vb = t.vertices(b);
  for (auto i : va)
    for (auto j : vb) w += sym.weight(i, j);
  return w;
}

EncodingTree combine(const Graph& g, const EncodingTree& t, NodeId a, NodeId b) {
  const SymmetricView view(g);
  EncodingTree out = t;
  out.combine_in_place(view.get(), a, b);
  return out;
}

EncodingTree merge(const Graph& g, const EncodingTree& t, NodeId a, NodeId b) {
  const SymmetricView view(g);
  EncodingTree out = t;
  out.merge_in_place(view.get(), a, b);
  return out;
}

std::string to_string(TreeOp op) {
  return op == TreeOp::Combine ? "combine" : "merge";
}

namespace detail {

double delta_from_weight(const EncodingTree& t, TreeOp op, NodeId a, NodeId b,
                         double cross, double graph_volume) {
  const auto& na = t.node(a);
  const auto& nb = t.node(b);
  const double vp = t.node(*na.parent).volume;
  const double g_new = na.cut + nb.cut - 2.0 * cross;
  const double v_new = na.volume + nb.volume;
  const double vol = graph_volume;

  double before = entropy_term(na.cut, na.volume, vp, vol) +
                  entropy_term(nb.cut, nb.volume, vp, vol);
  double after = entropy_term(g_new, v_new, vp, vol);
  if (op == TreeOp::Combine) {
    after += entropy_term(na.cut, na.volume, v_new, vol) +
             entropy_term(nb.cut, nb.volume, v_new, vol);
  } else {
    for (const auto* parent : {&na, &nb})
      for (auto c : parent->children) {
        const auto& nc = t.node(c);
        before += entropy_term(nc.cut, nc.volume, parent->volume, vol);
        after += entropy_term(nc.cut, nc.volume, v_new, vol);
      }
  }
  return after - before;
}

}  // namespace detail

double entropy_delta(const Graph& g, const EncodingTree& t, TreeOp op,
                     NodeId a, NodeId b) {
  if (!t.is_alive(a) || !t.is_alive(b) || a == b || a == t.root() ||
      b == t.root() || t.node(a).parent != t.node(b).parent)
    throw std::invalid_argument("entropy_delta needs two distinct siblings");
  if (op == TreeOp::Merge && (t.node(a).is_leaf() || t.node(b).is_leaf()))
    throw std::invalid_argument("merge needs two non-leaf nodes");
  const SymmetricView view(g);
  return detail::delta_from_weight(t, op, a, b, cross_weight(view.get(), t, a, b),
                                   volume(g));
}

bool ValidationReport::has(const std::string& invariant) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const Violation& v) { return v.invariant == invariant; });
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    if (i) os << "; ";
    os << violations[i].invariant << ": " << violations[i].detail;
  }
  return os.str();
}

ValidationReport validate(const EncodingTree& t, const Graph& g) {
  ValidationReport report;
  auto fail = [&](std::string inv, std::string detail) {
    report.violations.push_back({std::move(inv), std::move(detail)});
  };
  const std::size_t n = g.size();
  if (t.vertex_count() != n) {
    fail("coverage", "tree covers " + std::to_string(t.vertex_count()) +
                         " vertices, graph has " + std::to_string(n));
    return report;
  }
  if (!t.is_alive(t.root()) || t.node(t.root()).parent) {
    fail("structure", "root missing or has a parent");
    return report;
  }

  // Walk from the root; every alive node must be reached exactly once.
  std::vector<int> seen(t.arena_size(), 0);
  std::vector<int> vertex_hits(n, 0);
  std::vector<NodeId> stack{t.root()};
  bool structure_ok = true;
  while (!stack.empty()) {
    const NodeId id = stack.back();
    stack.pop_back();
    if (id >= t.arena_size() || !t.is_alive(id)) {
      fail("structure", "child " + std::to_string(id) + " does not exist");
      structure_ok = false;
      continue;
    }
    if (seen[id]++) {
      fail("structure", "node " + std::to_string(id) + " reached twice");
      structure_ok = false;
      continue;
    }
    const auto& node = t.node(id);
    if (node.is_leaf()) {
      if (!node.vertex) {
        fail("structure", "leaf " + std::to_string(id) + " holds no vertex");
        structure_ok = false;
      } else if (*node.vertex >= n) {
        fail("coverage", "vertex id out of range");
        structure_ok = false;
      } else {
        ++vertex_hits[*node.vertex];
      }
    } else if (node.vertex) {
      fail("structure", "internal node " + std::to_string(id) + " holds a vertex");
      structure_ok = false;
    }
    for (auto c : node.children) {
      if (c < t.arena_size() && t.is_alive(c) && t.node(c).parent != id) {
        fail("structure", "parent link of node " + std::to_string(c) + " is inconsistent");
        structure_ok = false;
      }
      stack.push_back(c);
    }
  }
  for (auto id : t.live_nodes())
    if (!seen[id]) {
      fail("structure", "node " + std::to_string(id) + " is unreachable from the root");
      structure_ok = false;
    }
  for (std::size_t v = 0; v < n; ++v) {
    if (vertex_hits[v] > 1) {
      fail("disjointness", "vertex " + std::to_string(v) + " appears in several leaves");
      structure_ok = false;
    } else if (vertex_hits[v] == 0) {
      fail("coverage", "vertex " + std::to_string(v) + " is in no leaf");
      structure_ok = false;
    }
  }
  for (std::size_t v = 0; v < n && structure_ok; ++v) {
    const auto leaf = t.leaf_of(v);
    if (!t.is_alive(leaf) || t.node(leaf).vertex != v) {
      fail("structure", "leaf index of vertex " + std::to_string(v) + " is stale");
      structure_ok = false;
    }
  }
  if (!structure_ok) return report;

  const SymmetricView view(g);
  const double tol = 1e-9 * std::max(1.0, volume(g));
  for (auto id : t.live_nodes()) {
    const auto set = t.vertices(id);
    const auto& node = t.node(id);
    const double vol = volume_of(view.get(), set);
    const double cut = cut_of(view.get(), set);
    if (std::abs(vol - node.volume) > tol)
      fail("cache", "node " + std::to_string(id) + " has a stale V");
    if (std::abs(cut - node.cut) > tol)
      fail("cache", "node " + std::to_string(id) + " has a stale g");
  }
  return report;
}

std::vector<std::vector<std::size_t>> level_partition(const EncodingTree& t,
                                                      std::size_t level) {
  const auto h = t.height();
  if (level == 0 || level > h)
    throw std::out_of_range("level must satisfy 0 < l <= height (" +
                            std::to_string(h) + ")");
  std::vector<std::vector<std::size_t>> parts;
  for (auto id : t.live_nodes()) {
    const auto d = t.depth(id);
    if (d == level || (d < level && t.node(id).is_leaf()))
      parts.push_back(t.vertices(id));
  }
  std::sort(parts.begin(), parts.end());
  return parts;
}

}  // namespace multispans
