#include "multispans/minimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <tuple>

namespace multispans {

namespace {

// Deltas this close are ties and fall back to the lexicographic key.
constexpr double kTieWindow = 1e-12;

struct Candidate {
  TreeOp op;
  NodeId a;
  NodeId b;
  std::size_t lo;
  std::size_t hi;
  double delta;

  auto key() const { return std::tuple(static_cast<int>(op), lo, hi); }
};

bool better(const Candidate& c, const std::optional<Candidate>& best) {
  if (!best) return true;
  if (c.delta < best->delta - kTieWindow) return true;
  if (c.delta > best->delta + kTieWindow) return false;
  return c.key() < best->key();
}

std::optional<Candidate> best_candidate(const Graph& sym, const EncodingTree& t,
                                        double vol) {
  // Vertex sets and minimum vertex per node, reused across all pairs.
  std::vector<std::vector<std::size_t>> sets(t.arena_size());
  for (auto id : t.live_nodes()) sets[id] = t.vertices(id);

  std::optional<Candidate> best;
  for (auto p : t.live_nodes()) {
    const auto& kids = t.node(p).children;
    for (std::size_t i = 0; i < kids.size(); ++i) {
      for (std::size_t j = i + 1; j < kids.size(); ++j) {
        const NodeId a = kids[i];
        const NodeId b = kids[j];
        double cross = 0.0;
        for (auto u : sets[a])
          for (auto v : sets[b]) cross += sym.weight(u, v);
        const auto lo = std::min(sets[a].front(), sets[b].front());
        const auto hi = std::max(sets[a].front(), sets[b].front());
        Candidate c{TreeOp::Combine, a, b, lo, hi,
                    detail::delta_from_weight(t, TreeOp::Combine, a, b, cross, vol)};
        if (better(c, best)) best = c;
        if (!t.node(a).is_leaf() && !t.node(b).is_leaf()) {
          c.op = TreeOp::Merge;
          c.delta = detail::delta_from_weight(t, TreeOp::Merge, a, b, cross, vol);
          if (better(c, best)) best = c;
        }
      }
    }
  }
  return best;
}

double removal_delta(const EncodingTree& t, NodeId x, double vol) {
  const auto& nx = t.node(x);
  const double vp = t.node(*nx.parent).volume;
  double delta = -entropy_term(nx.cut, nx.volume, vp, vol);
  for (auto c : nx.children) {
    const auto& nc = t.node(c);
    delta += entropy_term(nc.cut, nc.volume, vp, vol) -
             entropy_term(nc.cut, nc.volume, nx.volume, vol);
  }
  return delta;
}

}  // namespace

MinimizeResult minimize_traced(const Graph& g, const MinimizeConfig& config,
                               const TreeObserver& observer) {
  if (config.max_height && *config.max_height < 1)
    throw std::invalid_argument("max_height must be at least 1");
  const Graph sym = g.symmetrized();
  const double vol = volume(sym);
  EncodingTree t = EncodingTree::flat(sym);
  const double flat_h = cached_entropy(t, vol);
  MinimizeResult result{t, flat_h, flat_h, {}, {}};
  if (observer) observer(t);
  if (vol <= 0.0) return result;

  double h = flat_h;
  for (std::size_t iter = 1;; ++iter) {
    const auto best = best_candidate(sym, t, vol);
    if (!best || best->delta >= -config.tol) break;
    if (best->op == TreeOp::Combine)
      t.combine_in_place(sym, best->a, best->b);
    else
      t.merge_in_place(sym, best->a, best->b);
    const double next = cached_entropy(t, vol);
    // Guards against a local delta that disagrees with the recomputed sum.
    if (!(next < h - config.tol)) break;
    h = next;
    result.trace.push_back({iter, best->op, best->lo, best->hi, best->delta, h});
    if (observer) observer(t);
  }

  if (config.max_height) {
    const std::size_t limit = *config.max_height;
    while (t.height() > limit) {
      std::set<NodeId> candidates;
      for (std::size_t v = 0; v < t.vertex_count(); ++v) {
        const auto leaf = t.leaf_of(v);
        if (t.depth(leaf) <= limit) continue;
        for (auto a : t.ancestors(leaf))
          if (a != t.root()) candidates.insert(a);
      }
      NodeId pick = *candidates.begin();
      double pick_delta = std::numeric_limits<double>::infinity();
      std::size_t pick_min = std::numeric_limits<std::size_t>::max();
      for (auto x : candidates) {
        const double d = removal_delta(t, x, vol);
        const auto mv = t.min_vertex(x);
        if (d < pick_delta - kTieWindow ||
            (std::abs(d - pick_delta) <= kTieWindow && mv < pick_min)) {
          pick = x;
          pick_delta = d;
          pick_min = mv;
        }
      }
      t.remove_in_place(pick);
      h = cached_entropy(t, vol);
      result.compressions.push_back({pick_min, pick_delta, h});
      if (observer) observer(t);
    }
  }
  result.tree = std::move(t);
  result.entropy = h;
  return result;
}

EncodingTree minimize(const Graph& g, const MinimizeConfig& config) {
  return minimize_traced(g, config).tree;
}

OracleResult exhaustive_min_2level(const Graph& g) {
  const std::size_t n = g.size();
  if (n > kExhaustiveMaxVertices)
    throw std::invalid_argument("exhaustive oracle supports at most " +
                                std::to_string(kExhaustiveMaxVertices) +
                                " vertices, got " + std::to_string(n));
  const Graph sym = g.symmetrized();
  const double vol = volume(sym);
  const Vector deg = degrees(sym);

  auto entropy_of = [&](const std::vector<std::size_t>& label, std::size_t blocks) {
    std::vector<double> cut(blocks, 0.0), vb(blocks, 0.0);
    std::vector<std::size_t> size(blocks, 0);
    for (std::size_t i = 0; i < n; ++i) {
      vb[label[i]] += deg(i);
      ++size[label[i]];
      for (std::size_t j = 0; j < n; ++j)
        if (label[j] != label[i]) cut[label[i]] += sym.weight(i, j);
    }
    double h = 0.0;
    for (std::size_t b = 0; b < blocks; ++b)
      if (size[b] > 1) h += entropy_term(cut[b], vb[b], vol, vol);
    for (std::size_t i = 0; i < n; ++i) {
      const double parent = size[label[i]] > 1 ? vb[label[i]] : vol;
      h += entropy_term(deg(i), deg(i), parent, vol);
    }
    return h;
  };

  // Singletons first so that ties resolve to the flat tree.
  std::vector<std::size_t> best_label(n);
  for (std::size_t i = 0; i < n; ++i) best_label[i] = i;
  std::size_t best_blocks = n;
  double best_h = entropy_of(best_label, n);

  // Restricted growth strings enumerate every set partition once.
  std::vector<std::size_t> label(n, 0), maxima(n, 0);
  while (true) {
    const std::size_t blocks = n == 0 ? 0 : maxima[n - 1] + 1;
    const double h = entropy_of(label, blocks);
    if (h < best_h - kTieWindow) {
      best_h = h;
      best_label = label;
      best_blocks = blocks;
    }
    std::size_t i = n;
    while (i > 1) {
      --i;
      if (label[i] <= maxima[i - 1]) break;
      if (i == 1) { i = 0; break; }
    }
    if (i == 0 || n < 2) break;
    ++label[i];
    maxima[i] = std::max(maxima[i - 1], label[i]);
    for (std::size_t k = i + 1; k < n; ++k) {
      label[k] = 0;
      maxima[k] = maxima[i];
    }
  }

  std::vector<std::vector<std::size_t>> partition(best_blocks);
  for (std::size_t i = 0; i < n; ++i) partition[best_label[i]].push_back(i);
  std::sort(partition.begin(), partition.end());
  EncodingTree tree = EncodingTree::two_level(sym, partition);
  return {std::move(tree), best_h, std::move(partition)};
}

}  // namespace multispans
