#pragma once

// Independent reference computations for tests. Nothing here calls into the
// library code paths it is used to check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <vector>

#include <json.hpp>

#include "multispans/array_io.hpp"
#include "multispans/graph.hpp"

namespace oracle {

using multispans::Matrix;
using multispans::RowMatrix;

inline double xlog(double g, double v, double vp, double vol) {
  if (vol <= 0 || g == 0 || v == vp) return 0.0;
  return -(g / vol) * std::log2(v / vp);
}

// Structural entropy of a 2-level tree given as a vertex partition, from the
// raw symmetric adjacency. Singleton blocks sit directly under the root.
inline double two_level_entropy(const Matrix& a,
                                const std::vector<std::vector<std::size_t>>& blocks) {
  const auto n = static_cast<std::size_t>(a.rows());
  std::vector<double> deg(n, 0.0);
  double vol = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      deg[i] += a(i, j);
      vol += a(i, j);
    }
  double h = 0.0;
  for (const auto& b : blocks) {
    std::set<std::size_t> in(b.begin(), b.end());
    double cut = 0.0, vb = 0.0;
    for (auto i : b) {
      vb += deg[i];
      for (std::size_t j = 0; j < n; ++j)
        if (!in.count(j)) cut += a(i, j);
    }
    if (b.size() == 1) {
      h += xlog(deg[b[0]], deg[b[0]], vol, vol);
    } else {
      h += xlog(cut, vb, vol, vol);
      for (auto i : b) h += xlog(deg[i], deg[i], vb, vol);
    }
  }
  return h;
}

// Every set partition of {0..n-1}, by recursive insertion.
inline std::vector<std::vector<std::vector<std::size_t>>> all_partitions(std::size_t n) {
  std::vector<std::vector<std::vector<std::size_t>>> out;
  std::vector<std::vector<std::size_t>> cur;
  std::function<void(std::size_t)> rec = [&](std::size_t v) {
    if (v == n) {
      out.push_back(cur);
      return;
    }
    for (std::size_t b = 0; b < cur.size(); ++b) {
      cur[b].push_back(v);
      rec(v + 1);
      cur[b].pop_back();
    }
    cur.push_back({v});
    rec(v + 1);
    cur.pop_back();
  };
  rec(0);
  return out;
}

// Structural entropy of an arbitrary tree given as nested JSON-free
// description: parent array over nodes, leaf vertex per leaf (or -1).
struct PlainTree {
  std::vector<long> parent;        // -1 for the root
  std::vector<long> vertex;        // -1 for internal nodes
};

inline PlainTree from_json(const nlohmann::json& j) {
  std::size_t max_id = 0;
  for (const auto& n : j["nodes"]) max_id = std::max<std::size_t>(max_id, n["id"]);
  PlainTree t{std::vector<long>(max_id + 1, -2), std::vector<long>(max_id + 1, -1)};
  for (const auto& n : j["nodes"]) {
    const std::size_t id = n["id"];
    t.parent[id] = n["parent"].is_null() ? -1 : static_cast<long>(n["parent"].get<std::size_t>());
    t.vertex[id] = n["vertex"].is_null() ? -1 : static_cast<long>(n["vertex"].get<std::size_t>());
  }
  return t;
}

// Vertex set under every node, by walking each leaf up to the root.
inline std::vector<std::set<std::size_t>> node_sets(const PlainTree& t) {
  std::vector<std::set<std::size_t>> sets(t.parent.size());
  for (std::size_t id = 0; id < t.parent.size(); ++id) {
    if (t.vertex[id] < 0 || t.parent[id] == -2) continue;
    for (long cur = static_cast<long>(id); cur >= 0; cur = t.parent[cur])
      sets[cur].insert(static_cast<std::size_t>(t.vertex[id]));
  }
  return sets;
}

// Per-node entropy recomputed from scratch (g and V from the adjacency).
inline std::vector<double> node_entropies(const Matrix& a, const PlainTree& t) {
  const auto n = static_cast<std::size_t>(a.rows());
  const auto sets = node_sets(t);
  std::vector<double> deg(n, 0.0);
  double vol = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      deg[i] += a(i, j);
      vol += a(i, j);
    }
  auto vol_of = [&](const std::set<std::size_t>& s) {
    double v = 0.0;
    for (auto i : s) v += deg[i];
    return v;
  };
  std::vector<double> h(t.parent.size(), 0.0);
  for (std::size_t id = 0; id < t.parent.size(); ++id) {
    if (t.parent[id] < 0) continue;
    double cut = 0.0;
    for (auto i : sets[id])
      for (std::size_t j = 0; j < n; ++j)
        if (!sets[id].count(j)) cut += a(i, j);
    h[id] = xlog(cut, vol_of(sets[id]), vol_of(sets[t.parent[id]]), vol);
  }
  return h;
}

inline double tree_entropy(const Matrix& a, const PlainTree& t) {
  double s = 0.0;
  for (double v : node_entropies(a, t)) s += v;
  return s;
}

// S_hier by walking parent links: up-steps from leaf(i) until reaching an
// ancestor of leaf(j), then down-steps toward leaf(j).
inline Matrix path_walk_scores(const Matrix& a, const PlainTree& t, double floor) {
  auto h = node_entropies(a, t);
  long root = -1;
  double total = 0.0;
  for (std::size_t id = 0; id < t.parent.size(); ++id) {
    if (t.parent[id] == -1) root = static_cast<long>(id);
    if (t.parent[id] >= 0) total += h[id];
  }
  h[root] = total;
  for (auto& v : h) v = std::max(v, floor);

  const auto n = static_cast<std::size_t>(a.rows());
  std::vector<long> leaf(n, -1);
  for (std::size_t id = 0; id < t.vertex.size(); ++id)
    if (t.vertex[id] >= 0 && t.parent[id] != -2) leaf[t.vertex[id]] = static_cast<long>(id);

  auto chain = [&](long node) {
    std::vector<long> c;
    for (long cur = node; cur >= 0; cur = t.parent[cur]) c.push_back(cur);
    return c;  // node ... root
  };
  Matrix s = Matrix::Zero(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto ci = chain(leaf[i]);
      const auto cj = chain(leaf[j]);
      const std::set<long> anc_j(cj.begin(), cj.end());
      double up = 0.0;
      long theta = -1;
      for (std::size_t k = 0; k < ci.size(); ++k) {
        if (anc_j.count(ci[k])) {
          theta = ci[k];
          break;
        }
        up += h[t.parent[ci[k]]] / h[ci[k]];
      }
      std::vector<long> down_path;
      for (long cur = leaf[j]; cur != theta; cur = t.parent[cur]) down_path.push_back(cur);
      double down = 0.0;
      for (auto it = down_path.rbegin(); it != down_path.rend(); ++it)
        down += h[*it] / h[t.parent[*it]];
      s(i, j) = up + down;
    }
  return s;
}

// Cyclic Jacobi eigenvalue iteration for symmetric matrices; ascending.
inline std::vector<double> jacobi_eigenvalues(Matrix m) {
  const auto n = m.rows();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += m(p, q) * m(p, q);
    if (off < 1e-30) break;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::abs(m(p, q)) < 1e-300) continue;
        const double theta = (m(q, q) - m(p, p)) / (2.0 * m(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double mkp = m(k, p), mkq = m(k, q);
          m(k, p) = c * mkp - s * mkq;
          m(k, q) = s * mkp + c * mkq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double mpk = m(p, k), mqk = m(q, k);
          m(p, k) = c * mpk - s * mqk;
          m(q, k) = s * mpk + c * mqk;
        }
      }
  }
  std::vector<double> ev(n);
  for (Eigen::Index i = 0; i < n; ++i) ev[i] = m(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

// Single-head scaled dot-product attention with no masking, written with
// plain loops.
inline RowMatrix plain_attention_head(const RowMatrix& q, const RowMatrix& k,
                                      const RowMatrix& v, RowMatrix* weights_out) {
  const auto m = q.rows(), dh = q.cols();
  RowMatrix w(m, m), out = RowMatrix::Zero(m, v.cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    std::vector<double> logits(m);
    double mx = -1e300;
    for (Eigen::Index j = 0; j < m; ++j) {
      double dot = 0.0;
      for (Eigen::Index c = 0; c < dh; ++c) dot += q(i, c) * k(j, c);
      logits[j] = dot / std::sqrt(static_cast<double>(dh));
      mx = std::max(mx, logits[j]);
    }
    double z = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) z += std::exp(logits[j] - mx);
    for (Eigen::Index j = 0; j < m; ++j) w(i, j) = std::exp(logits[j] - mx) / z;
    for (Eigen::Index j = 0; j < m; ++j)
      for (Eigen::Index c = 0; c < v.cols(); ++c) out(i, c) += w(i, j) * v(j, c);
  }
  if (weights_out) *weights_out = w;
  return out;
}

}  // namespace oracle
