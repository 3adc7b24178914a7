#include "multispans/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "multispans/array_io.hpp"
#include "multispans/error.hpp"
#include "multispans/rng.hpp"

namespace multispans {

Graph::Graph(Matrix adjacency, bool directed)
    : adj_(std::move(adjacency)), directed_(directed) {
  if (adj_.rows() < 1 || adj_.rows() != adj_.cols())
    throw InputError("adjacency must be a nonempty square matrix");
  for (Eigen::Index i = 0; i < adj_.rows(); ++i) {
    if (adj_(i, i) != 0.0) throw InputError("adjacency diagonal must be zero");
    for (Eigen::Index j = 0; j < adj_.cols(); ++j) {
      if (!std::isfinite(adj_(i, j)) || adj_(i, j) < 0.0)
        throw InputError("negative or non-finite edge weight");
      if (!directed_ && adj_(i, j) != adj_(j, i))
        throw InputError("undirected adjacency must be symmetric");
    }
  }
}

Graph Graph::from_edges(std::size_t n, const std::vector<Edge>& edges,
                        bool directed) {
  if (n == 0) throw InputError("graph needs at least one vertex");
  Matrix a = Matrix::Zero(n, n);
  for (const auto& e : edges) {
    if (e.src >= n || e.dst >= n) throw InputError("vertex id out of range");
    if (e.weight < 0.0 || !std::isfinite(e.weight))
      throw InputError("negative edge weight");
    if (e.src == e.dst) throw InputError("self-loops are not allowed");
    a(e.src, e.dst) += e.weight;
    if (!directed) a(e.dst, e.src) += e.weight;
  }
  return Graph(std::move(a), directed);
}

Graph Graph::symmetrized() const {
  if (!directed_) return *this;
  return Graph(0.5 * (adj_ + adj_.transpose()), false);
}

Graph load_graph(const std::filesystem::path& path, GraphFormat format,
                 bool directed, std::optional<std::size_t> declared_n) {
  if (format == GraphFormat::Adjacency) {
    RowMatrix m = read_csv_matrix(path);
    if (declared_n && static_cast<std::size_t>(m.rows()) != *declared_n)
      throw InputError("adjacency size does not match declared N");
    return Graph(Matrix(m), directed);
  }

  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<Edge> edges;
  std::string line;
  std::size_t lineno = 0;
  std::size_t max_id = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto fields = split_csv_line(line);
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (lineno == 1 && fields.size() == 3 && fields[0] == "src") continue;
    if (fields.size() != 3)
      throw InputError("line " + std::to_string(lineno) +
                       ": expected src,dst,weight");
    const double s = parse_double(fields[0]);
    const double d = parse_double(fields[1]);
    const double w = parse_double(fields[2]);
    if (s < 0 || d < 0 || s != std::floor(s) || d != std::floor(d))
      throw InputError("line " + std::to_string(lineno) +
                       ": ids must be nonnegative integers");
    if (w < 0.0)
      throw InputError("line " + std::to_string(lineno) + ": negative weight");
    Edge e{static_cast<std::size_t>(s), static_cast<std::size_t>(d), w};
    if (declared_n && (e.src >= *declared_n || e.dst >= *declared_n))
      throw InputError("line " + std::to_string(lineno) +
                       ": id >= declared N");
    max_id = std::max({max_id, e.src, e.dst});
    edges.push_back(e);
  }
  if (edges.empty()) throw InputError("no edges");
  return Graph::from_edges(declared_n.value_or(max_id + 1), edges, directed);
}

void save_edge_list(const Graph& g, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open " + path.string() + " for writing");
  out << "src,dst,weight\n";
  const auto n = g.size();
  char buf[64];
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = g.directed() ? 0 : i + 1; j < n; ++j) {
      if (g.weight(i, j) == 0.0) continue;
      std::snprintf(buf, sizeof(buf), "%.9f", g.weight(i, j));
      out << i << ',' << j << ',' << buf << '\n';
    }
  }
}

double degree(const Graph& g, std::size_t v) {
  if (v >= g.size()) throw std::out_of_range("vertex id out of range");
  return g.adjacency().row(static_cast<Eigen::Index>(v)).sum();
}

Vector degrees(const Graph& g) { return g.adjacency().rowwise().sum(); }

double volume(const Graph& g) { return g.adjacency().sum(); }

Matrix normalized_laplacian(const Graph& g) {
  if (g.adjacency() != g.adjacency().transpose())
    throw std::invalid_argument(
        "normalized_laplacian needs a symmetric graph; symmetrize first");
  const Vector d = degrees(g);
  Vector inv_sqrt(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i)
    inv_sqrt(i) = d(i) > 0.0 ? 1.0 / std::sqrt(d(i)) : 0.0;
  Matrix l = -(inv_sqrt.asDiagonal() * g.adjacency() * inv_sqrt.asDiagonal());
  for (Eigen::Index i = 0; i < d.size(); ++i)
    l(i, i) = d(i) > 0.0 ? 1.0 : 0.0;
  return l;
}

EigenBasis sym_eigendecomposition(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw std::invalid_argument("eigendecomposition needs a square matrix");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("eigendecomposition needs a symmetric matrix");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("symmetric eigensolver did not converge");
  EigenBasis basis{solver.eigenvalues(), solver.eigenvectors()};
  for (Eigen::Index j = 0; j < basis.eigenvectors.cols(); ++j) {
    auto col = basis.eigenvectors.col(j);
    for (Eigen::Index i = 0; i < col.size(); ++i) {
      if (std::abs(col(i)) > 1e-12) {
        if (col(i) < 0.0) col = -col;
        break;
      }
    }
  }
  return basis;
}

namespace {

std::size_t count_trivial(const Vector& eigenvalues) {
  std::size_t trivial = 0;
  for (double v : eigenvalues)
    if (std::abs(v) < kTrivialEigenvalue) ++trivial;
  return trivial;
}

}  // namespace

std::size_t nontrivial_eigenpairs(const Graph& g) {
  const auto basis = sym_eigendecomposition(normalized_laplacian(g.symmetrized()));
  return g.size() - count_trivial(basis.eigenvalues);
}

Matrix laplacian_pe(const Graph& g, std::size_t k) {
  const std::size_t n = g.size();
  if (k + 1 > n)
    throw std::invalid_argument("laplacian_pe: k must be at most N-1");
  const auto basis = sym_eigendecomposition(normalized_laplacian(g.symmetrized()));
  const std::size_t trivial = count_trivial(basis.eigenvalues);
  if (trivial + k > n)
    throw std::invalid_argument(
        "laplacian_pe: graph has only " + std::to_string(n - trivial) +
        " non-trivial eigenpairs");
  return basis.eigenvectors.middleCols(static_cast<Eigen::Index>(trivial),
                                       static_cast<Eigen::Index>(k));
}

SynthKind parse_synth_kind(const std::string& name) {
  if (name == "cycle") return SynthKind::Cycle;
  if (name == "barbell-triangles") return SynthKind::BarbellTriangles;
  if (name == "grid") return SynthKind::Grid;
  if (name == "random-community") return SynthKind::RandomCommunity;
  throw InputError("unknown synthetic graph kind '" + name + "'");
}

std::vector<std::size_t> community_labels(std::size_t n,
                                          std::size_t communities) {
  std::vector<std::size_t> label(n);
  for (std::size_t v = 0; v < n; ++v) label[v] = v * communities / n;
  return label;
}

Graph synth_graph(SynthKind kind, const SynthParams& p, std::uint64_t seed) {
  std::vector<Edge> edges;
  switch (kind) {
    case SynthKind::Cycle: {
      if (p.n < 3) throw InputError("cycle needs n >= 3");
      for (std::size_t v = 0; v < p.n; ++v)
        edges.push_back({v, (v + 1) % p.n, 1.0});
      return Graph::from_edges(p.n, edges, false);
    }
    case SynthKind::BarbellTriangles: {
      // Triangles {0,1,2} and {3,4,5} joined by the bridge 2-3.
      edges = {{0, 1, 1.0}, {0, 2, 1.0}, {1, 2, 1.0}, {2, 3, 1.0},
               {3, 4, 1.0}, {3, 5, 1.0}, {4, 5, 1.0}};
      return Graph::from_edges(6, edges, false);
    }
    case SynthKind::Grid: {
      if (p.rows < 1 || p.cols < 1) throw InputError("grid needs rows, cols >= 1");
      const auto id = [&](std::size_t r, std::size_t c) { return r * p.cols + c; };
      for (std::size_t r = 0; r < p.rows; ++r)
        for (std::size_t c = 0; c < p.cols; ++c) {
          if (c + 1 < p.cols) edges.push_back({id(r, c), id(r, c + 1), 1.0});
          if (r + 1 < p.rows) edges.push_back({id(r, c), id(r + 1, c), 1.0});
        }
      return Graph::from_edges(p.rows * p.cols, edges, false);
    }
    case SynthKind::RandomCommunity: {
      if (p.communities == 0) throw InputError("random-community needs c >= 1");
      if (p.n < p.communities) throw InputError("random-community needs n >= c");
      if (!(p.p_in > p.p_out) || p.p_out < 0.0 || p.p_in > 1.0)
        throw InputError("random-community needs 0 <= p_out < p_in <= 1");
      Rng rng(seed);
      const auto label = community_labels(p.n, p.communities);
      for (std::size_t i = 0; i < p.n; ++i)
        for (std::size_t j = i + 1; j < p.n; ++j) {
          const double prob = label[i] == label[j] ? p.p_in : p.p_out;
          const double draw = rng.uniform();
          const double w = std::round(rng.uniform(500.0, 1500.0)) / 1000.0;
          if (draw < prob) edges.push_back({i, j, w});
        }
      return Graph::from_edges(p.n, edges, false);
    }
  }
  throw InputError("unknown synthetic graph kind");
}

}  // namespace multispans
