#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace multispans {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Edge {
  std::size_t src;
  std::size_t dst;
  double weight;
};

// Dense weighted graph. Weights are nonnegative, the diagonal is zero and an
// undirected graph has an exactly symmetric adjacency matrix.
class Graph {
 public:
  Graph(Matrix adjacency, bool directed);

  // Accumulates duplicate edges; undirected edges are mirrored.
  static Graph from_edges(std::size_t n, const std::vector<Edge>& edges,
                          bool directed);

  std::size_t size() const { return static_cast<std::size_t>(adj_.rows()); }
  const Matrix& adjacency() const { return adj_; }
  double weight(std::size_t i, std::size_t j) const { return adj_(i, j); }
  bool directed() const { return directed_; }

  // (A + A^T) / 2 for directed graphs, a copy otherwise.
  Graph symmetrized() const;

 private:
  Matrix adj_;
  bool directed_;
};

enum class GraphFormat { EdgeList, Adjacency };

// Edge lists are `src,dst,weight` rows with 0-based ids and an optional
// header. When `declared_n` is absent the vertex count is max id + 1.
Graph load_graph(const std::filesystem::path& path, GraphFormat format,
                 bool directed = false,
                 std::optional<std::size_t> declared_n = std::nullopt);

void save_edge_list(const Graph& g, const std::filesystem::path& path);

// Row sum of the adjacency matrix.
double degree(const Graph& g, std::size_t v);
double volume(const Graph& g);
Vector degrees(const Graph& g);

// I - D^{-1/2} A D^{-1/2}. Zero-degree vertices get D^{-1/2} = 0 and an
// all-zero row and column (including the diagonal).
Matrix normalized_laplacian(const Graph& g);

struct EigenBasis {
  Vector eigenvalues;   // ascending
  Matrix eigenvectors;  // column j pairs with eigenvalues[j]
};

// Dense symmetric eigensolver. Each eigenvector is sign-fixed so that its
// first nonzero component is positive.
EigenBasis sym_eigendecomposition(const Matrix& m);

// Eigenvalues below this magnitude count as trivial (one per component).
inline constexpr double kTrivialEigenvalue = 1e-9;

// Eigenvectors of the normalized Laplacian for the k smallest non-trivial
// eigenvalues (N x k). Directed graphs are symmetrized first.
Matrix laplacian_pe(const Graph& g, std::size_t k);

// Number of non-trivial normalized-Laplacian eigenpairs available to
// laplacian_pe.
std::size_t nontrivial_eigenpairs(const Graph& g);

enum class SynthKind { Cycle, BarbellTriangles, Grid, RandomCommunity };

struct SynthParams {
  std::size_t n = 4;            // cycle, random-community
  std::size_t rows = 2;         // grid
  std::size_t cols = 2;         // grid
  std::size_t communities = 3;  // random-community
  double p_in = 0.5;
  double p_out = 0.05;
};

SynthKind parse_synth_kind(const std::string& name);

// Deterministic for a fixed seed. Random-community graphs place vertices in
// contiguous equal-size blocks and draw weights on a 1e-3 grid in [0.5, 1.5].
Graph synth_graph(SynthKind kind, const SynthParams& params,
                  std::uint64_t seed);

// Community id of each vertex in a random-community graph.
std::vector<std::size_t> community_labels(std::size_t n,
                                          std::size_t communities);

}  // namespace multispans
