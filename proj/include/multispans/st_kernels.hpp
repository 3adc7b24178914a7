#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "multispans/array_io.hpp"
#include "multispans/graph.hpp"

namespace multispans {

// T x N x C traffic window with its sampling clock.
struct SeriesWindow {
  Tensor3 data;
  double interval_minutes = 5.0;
  std::int64_t start_timestamp = 0;  // seconds since the Unix epoch, UTC

  std::size_t steps() const { return data.dim0(); }
  std::size_t nodes() const { return data.dim1(); }
  std::size_t channels() const { return data.dim2(); }
};

// Array container plus a `<path>.json` sidecar with the clock.
void save_series(const SeriesWindow& w, const std::filesystem::path& path);
SeriesWindow load_series(const std::filesystem::path& path);
SeriesWindow slice_window(const SeriesWindow& w, std::size_t start,
                          std::size_t length);

struct TemporalKernel {
  std::size_t size = 1;
  Tensor3 weights;  // size x in_channels x (out_channels / filters)
};

struct TemporalKernelBank {
  std::vector<TemporalKernel> kernels;
  std::size_t stride = 1;
  std::size_t out_channels = 0;

  // Throws std::invalid_argument on any shape violation.
  void check(std::size_t in_channels) const;

  // A single size-1 filter that copies its input.
  static TemporalKernelBank identity(std::size_t channels);
};

// The default filter sizes (5, 10, 15 and 30 minutes at 5-minute steps).
inline const std::vector<std::size_t> kDefaultKernelSizes = {1, 2, 3, 6};

struct HopStack {
  std::vector<Matrix> powers;  // A_hat^0 .. A_hat^h
  std::size_t hops() const { return powers.size() - 1; }
};

// ceil((k-1)/2) copies of the first row in front, floor((k-1)/2) copies of
// the last row behind.
RowMatrix pad_replicate(const Eigen::Ref<const RowMatrix>& x, std::size_t k);

// ceil(T / stride).
std::size_t strided_length(std::size_t steps, std::size_t stride);

Tensor3 temporal_multifilter(const Tensor3& x, const TemporalKernelBank& bank);
Tensor3 temporal_multifilter(const SeriesWindow& w, const TemporalKernelBank& bank);

// Powers of D^{-1}(A + I) with D the row sums of A + I, on the original
// (possibly directed) adjacency.
HopStack hop_stack(const Graph& g, std::size_t hops);

// Concatenates A_hat^j X over j along channels, hop-major.
Tensor3 graph_multihop(const Tensor3& x, const HopStack& stack);

// Temporal filtering followed by graph filtering: T' x N x (h+1) c_t.
Tensor3 mfcl(const SeriesWindow& w, const TemporalKernelBank& bank,
             const HopStack& stack);

}  // namespace multispans
