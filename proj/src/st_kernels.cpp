#include "multispans/st_kernels.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "multispans/error.hpp"

namespace multispans {

void save_series(const SeriesWindow& w, const std::filesystem::path& path) {
  save_array(w.data, path);
  nlohmann::json sidecar{{"interval", w.interval_minutes},
                         {"start_timestamp", w.start_timestamp}};
  std::ofstream out(path.string() + ".json");
  if (!out) throw InputError("cannot write series sidecar for " + path.string());
  out << sidecar.dump(2) << '\n';
}

SeriesWindow load_series(const std::filesystem::path& path) {
  SeriesWindow w;
  w.data = load_array(path);
  const auto sidecar_path = path.string() + ".json";
  std::ifstream in(sidecar_path);
  if (in) {
    try {
      const auto j = nlohmann::json::parse(in);
      w.interval_minutes = j.at("interval").get<double>();
      w.start_timestamp = j.at("start_timestamp").get<std::int64_t>();
    } catch (const nlohmann::json::exception& e) {
      throw InputError("bad series sidecar " + sidecar_path + ": " + e.what());
    }
  }
  if (w.steps() == 0 || w.nodes() == 0 || w.channels() == 0)
    throw InputError("series must have T, N, C >= 1");
  if (!w.data.all_finite()) throw InputError("series contains non-finite values");
  if (!(w.interval_minutes > 0.0)) throw InputError("series interval must be positive");
  return w;
}

SeriesWindow slice_window(const SeriesWindow& w, std::size_t start,
                          std::size_t length) {
  if (length == 0 || start + length > w.steps())
    throw InputError("window [" + std::to_string(start) + ", " +
                     std::to_string(start + length) + ") exceeds series length " +
                     std::to_string(w.steps()));
  SeriesWindow out;
  out.interval_minutes = w.interval_minutes;
  out.start_timestamp =
      w.start_timestamp + static_cast<std::int64_t>(start * w.interval_minutes * 60.0);
  out.data = Tensor3(length, w.nodes(), w.channels());
  for (std::size_t t = 0; t < length; ++t) out.data.slice(t) = w.data.slice(start + t);
  return out;
}

void TemporalKernelBank::check(std::size_t in_channels) const {
  if (kernels.empty()) throw std::invalid_argument("kernel bank is empty");
  if (stride < 1) throw std::invalid_argument("stride must be positive");
  if (out_channels == 0 || out_channels % kernels.size() != 0)
    throw std::invalid_argument("output channels must be divisible by the filter count");
  const std::size_t per = out_channels / kernels.size();
  for (const auto& k : kernels) {
    if (k.size < 1) throw std::invalid_argument("kernel size must be positive");
    if (k.weights.dim0() != k.size || k.weights.dim1() != in_channels ||
        k.weights.dim2() != per)
      throw std::invalid_argument("kernel weights must be size x C x (c_t/m)");
  }
}

TemporalKernelBank TemporalKernelBank::identity(std::size_t channels) {
  TemporalKernel k{1, Tensor3(1, channels, channels)};
  for (std::size_t c = 0; c < channels; ++c) k.weights(0, c, c) = 1.0;
  return {{k}, 1, channels};
}

RowMatrix pad_replicate(const Eigen::Ref<const RowMatrix>& x, std::size_t k) {
  if (k < 1) throw std::invalid_argument("kernel size must be positive");
  if (x.rows() == 0) throw std::invalid_argument("cannot pad an empty series");
  const auto front = static_cast<Eigen::Index>(k / 2);  // ceil((k-1)/2)
  const auto back = static_cast<Eigen::Index>((k - 1) / 2);
  RowMatrix out(x.rows() + front + back, x.cols());
  for (Eigen::Index i = 0; i < front; ++i) out.row(i) = x.row(0);
  out.middleRows(front, x.rows()) = x;
  for (Eigen::Index i = 0; i < back; ++i)
    out.row(front + x.rows() + i) = x.row(x.rows() - 1);
  return out;
}

std::size_t strided_length(std::size_t steps, std::size_t stride) {
  return (steps + stride - 1) / stride;
}

Tensor3 temporal_multifilter(const Tensor3& x, const TemporalKernelBank& bank) {
  const std::size_t steps = x.dim0(), nodes = x.dim1(), channels = x.dim2();
  bank.check(channels);
  const std::size_t out_steps = strided_length(steps, bank.stride);
  const std::size_t per = bank.out_channels / bank.kernels.size();
  Tensor3 out(out_steps, nodes, bank.out_channels);

  RowMatrix series(steps, channels);
  for (std::size_t n = 0; n < nodes; ++n) {
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t c = 0; c < channels; ++c) series(t, c) = x(t, n, c);
    for (std::size_t j = 0; j < bank.kernels.size(); ++j) {
      const auto& kernel = bank.kernels[j];
      const RowMatrix padded = pad_replicate(series, kernel.size);
      for (std::size_t ot = 0; ot < out_steps; ++ot) {
        const std::size_t start = ot * bank.stride;
        for (std::size_t o = 0; o < per; ++o) {
          double acc = 0.0;
          for (std::size_t l = 0; l < kernel.size; ++l)
            for (std::size_t c = 0; c < channels; ++c)
              acc += kernel.weights(l, c, o) * padded(start + l, c);
          out(ot, n, j * per + o) = acc;
        }
      }
    }
  }
  return out;
}

Tensor3 temporal_multifilter(const SeriesWindow& w, const TemporalKernelBank& bank) {
  return temporal_multifilter(w.data, bank);
}

HopStack hop_stack(const Graph& g, std::size_t hops) {
  const auto n = static_cast<Eigen::Index>(g.size());
  Matrix a_hat = g.adjacency() + Matrix::Identity(n, n);
  const Vector rows = a_hat.rowwise().sum();
  a_hat = rows.cwiseInverse().asDiagonal() * a_hat;
  HopStack stack;
  stack.powers.push_back(Matrix::Identity(n, n));
  for (std::size_t j = 1; j <= hops; ++j) stack.powers.push_back(a_hat * stack.powers.back());
  return stack;
}

Tensor3 graph_multihop(const Tensor3& x, const HopStack& stack) {
  if (stack.powers.empty() ||
      static_cast<std::size_t>(stack.powers.front().rows()) != x.dim1())
    throw std::invalid_argument("hop stack size does not match the node count");
  const std::size_t c = x.dim2();
  Tensor3 out(x.dim0(), x.dim1(), (stack.hops() + 1) * c);
  for (std::size_t t = 0; t < x.dim0(); ++t) {
    const auto in = x.slice(t);
    auto dst = out.slice(t);
    for (std::size_t j = 0; j < stack.powers.size(); ++j)
      dst.middleCols(static_cast<Eigen::Index>(j * c), static_cast<Eigen::Index>(c)) =
          stack.powers[j] * in;
  }
  return out;
}

Tensor3 mfcl(const SeriesWindow& w, const TemporalKernelBank& bank,
             const HopStack& stack) {
  return graph_multihop(temporal_multifilter(w, bank), stack);
}

}  // namespace multispans
