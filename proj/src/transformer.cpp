#include "multispans/transformer.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "multispans/error.hpp"

namespace multispans {

BatchNorm BatchNorm::identity(std::size_t channels) {
  const auto c = static_cast<Eigen::Index>(channels);
  return {Vector::Zero(c), Vector::Ones(c), Vector::Ones(c), Vector::Zero(c), 0.0};
}

void BatchNorm::apply(Eigen::Ref<RowMatrix> x) const {
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double inv = scale(c) / std::sqrt(var(c) + eps);
    x.col(c) = ((x.col(c).array() - mean(c)) * inv + shift(c)).matrix();
  }
}

void AttentionWeights::check() const {
  const auto d = w_q.rows();
  if (heads == 0 || d == 0 || static_cast<std::size_t>(d) % heads != 0)
    throw std::invalid_argument("head count must divide the hidden size");
  for (const auto* m : {&w_q, &w_k, &w_v, &w_ffn})
    if (m->rows() != d || m->cols() != d)
      throw std::invalid_argument("attention projections must be d x d");
  if (b_ffn.size() != d || norm.mean.size() != d || norm.var.size() != d ||
      norm.scale.size() != d || norm.shift.size() != d)
    throw std::invalid_argument("attention bias/normalization size must be d");
}

void check_attention_weights(const RowMatrix& weights, const BoolMatrix* allow) {
  for (Eigen::Index i = 0; i < weights.rows(); ++i) {
    const double sum = weights.row(i).sum();
    if (!(std::abs(sum - 1.0) <= 1e-9))
      throw std::logic_error("softmax row " + std::to_string(i) +
                             " sums to " + std::to_string(sum));
    if (allow)
      for (Eigen::Index j = 0; j < weights.cols(); ++j)
        if (!(*allow)(i, j) && weights(i, j) != 0.0)
          throw std::logic_error("masked position carries attention weight");
  }
}

namespace {

// Row softmax over allowed entries; disallowed entries act as -inf logits.
RowMatrix masked_softmax(const RowMatrix& logits, const BoolMatrix* allow) {
  RowMatrix out(logits.rows(), logits.cols());
  const double ninf = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    double mx = ninf;
    for (Eigen::Index j = 0; j < logits.cols(); ++j)
      if (!allow || (*allow)(i, j)) mx = std::max(mx, logits(i, j));
    if (mx == ninf) throw std::invalid_argument("attention row has no allowed entry");
    double sum = 0.0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      const double e = (!allow || (*allow)(i, j)) ? std::exp(logits(i, j) - mx) : 0.0;
      out(i, j) = e;
      sum += e;
    }
    out.row(i) /= sum;
  }
  return out;
}

}  // namespace

AttentionOutput masked_multihead_attention(
    const Eigen::Ref<const RowMatrix>& h, const Eigen::Ref<const RowMatrix>& d,
    const Eigen::Ref<const RowMatrix>& d_b, const Matrix* score,
    const MaskSet* masks, const AttentionWeights& w,
    const AttentionOptions& options) {
  w.check();
  const auto m = h.rows();
  const auto dm = static_cast<Eigen::Index>(w.dim());
  if (h.cols() != dm || d.rows() != m || d.cols() != dm || d_b.rows() != m ||
      d_b.cols() != dm)
    throw std::invalid_argument("attention input dimensions do not match");
  if (score && (score->rows() != m || score->cols() != m))
    throw std::invalid_argument("score matrix must be M x M");
  if (masks) {
    if (masks->heads() != w.heads)
      throw std::invalid_argument("mask set head count differs from the weights");
    for (const auto& mask : masks->masks)
      if (mask.allow.rows() != m || mask.allow.cols() != m)
        throw std::invalid_argument("mask size does not match the sequence length");
  }

  const RowMatrix q = (h + d + d_b) * w.w_q;
  const RowMatrix k = h * w.w_k;
  const RowMatrix v = h * w.w_v;
  const auto dh = static_cast<Eigen::Index>(w.head_dim());
  const double scale = std::sqrt(static_cast<double>(dh));

  AttentionOutput result;
  result.context = RowMatrix(m, dm);
  for (std::size_t head = 0; head < w.heads; ++head) {
    const auto col = static_cast<Eigen::Index>(head) * dh;
    RowMatrix logits = q.middleCols(col, dh) * k.middleCols(col, dh).transpose();
    if (score) logits += *score;
    logits /= scale;
    const BoolMatrix* allow = nullptr;
    if (masks && masks->head_assignment[head])
      allow = &masks->masks.at(*masks->head_assignment[head]).allow;
    RowMatrix weights = masked_softmax(logits, allow);
    if (options.check_invariants) check_attention_weights(weights, allow);
    result.context.middleCols(col, dh) = weights * v.middleCols(col, dh);
    if (options.record_weights) result.weights.push_back(std::move(weights));
  }

  RowMatrix y = (result.context * w.w_ffn).rowwise() + w.b_ffn.transpose();
  y = y.cwiseMax(0.0);
  if (options.residual) y += h;
  w.norm.apply(y);
  result.out = std::move(y);
  return result;
}

RowMatrix sinusoidal_pe(std::size_t length, std::size_t dim) {
  if (dim == 0 || dim % 2 != 0)
    throw std::invalid_argument("sinusoidal encoding needs an even dimension");
  RowMatrix pe(length, dim);
  for (std::size_t pos = 0; pos < length; ++pos)
    for (std::size_t i = 0; i < dim / 2; ++i) {
      const double angle = static_cast<double>(pos) /
                           std::pow(10000.0, 2.0 * static_cast<double>(i) / dim);
      pe(pos, 2 * i) = std::sin(angle);
      pe(pos, 2 * i + 1) = std::cos(angle);
    }
  return pe;
}

TimestampSlot timestamp_slot(std::int64_t epoch_seconds) {
  using namespace std::chrono;
  const sys_seconds tp{seconds{epoch_seconds}};
  const auto day = floor<days>(tp);
  const weekday wd{day};
  const auto hour = duration_cast<hours>(tp - day).count();
  return {wd.iso_encoding() - 1, static_cast<std::size_t>(hour)};
}

RowMatrix timestamp_embedding(std::int64_t start, std::size_t length,
                              double interval_minutes,
                              const Eigen::Ref<const RowMatrix>& w_b) {
  if (!(interval_minutes > 0.0))
    throw std::invalid_argument("timestamp interval must be positive");
  if (w_b.rows() != 31)
    throw std::invalid_argument("timestamp projection must have 7 + 24 rows");
  RowMatrix out(length, w_b.cols());
  for (std::size_t t = 0; t < length; ++t) {
    const auto ts = start + static_cast<std::int64_t>(
                                std::llround(t * interval_minutes * 60.0));
    const auto slot = timestamp_slot(ts);
    out.row(t) = w_b.row(slot.day_of_week) + w_b.row(7 + slot.hour);
  }
  return out;
}

namespace {

void accumulate(std::vector<RowMatrix>& into, const std::vector<RowMatrix>& w,
                double factor) {
  if (into.empty())
    for (const auto& m : w) into.push_back(RowMatrix::Zero(m.rows(), m.cols()));
  for (std::size_t i = 0; i < w.size(); ++i) into[i] += factor * w[i];
}

}  // namespace

Tensor3 temporal_transformer(const Tensor3& h, const PEBundle& pe,
                             const AttentionWeights& w,
                             const EncoderOptions& options, AttentionMaps* maps) {
  const std::size_t steps = h.dim0(), nodes = h.dim1(), dim = h.dim2();
  if (static_cast<std::size_t>(pe.temporal.rows()) != steps ||
      static_cast<std::size_t>(pe.timestamp.rows()) != steps)
    throw std::invalid_argument("temporal encodings must have T rows");
  const AttentionOptions attn{true, maps && options.record_attention,
                              options.check_invariants};
  Tensor3 out(steps, nodes, dim);
  RowMatrix seq(steps, dim);
  for (std::size_t n = 0; n < nodes; ++n) {
    for (std::size_t t = 0; t < steps; ++t) seq.row(t) = h.slice(t).row(n);
    auto r = masked_multihead_attention(seq, pe.temporal, pe.timestamp, nullptr,
                                        nullptr, w, attn);
    for (std::size_t t = 0; t < steps; ++t) out.slice(t).row(n) = r.out.row(t);
    if (attn.record_weights) accumulate(maps->temporal, r.weights, 1.0 / nodes);
  }
  return out;
}

Tensor3 spatial_transformer(const Tensor3& h, const PEBundle& pe,
                            const MaskSet& masks, const Matrix& score,
                            const AttentionWeights& w,
                            const EncoderOptions& options, AttentionMaps* maps) {
  const std::size_t steps = h.dim0(), nodes = h.dim1(), dim = h.dim2();
  if (masks.heads() != w.heads)
    throw std::invalid_argument("mask set head count differs from the weights");
  if (masks.heads() <= masks.masks.size())
    throw ConstraintError("need more heads than masks: heads=" +
                          std::to_string(masks.heads()) +
                          ", L=" + std::to_string(masks.masks.size()));
  if (static_cast<std::size_t>(pe.spatial.rows()) != nodes)
    throw std::invalid_argument("spatial encoding must have N rows");
  if (static_cast<std::size_t>(pe.timestamp.rows()) != steps)
    throw std::invalid_argument("timestamp encoding must have T rows");
  const AttentionOptions attn{true, maps && options.record_attention,
                              options.check_invariants};
  Tensor3 out(steps, nodes, dim);
  for (std::size_t t = 0; t < steps; ++t) {
    const RowMatrix db = pe.timestamp.row(t).replicate(nodes, 1);
    auto r = masked_multihead_attention(h.slice(t), pe.spatial, db, &score,
                                        &masks, w, attn);
    out.slice(t) = r.out;
    if (attn.record_weights) accumulate(maps->spatial, r.weights, 1.0 / steps);
  }
  return out;
}

Tensor3 st_encoder(const Tensor3& h, const PEBundle& pe, const MaskSet& masks,
                   const Matrix& score, const EncoderWeights& w,
                   const EncoderOptions& options, AttentionMaps* maps) {
  const Tensor3 mid = temporal_transformer(h, pe, w.temporal, options, maps);
  return spatial_transformer(mid, pe, masks, score, w.spatial, options, maps);
}

std::size_t deconv_stride(std::size_t hidden_steps, std::size_t horizon) {
  if (hidden_steps == 0) throw std::invalid_argument("hidden length must be positive");
  return (horizon + hidden_steps - 1) / hidden_steps;
}

Tensor3 output_layer(const Tensor3& h, std::size_t horizon,
                     const OutputWeights& w) {
  const std::size_t steps = h.dim0(), nodes = h.dim1(), dim = h.dim2();
  if (steps == 0) throw std::invalid_argument("output layer needs T_h >= 1");
  const auto d = static_cast<Eigen::Index>(dim);
  if (w.w1.rows() != d || w.b1.size() != w.w1.cols() || w.w2.rows() != w.w1.cols() ||
      w.b2.size() != w.w2.cols())
    throw std::invalid_argument("output perceptron shapes do not match");

  Tensor3 x;
  if (steps == horizon) {
    x = h;
  } else {
    const std::size_t s = deconv_stride(steps, horizon);
    if (w.deconv.dim0() != s || w.deconv.dim1() != dim || w.deconv.dim2() != dim ||
        static_cast<std::size_t>(w.deconv_bias.size()) != dim)
      throw std::invalid_argument("deconvolution kernel must be stride x d x d");
    x = Tensor3(horizon, nodes, dim);
    for (std::size_t t = 0; t < horizon; ++t) x.slice(t).rowwise() = w.deconv_bias.transpose();
    for (std::size_t ti = 0; ti < steps; ++ti)
      for (std::size_t l = 0; l < s; ++l) {
        const std::size_t to = ti * s + l;
        if (to >= horizon) continue;
        x.slice(to) += h.slice(ti) * w.deconv.slice(l);
      }
  }

  const auto co = static_cast<std::size_t>(w.w2.cols());
  Tensor3 out(horizon, nodes, co);
  for (std::size_t t = 0; t < horizon; ++t) {
    RowMatrix hidden = ((x.slice(t) * w.w1).rowwise() + w.b1.transpose()).cwiseMax(0.0);
    out.slice(t) = (hidden * w.w2).rowwise() + w.b2.transpose();
  }
  return out;
}

void ModelConfig::check() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
  if (layers == 0) fail("layers must be positive");
  if (heads == 0 || hidden % heads != 0) fail("heads must divide hidden");
  if (hidden % 2 != 0) fail("hidden must be even for the sinusoidal encoding");
  if (horizon == 0 || out_channels == 0) fail("horizon and out_channels must be positive");
  if (in_channels == 0 || in_steps == 0) fail("in_channels and in_steps must be positive");
  if (kernel_sizes.empty()) fail("kernel_sizes must not be empty");
  for (auto k : kernel_sizes)
    if (k == 0) fail("kernel sizes must be positive");
  if (temporal_channels % kernel_sizes.size() != 0)
    fail("temporal_channels must be divisible by the number of filters");
  if ((hops + 1) * temporal_channels != hidden)
    fail("hidden must equal (hops + 1) * temporal_channels");
  if (stride == 0) fail("stride must be positive");
}

namespace {

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) {
  try {
    return fn();
  } catch (const ConstraintError& e) {
    throw ConstraintError(name + ": " + e.what());
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

}  // namespace

ForwardResult forward(const ModelConfig& config, const ModelWeights& weights,
                      const SeriesWindow& window, const Graph& g,
                      const EncodingTree& t, const ForwardOptions& options) {
  stage("assembly", [&] {
    config.check();
    if (window.nodes() != g.size())
      throw InputError("series has N=" + std::to_string(window.nodes()) +
                       " but the graph has N=" + std::to_string(g.size()));
    if (window.channels() != config.in_channels)
      throw InputError("series has C=" + std::to_string(window.channels()) +
                       ", config expects " + std::to_string(config.in_channels));
    if (window.steps() != config.in_steps)
      throw InputError("series has T=" + std::to_string(window.steps()) +
                       ", config expects " + std::to_string(config.in_steps));
    if (!window.data.all_finite()) throw InputError("series contains non-finite values");
    if (weights.encoders.size() != config.layers)
      throw InputError("weights hold a different number of layers");
    const auto report = validate(t, g);
    if (!report.ok()) throw InputError("invalid encoding tree: " + report.summary());
    return 0;
  });

  const MaskSet masks = stage("masks", [&] { return build_mask_set(t, g, config.heads); });
  const Matrix score = stage("hier-score", [&] { return hier_score(g, t); });

  Tensor3 h = stage("mfcl", [&] {
    TemporalKernelBank bank = weights.bank;
    bank.stride = config.stride;
    return mfcl(window, bank, hop_stack(g, config.hops));
  });
  const std::size_t hidden_steps = h.dim0();

  const PEBundle pe = stage("position-encoding", [&] {
    PEBundle b;
    const std::size_t k = std::min(config.pe_dim, nontrivial_eigenpairs(g));
    if (k > 0) {
      b.spatial = laplacian_pe(g, k) * weights.pe_projection.topRows(static_cast<Eigen::Index>(k));
    } else {
      b.spatial = RowMatrix::Zero(static_cast<Eigen::Index>(g.size()),
                                  static_cast<Eigen::Index>(config.hidden));
    }
    b.temporal = sinusoidal_pe(hidden_steps, config.hidden);
    b.timestamp = timestamp_embedding(window.start_timestamp, hidden_steps,
                                      window.interval_minutes * config.stride,
                                      weights.timestamp_projection);
    return b;
  });

  ForwardResult result;
  result.hidden_steps = hidden_steps;
  result.mask_count = masks.masks.size();
  Tensor3 skip = h;
  const EncoderOptions enc{options.record_attention, options.check_invariants};
  for (std::size_t layer = 0; layer < config.layers; ++layer) {
    AttentionMaps maps;
    h = stage("encoder[" + std::to_string(layer) + "]", [&] {
      return st_encoder(h, pe, masks, score, weights.encoders[layer], enc,
                        options.record_attention ? &maps : nullptr);
    });
    for (std::size_t i = 0; i < skip.size(); ++i) skip.data()[i] += h.data()[i];
    if (options.record_attention) result.attention.push_back(std::move(maps));
  }

  result.prediction =
      stage("output", [&] { return output_layer(skip, config.horizon, weights.output); });
  if (!result.prediction.all_finite())
    throw StageError("output", "prediction contains non-finite values");
  return result;
}

}  // namespace multispans
