#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "multispans/array_io.hpp"
#include "multispans/encoding_tree.hpp"
#include "multispans/graph.hpp"
#include "multispans/hierarchy_attention.hpp"
#include "multispans/st_kernels.hpp"

namespace multispans {

// Failure inside forward(), tagged with the pipeline stage that raised it.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// Inference-mode batch normalization with stored statistics.
struct BatchNorm {
  Vector mean;
  Vector var;
  Vector scale;
  Vector shift;
  double eps = 1e-5;

  static BatchNorm identity(std::size_t channels);
  void apply(Eigen::Ref<RowMatrix> x) const;  // per column
};

// Row-vector convention: Q = X * w_q; head i owns columns [i*d/h, (i+1)*d/h).
struct AttentionWeights {
  std::size_t heads = 1;
  RowMatrix w_q, w_k, w_v;  // d x d
  RowMatrix w_ffn;          // d x d
  Vector b_ffn;             // d
  BatchNorm norm;

  std::size_t dim() const { return static_cast<std::size_t>(w_q.rows()); }
  std::size_t head_dim() const { return dim() / heads; }
  void check() const;
};

struct AttentionOptions {
  bool residual = false;         // BN(H + sublayer) instead of BN(sublayer)
  bool record_weights = false;   // keep per-head softmax matrices
  bool check_invariants = false; // row sums and masked zeros, throws
};

struct AttentionOutput {
  RowMatrix out;                  // M x d
  RowMatrix context;              // concatenated heads before the FFN
  std::vector<RowMatrix> weights; // per head, when recorded
};

// One attention sublayer. Per head: Q from H + D + D_b, K and V from H,
// logits (QK^T + S) / sqrt(d/h), disallowed logits set to -inf, softmax,
// then BN(ReLU(W_ffn concat + b)).
AttentionOutput masked_multihead_attention(
    const Eigen::Ref<const RowMatrix>& h, const Eigen::Ref<const RowMatrix>& d,
    const Eigen::Ref<const RowMatrix>& d_b, const Matrix* score,
    const MaskSet* masks, const AttentionWeights& w,
    const AttentionOptions& options = {});

// Throws std::logic_error if a softmax row does not sum to 1 within 1e-9 or
// a disallowed position carries weight.
void check_attention_weights(const RowMatrix& weights, const BoolMatrix* allow);

struct PEBundle {
  RowMatrix spatial;    // N x d
  RowMatrix temporal;   // T x d
  RowMatrix timestamp;  // T x d
};

RowMatrix sinusoidal_pe(std::size_t length, std::size_t dim);

// Row offsets into the 31-row projection: day of week (Monday = 0), then
// 7 + hour of day.
struct TimestampSlot {
  std::size_t day_of_week;
  std::size_t hour;
};
TimestampSlot timestamp_slot(std::int64_t epoch_seconds);

RowMatrix timestamp_embedding(std::int64_t start, std::size_t length,
                              double interval_minutes,
                              const Eigen::Ref<const RowMatrix>& w_b);

struct EncoderWeights {
  AttentionWeights temporal;
  AttentionWeights spatial;
};

// Attention maps kept for inspection, averaged over the other axis.
struct AttentionMaps {
  std::vector<RowMatrix> temporal;  // per head, T x T, mean over nodes
  std::vector<RowMatrix> spatial;   // per head, N x N, mean over time
};

struct EncoderOptions {
  bool record_attention = false;
  bool check_invariants = false;
};

Tensor3 temporal_transformer(const Tensor3& h, const PEBundle& pe,
                             const AttentionWeights& w,
                             const EncoderOptions& options = {},
                             AttentionMaps* maps = nullptr);

Tensor3 spatial_transformer(const Tensor3& h, const PEBundle& pe,
                            const MaskSet& masks, const Matrix& score,
                            const AttentionWeights& w,
                            const EncoderOptions& options = {},
                            AttentionMaps* maps = nullptr);

Tensor3 st_encoder(const Tensor3& h, const PEBundle& pe, const MaskSet& masks,
                   const Matrix& score, const EncoderWeights& w,
                   const EncoderOptions& options = {},
                   AttentionMaps* maps = nullptr);

struct OutputWeights {
  Tensor3 deconv;     // k x d x d, k = stride; empty when T_h = T'
  Vector deconv_bias; // d
  RowMatrix w1;       // d x d
  Vector b1;
  RowMatrix w2;       // d x C_o
  Vector b2;
};

// ceil(T' / T_h), the transposed-convolution stride.
std::size_t deconv_stride(std::size_t hidden_steps, std::size_t horizon);

Tensor3 output_layer(const Tensor3& h, std::size_t horizon,
                     const OutputWeights& w);

struct ModelConfig {
  std::size_t layers = 3;
  std::size_t hidden = 64;
  std::size_t heads = 8;
  std::size_t horizon = 12;
  std::size_t out_channels = 1;
  std::uint64_t seed = 0;

  std::size_t in_channels = 3;
  std::size_t in_steps = 12;
  std::vector<std::size_t> kernel_sizes = kDefaultKernelSizes;
  std::size_t temporal_channels = 32;
  std::size_t hops = 1;
  std::size_t stride = 1;
  std::size_t pe_dim = 8;

  std::size_t hidden_steps() const { return strided_length(in_steps, stride); }
  // Throws std::invalid_argument naming the inconsistent field.
  void check() const;
};

struct ModelWeights {
  TemporalKernelBank bank;
  RowMatrix pe_projection;         // pe_dim x d
  RowMatrix timestamp_projection;  // 31 x d
  std::vector<EncoderWeights> encoders;
  OutputWeights output;
};

struct ForwardOptions {
  bool record_attention = false;
  bool check_invariants = false;
};

struct ForwardResult {
  Tensor3 prediction;  // T' x N x C_o
  std::size_t hidden_steps = 0;
  std::size_t mask_count = 0;
  std::vector<AttentionMaps> attention;  // per layer, when recorded
};

// MFCL, k ST encoders, summed skips, output layer. Errors are StageError,
// except head/mask shortfalls which stay ConstraintError.
ForwardResult forward(const ModelConfig& config, const ModelWeights& weights,
                      const SeriesWindow& window, const Graph& g,
                      const EncodingTree& t, const ForwardOptions& options = {});

}  // namespace multispans
