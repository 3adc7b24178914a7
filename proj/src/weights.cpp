#include "multispans/weights.hpp"

#include <cmath>
#include <fstream>
#include <array>
#include <map>
#include <variant>

#include "multispans/error.hpp"
#include "multispans/rng.hpp"

namespace multispans {

namespace {

enum class Init { Projection, Bias, BnMean, BnVar, BnScale, BnShift };

struct Param {
  std::string name;
  Init init;
  std::variant<RowMatrix*, Vector*, Tensor3*> ref;
  double fan_in = 0.0;
  double fan_out = 0.0;
};

void add_attention(std::vector<Param>& out, const std::string& prefix,
                   AttentionWeights& a) {
  const double d = static_cast<double>(a.dim());
  out.push_back({prefix + ".w_q", Init::Projection, &a.w_q, d, d});
  out.push_back({prefix + ".w_k", Init::Projection, &a.w_k, d, d});
  out.push_back({prefix + ".w_v", Init::Projection, &a.w_v, d, d});
  out.push_back({prefix + ".w_ffn", Init::Projection, &a.w_ffn, d, d});
  out.push_back({prefix + ".b_ffn", Init::Bias, &a.b_ffn});
  out.push_back({prefix + ".bn_mean", Init::BnMean, &a.norm.mean});
  out.push_back({prefix + ".bn_var", Init::BnVar, &a.norm.var});
  out.push_back({prefix + ".bn_scale", Init::BnScale, &a.norm.scale});
  out.push_back({prefix + ".bn_shift", Init::BnShift, &a.norm.shift});
}

// Bundle order; also the draw order of the seeded initializer.
std::vector<Param> parameters(ModelWeights& w) {
  std::vector<Param> out;
  for (std::size_t j = 0; j < w.bank.kernels.size(); ++j) {
    auto& k = w.bank.kernels[j].weights;
    out.push_back({"bank." + std::to_string(j), Init::Projection, &k,
                   static_cast<double>(k.dim0() * k.dim1()),
                   static_cast<double>(k.dim2())});
  }
  out.push_back({"pe_projection", Init::Projection, &w.pe_projection,
                 static_cast<double>(w.pe_projection.rows()),
                 static_cast<double>(w.pe_projection.cols())});
  out.push_back({"timestamp_projection", Init::Projection, &w.timestamp_projection,
                 31.0, static_cast<double>(w.timestamp_projection.cols())});
  for (std::size_t l = 0; l < w.encoders.size(); ++l) {
    add_attention(out, "encoder." + std::to_string(l) + ".temporal", w.encoders[l].temporal);
    add_attention(out, "encoder." + std::to_string(l) + ".spatial", w.encoders[l].spatial);
  }
  auto& o = w.output;
  if (o.deconv.size() > 0) {
    out.push_back({"output.deconv", Init::Projection, &o.deconv,
                   static_cast<double>(o.deconv.dim1()),
                   static_cast<double>(o.deconv.dim2())});
    out.push_back({"output.deconv_bias", Init::Bias, &o.deconv_bias});
  }
  out.push_back({"output.w1", Init::Projection, &o.w1,
                 static_cast<double>(o.w1.rows()), static_cast<double>(o.w1.cols())});
  out.push_back({"output.b1", Init::Bias, &o.b1});
  out.push_back({"output.w2", Init::Projection, &o.w2,
                 static_cast<double>(o.w2.rows()), static_cast<double>(o.w2.cols())});
  out.push_back({"output.b2", Init::Bias, &o.b2});
  return out;
}

std::span<double> values_of(const Param& p) {
  return std::visit(
      [](auto* ref) -> std::span<double> {
        using T = std::remove_pointer_t<decltype(ref)>;
        if constexpr (std::is_same_v<T, Tensor3>)
          return ref->data();
        else
          return {ref->data(), static_cast<std::size_t>(ref->size())};
      },
      p.ref);
}

std::array<std::size_t, 3> shape_of(const Param& p) {
  return std::visit(
      [](auto* ref) -> std::array<std::size_t, 3> {
        using T = std::remove_pointer_t<decltype(ref)>;
        if constexpr (std::is_same_v<T, Tensor3>)
          return {ref->dim0(), ref->dim1(), ref->dim2()};
        else if constexpr (std::is_same_v<T, Vector>)
          return {1, 1, static_cast<std::size_t>(ref->size())};
        else
          return {1, static_cast<std::size_t>(ref->rows()),
                  static_cast<std::size_t>(ref->cols())};
      },
      p.ref);
}

AttentionWeights allocate_attention(std::size_t d, std::size_t heads) {
  const auto n = static_cast<Eigen::Index>(d);
  AttentionWeights a;
  a.heads = heads;
  a.w_q = a.w_k = a.w_v = a.w_ffn = RowMatrix::Zero(n, n);
  a.b_ffn = Vector::Zero(n);
  a.norm = BatchNorm::identity(d);
  a.norm.eps = 1e-5;
  return a;
}

}  // namespace

ModelWeights allocate_weights(const ModelConfig& config) {
  config.check();
  const auto d = static_cast<Eigen::Index>(config.hidden);
  ModelWeights w;
  const std::size_t per = config.temporal_channels / config.kernel_sizes.size();
  for (auto k : config.kernel_sizes)
    w.bank.kernels.push_back({k, Tensor3(k, config.in_channels, per)});
  w.bank.stride = config.stride;
  w.bank.out_channels = config.temporal_channels;
  w.pe_projection = RowMatrix::Zero(static_cast<Eigen::Index>(config.pe_dim), d);
  w.timestamp_projection = RowMatrix::Zero(31, d);
  for (std::size_t l = 0; l < config.layers; ++l)
    w.encoders.push_back({allocate_attention(config.hidden, config.heads),
                          allocate_attention(config.hidden, config.heads)});
  const std::size_t hidden_steps = config.hidden_steps();
  if (hidden_steps != config.horizon) {
    const std::size_t s = deconv_stride(hidden_steps, config.horizon);
    w.output.deconv = Tensor3(s, config.hidden, config.hidden);
    w.output.deconv_bias = Vector::Zero(d);
  }
  w.output.w1 = RowMatrix::Zero(d, d);
  w.output.b1 = Vector::Zero(d);
  w.output.w2 = RowMatrix::Zero(d, static_cast<Eigen::Index>(config.out_channels));
  w.output.b2 = Vector::Zero(static_cast<Eigen::Index>(config.out_channels));
  return w;
}

ModelWeights init_weights(const ModelConfig& config) {
  ModelWeights w = allocate_weights(config);
  Rng rng(config.seed);
  for (const auto& p : parameters(w)) {
    const double bound =
        p.init == Init::Projection ? std::sqrt(6.0 / (p.fan_in + p.fan_out)) : 0.0;
    for (double& v : values_of(p)) {
      switch (p.init) {
        case Init::Projection: v = rng.uniform(-bound, bound); break;
        case Init::Bias:
        case Init::BnShift: v = rng.uniform(-0.05, 0.05); break;
        case Init::BnMean: v = rng.uniform(-0.1, 0.1); break;
        case Init::BnVar: v = rng.uniform(0.5, 1.5); break;
        case Init::BnScale: v = rng.uniform(0.8, 1.2); break;
      }
    }
  }
  return w;
}

nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"layers", c.layers},
          {"hidden", c.hidden},
          {"heads", c.heads},
          {"horizon", c.horizon},
          {"out_channels", c.out_channels},
          {"seed", c.seed},
          {"in_channels", c.in_channels},
          {"in_steps", c.in_steps},
          {"kernel_sizes", c.kernel_sizes},
          {"temporal_channels", c.temporal_channels},
          {"hops", c.hops},
          {"stride", c.stride},
          {"pe_dim", c.pe_dim}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.layers = j.at("layers").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.horizon = j.at("horizon").get<std::size_t>();
    c.out_channels = j.at("out_channels").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.in_channels = j.at("in_channels").get<std::size_t>();
    c.in_steps = j.at("in_steps").get<std::size_t>();
    c.kernel_sizes = j.at("kernel_sizes").get<std::vector<std::size_t>>();
    c.temporal_channels = j.at("temporal_channels").get<std::size_t>();
    c.hops = j.at("hops").get<std::size_t>();
    c.stride = j.at("stride").get<std::size_t>();
    c.pe_dim = j.at("pe_dim").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("bad model config: ") + e.what());
  }
  return c;
}

void save_weights(const ModelConfig& config, const ModelWeights& weights,
                  const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  ModelWeights copy = weights;
  nlohmann::json arrays = nlohmann::json::array();
  for (const auto& p : parameters(copy)) {
    const auto shape = shape_of(p);
    Tensor3 t(shape[0], shape[1], shape[2]);
    const auto src = values_of(p);
    std::copy(src.begin(), src.end(), t.data().begin());
    const std::string file = p.name + ".bin";
    save_array(t, dir / file);
    arrays.push_back({{"name", p.name}, {"file", file}, {"shape", shape}});
  }
  nlohmann::json layer_order = nlohmann::json::array();
  for (std::size_t l = 0; l < config.layers; ++l) {
    layer_order.push_back("encoder." + std::to_string(l) + ".temporal");
    layer_order.push_back("encoder." + std::to_string(l) + ".spatial");
  }
  const nlohmann::json manifest{{"format", "multispans-weights-1"},
                                {"seed", config.seed},
                                {"config", config_to_json(config)},
                                {"layer_order", layer_order},
                                {"arrays", arrays}};
  std::ofstream out(dir / "manifest.json");
  if (!out) throw InputError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

std::pair<ModelConfig, ModelWeights> load_weights(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw InputError("missing manifest.json in " + dir.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("bad weights manifest: ") + e.what());
  }
  ModelConfig config = config_from_json(manifest.at("config"));
  ModelWeights w = allocate_weights(config);
  std::map<std::string, std::string> files;
  for (const auto& a : manifest.at("arrays"))
    files[a.at("name").get<std::string>()] = a.at("file").get<std::string>();
  for (const auto& p : parameters(w)) {
    const auto it = files.find(p.name);
    if (it == files.end()) throw InputError("weights bundle lacks " + p.name);
    const Tensor3 t = load_array(dir / it->second);
    const auto shape = shape_of(p);
    if (t.dim0() != shape[0] || t.dim1() != shape[1] || t.dim2() != shape[2])
      throw InputError("array " + p.name + " has the wrong shape");
    const auto dst = values_of(p);
    std::copy(t.data().begin(), t.data().end(), dst.begin());
  }
  return {config, std::move(w)};
}

}  // namespace multispans
