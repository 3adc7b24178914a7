#pragma once

#include <filesystem>
#include <utility>

#include <json.hpp>

#include "multispans/transformer.hpp"

namespace multispans {

// Zero-filled parameters with the shapes implied by the config.
ModelWeights allocate_weights(const ModelConfig& config);

// Deterministic parameters from config.seed. Every array is drawn in bundle
// order from one mt19937_64 stream: projections uniform in
// +-sqrt(6 / (fan_in + fan_out)), biases and BN shifts in +-0.05, BN means
// in +-0.1, variances and scales in [0.5, 1.5] and [0.8, 1.2].
ModelWeights init_weights(const ModelConfig& config);

nlohmann::json config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const nlohmann::json& j);

// Directory with one array container per parameter and a manifest.json
// recording shapes, layer order, config and seed.
void save_weights(const ModelConfig& config, const ModelWeights& weights,
                  const std::filesystem::path& dir);
std::pair<ModelConfig, ModelWeights> load_weights(const std::filesystem::path& dir);

}  // namespace multispans
