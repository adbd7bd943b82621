#pragma once

#include <filesystem>
#include <optional>

#include <nlohmann/json.hpp>

#include "stainbench/models.hpp"
#include "stainbench/optim.hpp"

namespace stainbench {

/// Binary container: magic "SBNCKPT1", a little-endian u32 header length, a
/// JSON header (model spec, train config, epoch, parameter table), then raw
/// float32 little-endian buffers in registry order (weights then bias per
/// parameter), optionally followed by the momentum buffers in the same
/// layout. See docs/FORMATS.md.
struct Checkpoint {
    ModelSpec spec;
    TrainConfig config;
    int epoch = 0;  // completed epochs
    Model<float> model;
    std::optional<SgdState<float>> velocity;
};

void save_checkpoint(const std::filesystem::path& path, const Model<float>& model,
                     const TrainConfig& config, int epoch,
                     const SgdState<float>* velocity = nullptr);

Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json model_spec_to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);
nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

}  // namespace stainbench
