#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "deconf/corpus.hpp"
#include "deconf/lr_baseline.hpp"
#include "deconf/training.hpp"

namespace deconf {

inline constexpr std::string_view kCheckpointFormat = "deconf-checkpoint/1";

// Everything needed to resume training or to evaluate: the vocabulary and
// class order, the configuration echo, all tensors, the adversary pool,
// optimizer moments, phase counters and RNG state.
struct Checkpoint {
    TrainMode mode = TrainMode::noadv;
    std::vector<std::string> classes;
    Vocabulary vocab;
    TrainConfig train_config;
    std::optional<TrainState> state;      // neural modes
    std::optional<LinearModel> linear;    // lr mode
};

// CBOR-encoded document; the same inputs always produce identical bytes.
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Class-probability predictor for whichever model the checkpoint carries; it
// holds its own copy of the model.
std::function<std::vector<double>(const Document&)> checkpoint_predictor(const Checkpoint& ckpt);

}  // namespace deconf
