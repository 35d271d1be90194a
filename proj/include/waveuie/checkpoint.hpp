#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "waveuie/config.hpp"
#include "waveuie/models.hpp"

namespace waveuie {

/// Epoch-mean losses. Adversarial columns are 0 in dual-stream epochs.
struct StepLosses {
    double l_s = 0.0;
    double l_d = 0.0;
    double l_adv = 0.0;
    double critic = 0.0;
    double total = 0.0;
};

struct TrainState {
    int epoch = 0;  // completed epochs
    std::uint64_t global_step = 0;
    StepLosses last;  // means over the last completed epoch
    double best_l_s = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
};

struct ParamBlob {
    std::string name;
    Shape shape;
    std::vector<float> values;
    std::vector<float> mean_square;
};

struct Checkpoint {
    RunConfig config;
    std::uint64_t seed = 0;
    TrainState state;
    std::vector<ParamBlob> params;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

Checkpoint capture(const RunConfig& config, ModelBundle& bundle, const TrainState& state);
/// Copies values and RMSProp state into a bundle built from the same config.
void restore(const Checkpoint& checkpoint, ModelBundle& bundle);
ModelBundle build_bundle(const Checkpoint& checkpoint);

/// Binary layout: magic "WUIECKPT", u32 version, config text, state, named
/// little-endian float32 blobs, trailing CRC-32 of everything before it.
std::vector<std::uint8_t> serialize(const Checkpoint& checkpoint);
/// Throws IoError on a bad magic, version mismatch, truncation or checksum
/// failure.
Checkpoint deserialize(const std::vector<std::uint8_t>& bytes, const std::string& origin = "checkpoint");

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace waveuie
