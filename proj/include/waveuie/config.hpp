#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "waveuie/losses.hpp"
#include "waveuie/metrics.hpp"
#include "waveuie/models.hpp"
#include "waveuie/synth.hpp"

namespace waveuie {

/// per_batch: critic_steps_per_gen critic updates before every generator
/// update. per_epoch: that many critic-only passes over the data before each
/// generator pass.
enum class CriticSchedule { PerBatch, PerEpoch };

struct TrainConfig {
    int batch_size = 4;
    double lr_structure = 0.0005;
    double lr_detail = 0.00002;
    double lr_critic = 0.00005;
    LossWeights weights;
    int critic_steps_per_gen = 5;
    CriticSchedule critic_schedule = CriticSchedule::PerBatch;
    int phase1_epochs = 100;
    int phase2_epochs = 20;
    int crop_size = 64;
    std::uint64_t seed = 0;
    double rmsprop_smoothing = 0.9;
    double rmsprop_eps = 1e-8;
};

/// Throws UsageError naming the offending field.
void validate(const TrainConfig& config);

struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    SynthSpec synth;
    MetricCoefficients metrics;
};

inline constexpr int kConfigVersion = 1;

/// Canonical JSON text: sorted keys, two-space indent, trailing newline.
std::string to_text(const RunConfig& config);
/// Missing keys keep their defaults; unknown keys, wrong types and a
/// version mismatch raise UsageError naming the key.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace waveuie
