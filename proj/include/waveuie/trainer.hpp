#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "waveuie/checkpoint.hpp"
#include "waveuie/config.hpp"
#include "waveuie/metrics.hpp"
#include "waveuie/models.hpp"
#include "waveuie/synth.hpp"

namespace waveuie {

struct TrainingPair {
    std::string name;
    Image degraded;
    Image clean;
};

/// Loads every manifest row. Empty manifests raise UsageError.
std::vector<TrainingPair> load_training_set(const Manifest& manifest);

struct Batch {
    Tensor degraded;  // [N,3,crop,crop]
    Tensor clean;
    std::vector<std::size_t> indices;
};

/// Batches of one epoch: a seeded shuffle, then a seeded crop per sample.
/// Depends only on (seed, epoch), so resumed runs see the same data.
std::vector<Batch> epoch_batches(const std::vector<TrainingPair>& pairs, const TrainConfig& config, int epoch);

/// L_S and L_D of a generated batch against its clean targets.
struct GeneratorLosses {
    Tensor l_s;
    Tensor l_d;
};
GeneratorLosses generator_losses(const ModelBundle& bundle, const Generated& g, const Tensor& clean,
                                 const TrainConfig& config);

/// Dual-stream step: joint backward of lambda1 L_S + lambda2 L_D, then one
/// RMSProp step per sub-network at its own rate. Non-finite losses raise
/// NumericError before any parameter changes.
StepLosses train_step_dual(ModelBundle& bundle, const Tensor& degraded, const Tensor& clean, const TrainConfig& config);

/// One critic update on fixed fake images, then clipping to +-clip.
double critic_step(ModelBundle& bundle, const Tensor& fake, const Tensor& real, const TrainConfig& config);

/// Generator update with all three loss terms; critic gradients are dropped.
StepLosses generator_step(ModelBundle& bundle, const Tensor& degraded, const Tensor& clean, const TrainConfig& config);

using CriticObserver = std::function<void(ModelBundle&, int substep)>;

/// critic_steps_per_gen critic steps against one generated batch, then one
/// generator step. critic is the mean critic loss over the sub-steps.
StepLosses train_step_gan(ModelBundle& bundle, const Tensor& degraded, const Tensor& clean, const TrainConfig& config,
                          const CriticObserver& observer = {});

struct EpochRecord {
    int epoch = 0;
    int phase = 0;
    std::uint64_t step = 0;  // global step count at the end of the epoch
    StepLosses losses;
};

struct TrainHooks {
    std::function<void(ModelBundle&)> before_batch;
    CriticObserver after_critic_step;
    std::function<void(ModelBundle&)> after_generator_step;
    std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainOptions {
    std::filesystem::path checkpoint_dir;  // empty: no files written
    std::optional<std::filesystem::path> resume;
    bool overwrite = false;
    int keep_checkpoints = 3;  // newest epoch_NNNN.ckpt files kept; 0 keeps all
    TrainHooks hooks;
};

struct TrainResult {
    Checkpoint final;
    std::vector<EpochRecord> history;
};

/// Phase-1 epochs of dual steps, then phase-2 epochs of GAN steps (dual
/// steps when the GAN switch is off). Writes epoch_NNNN.ckpt, final.ckpt and
/// losses.tsv into checkpoint_dir. On resume the checkpoint's config is used
/// and numbering continues after its epoch.
TrainResult train(const std::vector<TrainingPair>& pairs, const RunConfig& config, const TrainOptions& options);
TrainResult train(const Manifest& manifest, const RunConfig& config, const TrainOptions& options);

struct EvalItem {
    std::string name;
    std::filesystem::path input;
    std::optional<std::filesystem::path> reference;
};

/// Scores each item (after enhancing it when a bundle is given, timing the
/// enhancement). Unreadable images are skipped and listed.
MetricReport evaluate(const ModelBundle* bundle, const std::vector<EvalItem>& items, const std::vector<Metric>& metrics,
                      const MetricCoefficients& coefficients = {});

}  // namespace waveuie
