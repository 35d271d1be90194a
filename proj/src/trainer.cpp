#include "waveuie/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

#include "waveuie/errors.hpp"
#include "waveuie/io.hpp"
#include "waveuie/losses.hpp"
#include "waveuie/ops.hpp"
#include "waveuie/optim.hpp"
#include "waveuie/wavelet.hpp"

namespace waveuie {

namespace fs = std::filesystem;

namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint32_t purpose, std::uint32_t a, std::uint32_t b = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), purpose, a, b};
    return std::mt19937_64(seq);
}

constexpr std::uint32_t kShuffle = 1, kCrop = 2;

void require_finite(const std::vector<std::pair<const char*, double>>& values) {
    for (const auto& [name, v] : values) {
        if (!std::isfinite(v)) {
            std::string msg = "non-finite loss:";
            for (const auto& [n, x] : values) msg += std::string(" ") + n + "=" + std::to_string(x);
            throw NumericError(msg);
        }
    }
}

RmsPropOptions rms(const TrainConfig& c, double lr) { return {lr, c.rmsprop_smoothing, c.rmsprop_eps}; }

double value(const Tensor& t) { return t.defined() ? t.item() : 0.0; }

void accumulate(StepLosses& sum, const StepLosses& s) {
    sum.l_s += s.l_s;
    sum.l_d += s.l_d;
    sum.l_adv += s.l_adv;
    sum.critic += s.critic;
    sum.total += s.total;
}

StepLosses scaled(StepLosses s, double k) {
    s.l_s *= k;
    s.l_d *= k;
    s.l_adv *= k;
    s.critic *= k;
    s.total *= k;
    return s;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string epoch_file(int epoch) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "epoch_%04d.ckpt", epoch);
    return buf;
}

constexpr const char* kLossHeader = "epoch\tstep\tL_S\tL_D\tL_adv\tcritic_loss";

std::vector<std::string> log_rows_through(const fs::path& path, int epoch) {
    std::ifstream in(path);
    std::vector<std::string> rows;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (!line.empty() && std::atoi(line.c_str()) <= epoch) rows.push_back(line);
    }
    return rows;
}

void check_parameters(ModelBundle& bundle, int epoch) {
    for (Parameter* p : bundle.all_parameters()) {
        for (double v : p->value.data()) {
            if (!std::isfinite(v)) {
                throw NumericError("parameter " + p->name + " became non-finite in epoch " + std::to_string(epoch));
            }
        }
    }
}

void dump_batch(const fs::path& dir, const Batch& batch, const std::vector<TrainingPair>& pairs) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) return;
    for (std::int64_t i = 0; i < batch.degraded.dim(0); ++i) {
        const std::string name = pairs[batch.indices[static_cast<std::size_t>(i)]].name;
        try {
            save_image(dir / ("degraded_" + std::to_string(i) + ".png"), to_image(batch.degraded, i));
            save_image(dir / ("clean_" + std::to_string(i) + ".png"), to_image(batch.clean, i));
        } catch (const std::exception&) {
        }
        std::ofstream(dir / "sources.txt", std::ios::app) << i << '\t' << name << '\n';
    }
}

}  // namespace

std::vector<TrainingPair> load_training_set(const Manifest& manifest) {
    if (manifest.rows.empty()) throw UsageError("training manifest has no rows");
    std::map<std::string, Image> clean_cache;
    std::vector<TrainingPair> pairs;
    for (const ManifestRow& row : manifest.rows) {
        auto it = clean_cache.find(row.source);
        if (it == clean_cache.end()) it = clean_cache.emplace(row.source, load_image(manifest.clean_path(row))).first;
        Image degraded = load_image(manifest.degraded_path(row));
        if (degraded.height != it->second.height || degraded.width != it->second.width) {
            throw DimensionError("degraded image " + row.variant + " does not match its clean target");
        }
        pairs.push_back({row.variant, std::move(degraded), it->second});
    }
    return pairs;
}

std::vector<Batch> epoch_batches(const std::vector<TrainingPair>& pairs, const TrainConfig& config, int epoch) {
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    auto rng = stream(config.seed, kShuffle, static_cast<std::uint32_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Batch> batches;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
        const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
        std::vector<Image> deg, clean;
        Batch b;
        for (std::size_t k = start; k < end; ++k) {
            const TrainingPair& p = pairs[order[k]];
            auto crop_rng = stream(config.seed, kCrop, static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(k));
            auto [c, d] = random_crop_pair(p.clean, p.degraded, config.crop_size, crop_rng());
            clean.push_back(std::move(c));
            deg.push_back(std::move(d));
            b.indices.push_back(order[k]);
        }
        b.degraded = to_batch(deg);
        b.clean = to_batch(clean);
        batches.push_back(std::move(b));
    }
    return batches;
}

GeneratorLosses generator_losses(const ModelBundle& bundle, const Generated& g, const Tensor& clean,
                                 const TrainConfig& config) {
    const bool detail = bundle.config.switches.use_detail_net;
    GeneratorLosses out;
    if (!bundle.config.switches.use_dwt) {
        out.l_s = structure_loss(g.structure, mul_scalar(clean, 2.0), config.weights.alpha);
        out.l_d = detail ? detail_loss(g.image, clean) : Tensor::scalar(0.0);
        return out;
    }
    const TensorBands target = dwt2(clean);
    out.l_s = structure_loss(g.structure, target.ll, config.weights.alpha);
    out.l_d = detail ? detail_loss(g.detail_lh, target.lh) + detail_loss(g.detail_hl, target.hl) +
                           detail_loss(g.detail_hh, target.hh)
                     : Tensor::scalar(0.0);
    return out;
}

namespace {

StepLosses update_generator(ModelBundle& bundle, const Tensor& degraded, const Tensor& clean, const TrainConfig& config,
                            bool adversarial) {
    const Generated g = bundle.generate(degraded);
    const GeneratorLosses gl = generator_losses(bundle, g, clean, config);
    Tensor adv;
    if (adversarial) adv = neg(reduce_mean(bundle.critic.forward(g.image)));
    const Tensor total = total_loss(gl.l_s, gl.l_d, adv, config.weights);
    StepLosses s{value(gl.l_s), value(gl.l_d), value(adv), 0.0, total.item()};
    require_finite({{"L_S", s.l_s}, {"L_D", s.l_d}, {"L_adv", s.l_adv}, {"total", s.total}});
    total.backward();
    auto structure = bundle.structure_parameters();
    auto detail = bundle.detail_parameters();
    rmsprop_step(structure, rms(config, config.lr_structure));
    if (!detail.empty()) rmsprop_step(detail, rms(config, config.lr_detail));
    auto critic = bundle.critic_parameters();
    zero_grad(critic);
    return s;
}

}  // namespace

StepLosses train_step_dual(ModelBundle& bundle, const Tensor& degraded, const Tensor& clean, const TrainConfig& config) {
    return update_generator(bundle, degraded, clean, config, false);
}

StepLosses generator_step(ModelBundle& bundle, const Tensor& degraded, const Tensor& clean, const TrainConfig& config) {
    return update_generator(bundle, degraded, clean, config, true);
}

double critic_step(ModelBundle& bundle, const Tensor& fake, const Tensor& real, const TrainConfig& config) {
    const Tensor loss = wgan_losses(bundle.critic.forward(real), bundle.critic.forward(fake.detach())).critic;
    const double l = loss.item();
    require_finite({{"critic_loss", l}});
    loss.backward();
    auto critic = bundle.critic_parameters();
    rmsprop_step(critic, rms(config, config.lr_critic));
    const double clip = bundle.config.critic.clip;
    clamp_params(critic, -clip, clip);
    return l;
}

namespace {

Tensor generate_fake(const ModelBundle& bundle, const Tensor& degraded) {
    NoGradGuard guard;
    return bundle.generate(degraded).image;
}

}  // namespace

StepLosses train_step_gan(ModelBundle& bundle, const Tensor& degraded, const Tensor& clean, const TrainConfig& config,
                          const CriticObserver& observer) {
    const Tensor fake = generate_fake(bundle, degraded);
    double critic = 0.0;
    for (int k = 0; k < config.critic_steps_per_gen; ++k) {
        critic += critic_step(bundle, fake, clean, config);
        if (observer) observer(bundle, k);
    }
    StepLosses s = generator_step(bundle, degraded, clean, config);
    s.critic = critic / config.critic_steps_per_gen;
    return s;
}

TrainResult train(const std::vector<TrainingPair>& pairs, const RunConfig& run_config, const TrainOptions& options) {
    if (pairs.empty()) throw UsageError("training set is empty");
    RunConfig config = run_config;
    TrainState state;
    std::optional<Checkpoint> resumed;
    if (options.resume) {
        resumed = load_checkpoint(*options.resume);
        config = resumed->config;
        state = resumed->state;
    }
    const TrainConfig& tc = config.train;
    validate(tc);
    ModelBundle bundle(config.model, tc.seed);
    if (resumed) restore(*resumed, bundle);
    const std::int64_t divisor = bundle.input_divisor();
    if (tc.crop_size % divisor != 0) {
        throw UsageError("crop_size " + std::to_string(tc.crop_size) + " must be a multiple of " +
                         std::to_string(divisor) + " for this model");
    }
    if (config.model.switches.use_gan && tc.phase2_epochs > 0 && tc.crop_size < bundle.critic.min_size()) {
        throw UsageError("crop_size is smaller than the critic's minimum input " +
                         std::to_string(bundle.critic.min_size()));
    }
    for (const auto& p : pairs) {
        if (p.clean.height < tc.crop_size || p.clean.width < tc.crop_size) {
            throw DimensionError("training image " + p.name + " is smaller than crop_size " +
                                 std::to_string(tc.crop_size));
        }
    }

    const bool files = !options.checkpoint_dir.empty();
    const fs::path loss_path = options.checkpoint_dir / "losses.tsv";
    std::ofstream losses;
    if (files) {
        std::error_code ec;
        fs::create_directories(options.checkpoint_dir, ec);
        if (ec) throw IoError("cannot create " + options.checkpoint_dir.string() + ": " + ec.message());
        if (!resumed && !options.overwrite &&
            (fs::exists(loss_path) || fs::exists(options.checkpoint_dir / "final.ckpt"))) {
            throw UsageError("checkpoint directory " + options.checkpoint_dir.string() +
                             " already holds a run (use --force or --resume)");
        }
        // A resumed run keeps the log rows up to the checkpoint's epoch.
        std::vector<std::string> kept;
        if (resumed && fs::exists(loss_path)) kept = log_rows_through(loss_path, state.epoch);
        losses.open(loss_path, std::ios::trunc);
        if (!losses) throw IoError("cannot write " + loss_path.string());
        losses << kLossHeader << '\n';
        for (const auto& row : kept) losses << row << '\n';
        losses.flush();
    }

    TrainResult result;
    std::vector<int> written;
    const int total_epochs = tc.phase1_epochs + tc.phase2_epochs;
    for (int epoch = state.epoch + 1; epoch <= total_epochs; ++epoch) {
        const int phase = epoch <= tc.phase1_epochs ? 1 : 2;
        const bool gan = phase == 2 && config.model.switches.use_gan;
        const auto batches = epoch_batches(pairs, tc, epoch);
        StepLosses sum;
        try {
            if (gan && tc.critic_schedule == CriticSchedule::PerEpoch) {
                std::vector<Tensor> fakes;
                for (const Batch& b : batches) fakes.push_back(generate_fake(bundle, b.degraded));
                double critic = 0.0;
                for (int k = 0; k < tc.critic_steps_per_gen; ++k)
                    for (std::size_t i = 0; i < batches.size(); ++i) {
                        if (options.hooks.before_batch) options.hooks.before_batch(bundle);
                        critic += critic_step(bundle, fakes[i], batches[i].clean, tc);
                        if (options.hooks.after_critic_step) options.hooks.after_critic_step(bundle, k);
                    }
                for (const Batch& b : batches) {
                    StepLosses s = generator_step(bundle, b.degraded, b.clean, tc);
                    ++state.global_step;
                    if (options.hooks.after_generator_step) options.hooks.after_generator_step(bundle);
                    accumulate(sum, s);
                }
                sum.critic = critic / tc.critic_steps_per_gen;
            } else {
                for (const Batch& b : batches) {
                    if (options.hooks.before_batch) options.hooks.before_batch(bundle);
                    StepLosses s;
                    try {
                        s = gan ? train_step_gan(bundle, b.degraded, b.clean, tc, options.hooks.after_critic_step)
                                : train_step_dual(bundle, b.degraded, b.clean, tc);
                    } catch (const NumericError& e) {
                        if (!files) throw;
                        const fs::path dump = options.checkpoint_dir /
                                              ("nan_dump_epoch" + std::to_string(epoch) + "_step" +
                                               std::to_string(state.global_step + 1));
                        dump_batch(dump, b, pairs);
                        throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                                           ", step inputs saved to " + dump.string() + ")");
                    }
                    ++state.global_step;
                    if (options.hooks.after_generator_step) options.hooks.after_generator_step(bundle);
                    accumulate(sum, s);
                }
            }
        } catch (const NumericError&) {
            if (losses.is_open()) losses.flush();
            throw;
        }
        check_parameters(bundle, epoch);
        StepLosses mean = scaled(sum, 1.0 / static_cast<double>(batches.size()));
        if (tc.critic_schedule == CriticSchedule::PerEpoch && gan) mean.critic = sum.critic;
        state.epoch = epoch;
        state.last = mean;
        if (mean.l_s < state.best_l_s) {
            state.best_l_s = mean.l_s;
            state.best_epoch = epoch;
        }
        const EpochRecord record{epoch, phase, state.global_step, mean};
        result.history.push_back(record);
        if (files) {
            losses << epoch << '\t' << state.global_step << '\t' << fmt(mean.l_s) << '\t' << fmt(mean.l_d) << '\t'
                   << fmt(mean.l_adv) << '\t' << fmt(mean.critic) << '\n';
            losses.flush();
            if (!losses) throw IoError("failed writing " + loss_path.string());
            save_checkpoint(options.checkpoint_dir / epoch_file(epoch), capture(config, bundle, state));
            written.push_back(epoch);
            if (options.keep_checkpoints > 0 && static_cast<int>(written.size()) > options.keep_checkpoints) {
                std::error_code ec;
                fs::remove(options.checkpoint_dir / epoch_file(written.front()), ec);
                written.erase(written.begin());
            }
        }
        if (options.hooks.on_epoch) options.hooks.on_epoch(record);
    }
    result.final = capture(config, bundle, state);
    if (files) save_checkpoint(options.checkpoint_dir / "final.ckpt", result.final);
    return result;
}

TrainResult train(const Manifest& manifest, const RunConfig& config, const TrainOptions& options) {
    return train(load_training_set(manifest), config, options);
}

MetricReport evaluate(const ModelBundle* bundle, const std::vector<EvalItem>& items, const std::vector<Metric>& metrics,
                      const MetricCoefficients& coefficients) {
    MetricReport report;
    report.metrics = metrics;
    for (const EvalItem& item : items) {
        Image pred, ref;
        try {
            pred = load_image(item.input);
            if (item.reference) ref = load_image(*item.reference);
        } catch (const IoError&) {
            report.skipped.push_back(item.name);
            continue;
        }
        MetricReport::Row row{item.name, {}, 0.0};
        if (bundle) {
            const auto t0 = std::chrono::steady_clock::now();
            pred = enhance(*bundle, pred);
            row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
        for (Metric m : metrics) row.values.push_back(compute_metric(m, pred, item.reference ? &ref : nullptr, coefficients));
        report.rows.push_back(std::move(row));
    }
    return report;
}

}  // namespace waveuie
