#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "test_support.hpp"
#include "waveuie/errors.hpp"
#include "waveuie/io.hpp"
#include "waveuie/losses.hpp"
#include "waveuie/ops.hpp"
#include "waveuie/optim.hpp"
#include "waveuie/trainer.hpp"
#include "waveuie/wavelet.hpp"

namespace waveuie {
namespace {

namespace fs = std::filesystem;
using testing::smooth_scene;

RunConfig toy_config() {
    RunConfig c;
    c.model.structure.levels = 2;
    c.model.structure.base_channels = 8;
    c.model.critic.layers = 3;
    c.model.critic.base_channels = 4;
    c.train.crop_size = 16;
    c.train.batch_size = 2;
    c.train.phase1_epochs = 2;
    c.train.phase2_epochs = 1;
    c.train.critic_steps_per_gen = 2;
    c.train.seed = 11;
    return c;
}

Image hazy(const Image& clean) {
    Image out = clean;
    const double b[3] = {0.1, 0.5, 0.6};
    for (int ch = 0; ch < 3; ++ch)
        for (double& v : out.plane(ch)) v = 0.6 * v + 0.4 * b[ch];
    return out;
}

std::vector<TrainingPair> toy_pairs(int n = 4, int size = 24) {
    std::vector<TrainingPair> pairs;
    for (int i = 0; i < n; ++i) {
        Image clean = smooth_scene(size, size, 100 + i);
        pairs.push_back({"p" + std::to_string(i), hazy(clean), clean});
    }
    return pairs;
}

Batch first_batch(const RunConfig& c) { return epoch_batches(toy_pairs(), c.train, 1).front(); }

std::uint64_t generator_hash(ModelBundle& b) { return hash_values(b.generator_parameters()); }
std::uint64_t critic_hash(ModelBundle& b) { return hash_values(b.critic_parameters()); }

std::string read_file(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

TEST(Trainer, EpochBatchesDependOnSeedAndEpoch) {
    const RunConfig c = toy_config();
    const auto pairs = toy_pairs(5);
    const auto a = epoch_batches(pairs, c.train, 1);
    const auto b = epoch_batches(pairs, c.train, 1);
    ASSERT_EQ(a.size(), 3u);
    EXPECT_EQ(a.back().degraded.dim(0), 1);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].indices, b[i].indices);
        EXPECT_TRUE(std::equal(a[i].clean.data().begin(), a[i].clean.data().end(), b[i].clean.data().begin()));
    }
    const auto other = epoch_batches(pairs, c.train, 2);
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i)
        differs |= !std::equal(a[i].clean.data().begin(), a[i].clean.data().end(), other[i].clean.data().begin());
    EXPECT_TRUE(differs);
    EXPECT_EQ(a[0].clean.dim(2), 16);
}

TEST(Trainer, MimickingPredictionGivesNearZeroLosses) {
    RunConfig c = toy_config();
    c.model.switches.use_detail_net = false;
    ModelBundle bundle(c.model, 1);
    bundle.structure_override = [](const Tensor& ll) { return ll; };
    const Tensor clean = to_batch(std::vector<Image>{smooth_scene(16, 16, 3)});
    const GeneratorLosses l = generator_losses(bundle, bundle.generate(clean), clean, c.train);
    EXPECT_NEAR(l.l_s.item(), 0.0, 1e-9);
    EXPECT_NEAR(l.l_d.item(), 0.0, 1e-12);

    c.model.switches.use_detail_net = true;
    ModelBundle full(c.model, 1);
    const TensorBands bands = dwt2(clean);
    Generated g;
    g.structure = bands.ll;
    g.detail_lh = bands.lh;
    g.detail_hl = bands.hl;
    g.detail_hh = bands.hh;
    const GeneratorLosses lf = generator_losses(full, g, clean, c.train);
    EXPECT_NEAR(lf.l_s.item(), 0.0, 1e-9);
    EXPECT_NEAR(lf.l_d.item(), 0.0, 1e-12);
}

TEST(Trainer, DualStepBookkeepingAndIsolation) {
    const RunConfig c = toy_config();
    ModelBundle bundle(c.model, 2);
    const Batch b = first_batch(c);
    const auto critic_before = critic_hash(bundle);
    const auto gen_before = generator_hash(bundle);
    const StepLosses s = train_step_dual(bundle, b.degraded, b.clean, c.train);
    EXPECT_NEAR(s.total, 0.5 * s.l_s + 1.0 * s.l_d, 1e-6);
    EXPECT_EQ(s.l_adv, 0.0);
    EXPECT_EQ(critic_hash(bundle), critic_before);
    EXPECT_NE(generator_hash(bundle), gen_before);
}

TEST(Trainer, ZeroRateLeavesSubNetworkUnchanged) {
    RunConfig c = toy_config();
    c.train.lr_detail = 0.0;
    ModelBundle bundle(c.model, 2);
    const Batch b = first_batch(c);
    const auto detail_before = hash_values(bundle.detail_parameters());
    const auto structure_before = hash_values(bundle.structure_parameters());
    train_step_dual(bundle, b.degraded, b.clean, c.train);
    train_step_dual(bundle, b.degraded, b.clean, c.train);
    EXPECT_EQ(hash_values(bundle.detail_parameters()), detail_before);
    EXPECT_NE(hash_values(bundle.structure_parameters()), structure_before);
}

TEST(Trainer, GanStepIsolatesGeneratorDuringCriticSteps) {
    const RunConfig c = toy_config();
    ModelBundle bundle(c.model, 4);
    const Batch b = first_batch(c);
    const auto gen_before = generator_hash(bundle);
    int calls = 0;
    const StepLosses s = train_step_gan(bundle, b.degraded, b.clean, c.train, [&](ModelBundle& m, int k) {
        EXPECT_EQ(k, calls);
        EXPECT_EQ(generator_hash(m), gen_before);
        for (Parameter* p : m.critic_parameters())
            for (double v : p->value.data()) ASSERT_LE(std::abs(v), 0.01);
        ++calls;
    });
    EXPECT_EQ(calls, c.train.critic_steps_per_gen);
    EXPECT_NE(generator_hash(bundle), gen_before);
    EXPECT_NEAR(s.total, 0.5 * s.l_s + s.l_d + s.l_adv, 1e-6);
    EXPECT_TRUE(std::isfinite(s.critic));
}

TEST(Trainer, ZeroCriticRateKeepsScores) {
    RunConfig c = toy_config();
    c.train.lr_critic = 0.0;
    c.model.critic.clip = 1e9;
    ModelBundle bundle(c.model, 4);
    const Batch b = first_batch(c);
    Tensor before;
    {
        NoGradGuard g;
        before = bundle.critic.forward(b.clean);
    }
    for (int i = 0; i < 3; ++i) train_step_gan(bundle, b.degraded, b.clean, c.train);
    NoGradGuard g;
    const Tensor after = bundle.critic.forward(b.clean);
    EXPECT_TRUE(std::equal(before.data().begin(), before.data().end(), after.data().begin()));
}

TEST(Trainer, CriticLossFallsOnFrozenGenerator) {
    RunConfig c = toy_config();
    c.train.lr_critic = 1e-3;
    c.model.critic.clip = 1.0;
    ModelBundle bundle(c.model, 6);
    const Batch b = first_batch(c);
    Tensor fake;
    {
        NoGradGuard g;
        fake = bundle.generate(b.degraded).image;
    }
    const auto gen_before = generator_hash(bundle);
    const double first = critic_step(bundle, fake, b.clean, c.train);
    double last = first;
    for (int i = 0; i < 40; ++i) last = critic_step(bundle, fake, b.clean, c.train);
    EXPECT_LT(last, first);
    EXPECT_EQ(generator_hash(bundle), gen_before);
}

TEST(Trainer, RepeatedStepsOnOnePairReduceLoss) {
    RunConfig c = toy_config();
    c.train.batch_size = 1;
    ModelBundle bundle(c.model, 8);
    const Batch b = epoch_batches(toy_pairs(1), c.train, 1).front();
    const double first = train_step_dual(bundle, b.degraded, b.clean, c.train).l_s;
    double last = first;
    for (int i = 0; i < 60; ++i) last = train_step_dual(bundle, b.degraded, b.clean, c.train).l_s;
    EXPECT_LT(last, 0.8 * first);
}

TEST(Trainer, NonFiniteLossAbortsWithDump) {
    RunConfig c = toy_config();
    auto pairs = toy_pairs(2);
    for (double& v : pairs[0].degraded.data) v = std::nan("");
    for (double& v : pairs[1].degraded.data) v = std::nan("");
    testing::ScratchDir dir("nan");
    TrainOptions o;
    o.checkpoint_dir = dir.path();
    EXPECT_THROW(train(pairs, c, o), NumericError);
    bool dumped = false;
    for (const auto& e : fs::directory_iterator(dir.path()))
        dumped |= e.path().filename().string().rfind("nan_dump_", 0) == 0 &&
                  fs::exists(e.path() / "degraded_0.png") && fs::exists(e.path() / "sources.txt");
    EXPECT_TRUE(dumped);
    EXPECT_EQ(read_file(dir / "losses.tsv"), "epoch\tstep\tL_S\tL_D\tL_adv\tcritic_loss\n");
}

TEST(Trainer, EmptyDatasetIsUsageError) {
    EXPECT_THROW(train(std::vector<TrainingPair>{}, toy_config(), {}), UsageError);
    EXPECT_THROW(load_training_set(Manifest{}), UsageError);
}

TEST(Trainer, CropMustSuitModel) {
    RunConfig c = toy_config();
    c.train.crop_size = 12;
    EXPECT_THROW(train(toy_pairs(), c, {}), UsageError);
    c.train.crop_size = 32;
    EXPECT_THROW(train(toy_pairs(), c, {}), DimensionError);
}

TEST(Trainer, PhasesAndFiles) {
    const RunConfig c = toy_config();
    testing::ScratchDir dir("train");
    TrainOptions o;
    o.checkpoint_dir = dir.path();
    o.keep_checkpoints = 2;
    ModelBundle init(c.model, c.train.seed);
    const auto critic_init = critic_hash(init);
    std::vector<std::uint64_t> critic_after;
    o.hooks.on_epoch = [&](const EpochRecord&) {};
    o.hooks.after_generator_step = [&](ModelBundle& m) { critic_after.push_back(critic_hash(m)); };
    const TrainResult r = train(toy_pairs(), c, o);
    ASSERT_EQ(r.history.size(), 3u);
    EXPECT_EQ(r.history[0].phase, 1);
    EXPECT_EQ(r.history[2].phase, 2);
    EXPECT_EQ(r.history[0].losses.l_adv, 0.0);
    EXPECT_EQ(r.history[0].losses.critic, 0.0);
    EXPECT_NE(r.history[2].losses.l_adv, 0.0);
    for (const auto& h : r.history) {
        const double expect = 0.5 * h.losses.l_s + h.losses.l_d + h.losses.l_adv;
        EXPECT_NEAR(h.losses.total, expect, 1e-6);
    }
    // Phase-1 steps (2 epochs x 2 batches) never move the critic.
    ASSERT_EQ(critic_after.size(), 6u);
    for (int i = 0; i < 4; ++i) EXPECT_EQ(critic_after[i], critic_init);
    EXPECT_NE(critic_after[5], critic_init);

    EXPECT_FALSE(fs::exists(dir / "epoch_0001.ckpt"));
    EXPECT_TRUE(fs::exists(dir / "epoch_0002.ckpt"));
    EXPECT_TRUE(fs::exists(dir / "epoch_0003.ckpt"));
    EXPECT_TRUE(fs::exists(dir / "final.ckpt"));
    const std::string log = read_file(dir / "losses.tsv");
    std::istringstream lines(log);
    std::string line;
    std::getline(lines, line);
    EXPECT_EQ(line, "epoch\tstep\tL_S\tL_D\tL_adv\tcritic_loss");
    int rows = 0;
    while (std::getline(lines, line)) {
        ++rows;
        EXPECT_EQ(line.rfind(std::to_string(rows) + "\t" + std::to_string(2 * rows) + "\t", 0), 0u) << line;
    }
    EXPECT_EQ(rows, 3);
    EXPECT_EQ(load_checkpoint(dir / "final.ckpt").state.epoch, 3);

    EXPECT_THROW(train(toy_pairs(), c, o), UsageError);
    o.overwrite = true;
    o.hooks = {};
    EXPECT_NO_THROW(train(toy_pairs(), c, o));
}

TEST(Trainer, DeterministicAndResumable) {
    const RunConfig c = toy_config();
    testing::ScratchDir a("run_a"), b("run_b"), resumed("run_r");
    TrainOptions oa, ob, or_;
    oa.checkpoint_dir = a.path();
    oa.keep_checkpoints = 0;
    ob.checkpoint_dir = b.path();
    const TrainResult ra = train(toy_pairs(), c, oa);
    const TrainResult rb = train(toy_pairs(), c, ob);
    EXPECT_EQ(serialize(ra.final), serialize(rb.final));
    EXPECT_EQ(read_file(a / "losses.tsv"), read_file(b / "losses.tsv"));

    or_.checkpoint_dir = resumed.path();
    or_.resume = a / "epoch_0001.ckpt";
    const TrainResult rr = train(toy_pairs(), RunConfig{}, or_);
    ASSERT_EQ(rr.history.size(), 2u);
    EXPECT_EQ(rr.history[0].epoch, 2);
    for (int i = 0; i < 2; ++i) {
        EXPECT_EQ(rr.history[i].losses.l_s, ra.history[i + 1].losses.l_s);
        EXPECT_EQ(rr.history[i].losses.l_d, ra.history[i + 1].losses.l_d);
        EXPECT_EQ(rr.history[i].losses.l_adv, ra.history[i + 1].losses.l_adv);
        EXPECT_EQ(rr.history[i].losses.critic, ra.history[i + 1].losses.critic);
        EXPECT_EQ(rr.history[i].step, ra.history[i + 1].step);
    }
    EXPECT_EQ(serialize(rr.final), serialize(ra.final));

    // Resuming inside the original run directory rewrites the tail of its log.
    TrainOptions again;
    again.checkpoint_dir = a.path();
    again.resume = a / "epoch_0002.ckpt";
    const std::string full_log = read_file(a / "losses.tsv");
    train(toy_pairs(), RunConfig{}, again);
    EXPECT_EQ(read_file(a / "losses.tsv"), full_log);
}

TEST(Trainer, PerEpochScheduleRuns) {
    RunConfig c = toy_config();
    c.train.phase1_epochs = 0;
    c.train.critic_schedule = CriticSchedule::PerEpoch;
    int critic_steps = 0;
    TrainOptions o;
    o.hooks.after_critic_step = [&](ModelBundle&, int) { ++critic_steps; };
    const TrainResult r = train(toy_pairs(), c, o);
    EXPECT_EQ(critic_steps, 2 * 2);
    EXPECT_EQ(r.history.size(), 1u);
    EXPECT_EQ(r.history[0].step, 2u);
}

TEST(Evaluate, EmptyReport) {
    const MetricReport r = evaluate(nullptr, {}, {Metric::Uiqm});
    EXPECT_TRUE(r.rows.empty());
    EXPECT_TRUE(r.skipped.empty());
}

TEST(Evaluate, MeanMatchesRowsAndTimesEnhancement) {
    testing::ScratchDir dir("eval");
    std::vector<EvalItem> items;
    for (int i = 0; i < 3; ++i) {
        const std::string name = "im" + std::to_string(i) + ".png";
        save_image(dir / ("pred_" + name), smooth_scene(20, 20, i));
        save_image(dir / ("ref_" + name), smooth_scene(20, 20, 50 + i));
        items.push_back({name, dir / ("pred_" + name), dir / ("ref_" + name)});
    }
    items.push_back({"gone.png", dir / "gone.png", std::nullopt});
    const MetricReport r = evaluate(nullptr, items, {Metric::Ssim, Metric::Uciqe});
    ASSERT_EQ(r.rows.size(), 3u);
    ASSERT_EQ(r.skipped, std::vector<std::string>{"gone.png"});
    for (std::size_t m = 0; m < 2; ++m) {
        double sum = 0.0;
        for (const auto& row : r.rows) sum += row.values[m];
        EXPECT_NEAR(r.mean(m), sum / 3.0, 1e-12);
    }
    EXPECT_EQ(r.mean_seconds(), 0.0);

    ModelBundle bundle(toy_config().model, 1);
    const MetricReport timed = evaluate(&bundle, items, {Metric::Uiqm});
    ASSERT_EQ(timed.rows.size(), 3u);
    for (const auto& row : timed.rows) EXPECT_GT(row.seconds, 0.0);
    EXPECT_GT(timed.mean_seconds(), 0.0);
}

}  // namespace
}  // namespace waveuie
