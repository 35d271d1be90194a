#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include "test_support.hpp"
#include "waveuie/checkpoint.hpp"
#include "waveuie/config.hpp"
#include "waveuie/io.hpp"

namespace waveuie {
namespace {

namespace fs = std::filesystem;
using testing::ScratchDir;

int run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " " + WAVEUIE_CLI + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string capture(const std::string& args, bool with_stderr = true) {
    const std::string cmd = std::string(WAVEUIE_CLI) + " " + args + (with_stderr ? " 2>&1" : " 2>/dev/null");
    std::string out;
    FILE* p = popen(cmd.c_str(), "r");
    char buf[256];
    while (p && fgets(buf, sizeof buf, p)) out += buf;
    if (p) pclose(p);
    return out;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

void write_rgbd(const fs::path& dir, const std::string& stem, int size, std::uint64_t seed) {
    save_image(dir / (stem + ".png"), testing::smooth_scene(size, size, seed));
    Gray16 d{size, size, std::vector<std::uint16_t>(static_cast<std::size_t>(size) * size)};
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) d.samples[y * size + x] = static_cast<std::uint16_t>(800 + 200 * y + 50 * x);
    save_gray16(dir / (stem + "_depth.png"), d);
}

fs::path small_config(const ScratchDir& dir) {
    RunConfig c;
    c.model.structure.levels = 2;
    c.model.structure.base_channels = 8;
    c.model.critic.layers = 3;
    c.model.critic.base_channels = 8;
    c.train.phase1_epochs = 1;
    c.train.phase2_epochs = 1;
    c.train.critic_steps_per_gen = 1;
    c.train.crop_size = 16;
    c.synth.light_levels = {0.5, 1.0};
    c.synth.water_types.resize(2);
    const fs::path p = dir / "small.json";
    std::ofstream(p) << to_text(c);
    return p;
}

TEST(Cli, UsageErrors) {
    EXPECT_EQ(run(""), 1);
    EXPECT_EQ(run("frobnicate"), 1);
    EXPECT_EQ(run("synth --input x"), 1);
    EXPECT_EQ(run("--help"), 0);
    EXPECT_EQ(run("config init", "WAVEUIE_THREADS=zero"), 1);
}

TEST(Cli, ConfigInitEmitsDefaults) {
    ScratchDir dir("cli_cfg");
    EXPECT_EQ(run("config init --out " + q(dir / "run.json")), 0);
    EXPECT_EQ(slurp(dir / "run.json"), to_text(RunConfig{}));
    EXPECT_EQ(run("config init --out " + q(dir / "run.json")), 1);
    EXPECT_EQ(run("config init --force --out " + q(dir / "run.json")), 0);
}

TEST(Cli, SynthOutputsAndErrors) {
    ScratchDir dir("cli_synth");
    fs::create_directories(dir / "rgbd");
    write_rgbd(dir / "rgbd", "a", 16, 1);
    EXPECT_NE(run("synth -i " + q(dir / "missing") + " -o " + q(dir / "d")), 0);
    EXPECT_EQ(run("synth --seed 7 -i " + q(dir / "rgbd") + " -o " + q(dir / "d1")), 0);
    EXPECT_EQ(run("synth --seed 7 -i " + q(dir / "rgbd") + " -o " + q(dir / "d2"), "WAVEUIE_THREADS=2"), 0);
    int variants = 0;
    for (const auto& e : fs::directory_iterator(dir / "d1")) {
        if (e.path().extension() != ".png") continue;
        ++variants;
        EXPECT_EQ(slurp(e.path()), slurp(dir / "d2" / e.path().filename()));
    }
    EXPECT_EQ(variants, 36);
    EXPECT_EQ(slurp(dir / "d1" / "manifest.tsv"), slurp(dir / "d2" / "manifest.tsv"));
    EXPECT_EQ(run("synth --seed 7 -i " + q(dir / "rgbd") + " -o " + q(dir / "d1")), 1);
}

TEST(Cli, TrainEnhanceDecomposeEval) {
    ScratchDir dir("cli_pipe");
    fs::create_directories(dir / "rgbd");
    write_rgbd(dir / "rgbd", "a", 24, 1);
    write_rgbd(dir / "rgbd", "b", 24, 2);
    const fs::path cfg = small_config(dir);
    ASSERT_EQ(run("synth -c " + q(cfg) + " -i " + q(dir / "rgbd") + " -o " + q(dir / "data")), 0);

    std::ofstream(dir / "bad.json") << R"({"train": {"epochs": 3}})";
    const std::string bad = capture("train -d " + q(dir / "data") + " -o " + q(dir / "bad") + " -c " + q(dir / "bad.json"));
    EXPECT_NE(bad.find("train.epochs"), std::string::npos) << bad;
    EXPECT_EQ(run("train -d " + q(dir / "data") + " -o " + q(dir / "bad") + " -c " + q(dir / "bad.json")), 1);

    const std::string train = "train -d " + q(dir / "data") + " -o " + q(dir / "run") + " -c " + q(cfg);
    ASSERT_EQ(run(train), 0);
    EXPECT_TRUE(fs::exists(dir / "run" / "final.ckpt"));
    EXPECT_TRUE(fs::exists(dir / "run" / "epoch_0001.ckpt"));
    EXPECT_EQ(run(train), 1);
    EXPECT_EQ(run("train -d " + q(dir / "data") + " -o " + q(dir / "resumed") + " --resume " +
                  q(dir / "run" / "epoch_0001.ckpt")),
              0);
    EXPECT_FALSE(fs::exists(dir / "resumed" / "epoch_0001.ckpt"));
    EXPECT_TRUE(fs::exists(dir / "resumed" / "epoch_0002.ckpt"));
    EXPECT_EQ(slurp(dir / "resumed" / "final.ckpt"), slurp(dir / "run" / "final.ckpt"));

    fs::create_directories(dir / "in");
    save_image(dir / "in" / "x.png", testing::smooth_scene(20, 28, 5));
    save_image(dir / "in" / "y.png", testing::smooth_scene(17, 9, 6));
    save_image(dir / "in" / "z.png", testing::smooth_scene(16, 16, 7));
    const std::string model = " -m " + q(dir / "run" / "final.ckpt");
    ASSERT_EQ(run("enhance" + model + " -i " + q(dir / "in") + " -o " + q(dir / "out")), 0);
    for (const char* n : {"x.png", "y.png", "z.png"}) {
        const Image a = load_image(dir / "in" / n), b = load_image(dir / "out" / n);
        EXPECT_EQ(a.height, b.height);
        EXPECT_EQ(a.width, b.width);
    }
    EXPECT_EQ(run("enhance" + model + " -i " + q(dir / "in") + " -o " + q(dir / "out")), 1);
    ASSERT_EQ(run("enhance" + model + " -i " + q(dir / "in") + " -o " + q(dir / "out3"), "WAVEUIE_THREADS=3"), 0);
    EXPECT_EQ(slurp(dir / "out" / "x.png"), slurp(dir / "out3" / "x.png"));

    std::string bytes = slurp(dir / "run" / "final.ckpt");
    bytes[bytes.size() / 2] ^= 0x10;
    std::ofstream(dir / "bad.ckpt", std::ios::binary) << bytes;
    EXPECT_EQ(run("enhance -m " + q(dir / "bad.ckpt") + " -i " + q(dir / "in") + " -o " + q(dir / "o2")), 2);

    ASSERT_EQ(run("decompose -i " + q(dir / "in" / "y.png") + " -o " + q(dir / "dec")), 0);
    int files = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir / "dec")) ++files;
    EXPECT_EQ(files, 4);
    const Image ll = load_image(dir / "dec" / "ll.png");
    EXPECT_EQ(ll.height, 9);
    EXPECT_EQ(ll.width, 5);
    save_image(dir / "flat.png", Image(3, 8, 8, 0.4));
    ASSERT_EQ(run("decompose -i " + q(dir / "flat.png") + " -o " + q(dir / "flat")), 0);
    for (const char* band : {"lh.png", "hl.png", "hh.png"})
        for (double v : load_image(dir / "flat" / band).data) EXPECT_EQ(v, 0.0);

    EXPECT_EQ(run("eval --metric ciede2000 --pred " + q(dir / "out")), 1);
    EXPECT_EQ(run("eval --metric sharpness --pred " + q(dir / "out")), 1);
    fs::create_directories(dir / "ref");
    save_image(dir / "ref" / "x.png", testing::smooth_scene(20, 28, 5));
    save_image(dir / "ref" / "w.png", testing::smooth_scene(20, 28, 5));
    const std::string mismatch = capture("eval --metric ssim --pred " + q(dir / "out") + " --ref " + q(dir / "ref"));
    EXPECT_NE(mismatch.find("y.png"), std::string::npos);
    EXPECT_NE(mismatch.find("w.png"), std::string::npos);

    const std::string report = capture("eval --metric uiqm --metric uciqe --pred " + q(dir / "in") + model, false);
    EXPECT_EQ(report.rfind("image\tuiqm\tuciqe\tseconds\n", 0), 0u) << report;
    EXPECT_NE(report.find("\nmean\t"), std::string::npos);
    ASSERT_EQ(run("eval --metric uiqm --pred " + q(dir / "in") + " --out " + q(dir / "r.tsv")), 0);
    EXPECT_EQ(slurp(dir / "r.tsv").rfind("image\tuiqm\n", 0), 0u);
    EXPECT_EQ(run("eval --metric uiqm --pred " + q(dir / "in") + " --out " + q(dir / "r.tsv")), 1);

    std::ofstream(dir / "checker.tsv") << "top\tleft\theight\twidth\tL\ta\tb\n0\t0\t4\t4\t50\t0\t0\n";
    const std::string checker = capture("eval --checker " + q(dir / "checker.tsv") + " --pred " + q(dir / "in"), false);
    EXPECT_EQ(checker.rfind("image\tcolorchecker_de2000\n", 0), 0u) << checker;
}

}  // namespace
}  // namespace waveuie
