#include <gtest/gtest.h>

#include <fstream>

#include "test_support.hpp"
#include "waveuie/errors.hpp"
#include "waveuie/io.hpp"

namespace waveuie {
namespace {

using testing::ScratchDir;

Image quantized_image(int c, int h, int w, std::uint64_t seed) {
    Image im = testing::random_image(c, h, w, seed);
    for (double& v : im.data) v = std::round(v * 255.0) / 255.0;
    return im;
}

TEST(PngIo, EightBitRoundTripIsLossless) {
    ScratchDir dir("io");
    const Image im = quantized_image(3, 7, 11, 1);
    save_image(dir / "a.png", im);
    const Image back = load_image(dir / "a.png");
    ASSERT_EQ(back.height, 7);
    ASSERT_EQ(back.width, 11);
    EXPECT_EQ(back, im);
    save_image(dir / "b.png", back);
    EXPECT_EQ(load_image(dir / "b.png"), im);
}

TEST(PngIo, GrayIsReplicatedToRgb) {
    ScratchDir dir("io");
    const Image gray = quantized_image(1, 4, 5, 2);
    save_image(dir / "g.png", gray);
    const Image rgb = load_image(dir / "g.png");
    ASSERT_EQ(rgb.channels, 3);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 5; ++x) EXPECT_EQ(rgb.at(c, y, x), gray.at(0, y, x));
}

TEST(PngIo, SixteenBitDepthKeepsFullRange) {
    ScratchDir dir("io");
    Gray16 g{2, 3, {0, 1, 255, 256, 65534, 65535}};
    save_gray16(dir / "d.png", g);
    const Gray16 back = load_gray16(dir / "d.png");
    EXPECT_EQ(back.samples, g.samples);
    const DepthMap d = load_depth(dir / "d.png", 0.001);
    EXPECT_DOUBLE_EQ(d.at(1, 2), 65.535);
    EXPECT_DOUBLE_EQ(d.at(0, 0), 0.0);
}

TEST(PngIo, SixteenBitColorLoadsScaled) {
    ScratchDir dir("io");
    save_gray16(dir / "d.png", Gray16{1, 2, {0, 65535}});
    const Image im = load_image(dir / "d.png");
    EXPECT_EQ(im.at(0, 0, 0), 0.0);
    EXPECT_EQ(im.at(2, 0, 1), 1.0);
}

TEST(PngIo, QuantizationClampsAndRounds) {
    EXPECT_EQ(quantize8(1.2), 255);
    EXPECT_EQ(quantize8(-0.3), 0);
    EXPECT_EQ(quantize8(0.5), 128);
    EXPECT_EQ(quantize8(std::nan("")), 0);
    ScratchDir dir("io");
    Image im(3, 1, 1, 1.2);
    save_image(dir / "c.png", im);
    EXPECT_EQ(load_image(dir / "c.png").data, std::vector<double>(3, 1.0));
}

TEST(PngIo, BadFilesRaiseIoErrorNamingPath) {
    ScratchDir dir("io");
    {
        std::ofstream f(dir / "text.png");
        f << "not an image at all";
    }
    try {
        load_image(dir / "text.png");
        FAIL() << "expected IoError";
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("text.png"), std::string::npos);
    }
    save_image(dir / "ok.png", quantized_image(3, 16, 16, 3));
    std::string bytes;
    {
        std::ifstream in(dir / "ok.png", std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    {
        std::ofstream out(dir / "cut.png", std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    EXPECT_THROW(load_image(dir / "cut.png"), IoError);
    EXPECT_THROW(load_image(dir / "missing.png"), IoError);
}

TEST(PngIo, UnwritablePathRaises) {
    EXPECT_THROW(save_image("/nonexistent_dir/x.png", Image(3, 2, 2)), IoError);
    EXPECT_THROW(save_image("/tmp/x.png", Image(2, 2, 2)), DimensionError);
}

}  // namespace
}  // namespace waveuie
