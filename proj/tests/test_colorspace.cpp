#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"
#include "waveuie/colorspace.hpp"

namespace waveuie::color {
namespace {

TEST(Hsv, AchromaticWhite) {
    const Hsv c = rgb_to_hsv(Rgb{1, 1, 1});
    EXPECT_EQ(c.h, 0.0);
    EXPECT_EQ(c.s, 0.0);
    EXPECT_EQ(c.v, 1.0);
    const Rgb back = hsv_to_rgb(c);
    EXPECT_EQ(back.r, 1.0);
    EXPECT_EQ(back.g, 1.0);
    EXPECT_EQ(back.b, 1.0);
}

TEST(Hsv, PureRed) {
    const Hsv c = rgb_to_hsv(Rgb{1, 0, 0});
    EXPECT_EQ(c.h, 0.0);
    EXPECT_EQ(c.s, 1.0);
    EXPECT_EQ(c.v, 1.0);
    const Rgb back = hsv_to_rgb(c);
    EXPECT_EQ(back.r, 1.0);
    EXPECT_EQ(back.g, 0.0);
    EXPECT_EQ(back.b, 0.0);
}

TEST(Hsv, HueInUnitInterval) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 1000; ++i) {
        const Hsv c = rgb_to_hsv(Rgb{u(rng), u(rng), u(rng)});
        ASSERT_GE(c.h, 0.0);
        ASSERT_LT(c.h, 1.0);
    }
}

TEST(Hsv, OutOfRangeInputIsClampedAndCounted) {
    ConversionStats stats;
    const Hsv c = rgb_to_hsv(Rgb{1.5, -0.2, 0.5}, &stats);
    EXPECT_EQ(stats.clamped_inputs, 1u);
    EXPECT_EQ(c.v, 1.0);
}

TEST(Lab, WhiteAndBlack) {
    const Lab w = rgb_to_lab(Rgb{1, 1, 1});
    EXPECT_NEAR(w.L, 100.0, 1e-9);
    EXPECT_NEAR(w.a, 0.0, 1e-9);
    EXPECT_NEAR(w.b, 0.0, 1e-9);
    const Lab k = rgb_to_lab(Rgb{0, 0, 0});
    EXPECT_NEAR(k.L, 0.0, 1e-12);
    EXPECT_NEAR(k.a, 0.0, 1e-12);
    EXPECT_NEAR(k.b, 0.0, 1e-12);
    const Rgb back = lab_to_rgb(w);
    EXPECT_NEAR(back.r, 1.0, 1e-9);
    EXPECT_NEAR(back.g, 1.0, 1e-9);
    EXPECT_NEAR(back.b, 1.0, 1e-9);
}

TEST(Lab, ReferenceValue) {
    // 40-digit evaluation of sRGB decoding, the D65 matrix and the CIE
    // companding with white = M * (1, 1, 1).
    const Lab c = rgb_to_lab(Rgb{0.5, 0.2, 0.8});
    EXPECT_NEAR(c.L, 40.044294139311157, 1e-9);
    EXPECT_NEAR(c.a, 60.255774942233376, 1e-9);
    EXPECT_NEAR(c.b, -65.675076350140649, 1e-9);
}

TEST(Lab, GamutExceedingIsClampedAndFlagged) {
    ConversionStats stats;
    const Rgb c = lab_to_rgb(Lab{50, 100, -100}, &stats);
    EXPECT_EQ(stats.out_of_gamut, 1u);
    for (double v : {c.r, c.g, c.b}) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(RoundTrip, RandomPixels) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0, 1);
    double worst_hsv = 0.0, worst_lab = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Rgb px{u(rng), u(rng), u(rng)};
        const Rgb h = hsv_to_rgb(rgb_to_hsv(px));
        const Rgb l = lab_to_rgb(rgb_to_lab(px));
        worst_hsv = std::max({worst_hsv, std::abs(h.r - px.r), std::abs(h.g - px.g), std::abs(h.b - px.b)});
        worst_lab = std::max({worst_lab, std::abs(l.r - px.r), std::abs(l.g - px.g), std::abs(l.b - px.b)});
    }
    EXPECT_LT(worst_hsv, 1e-5);
    EXPECT_LT(worst_lab, 1e-5);
}

TEST(Achromatic, ZeroSaturationAndChroma) {
    for (double g = 0.0; g <= 1.0; g += 0.05) {
        EXPECT_EQ(rgb_to_hsv(Rgb{g, g, g}).s, 0.0);
        const Lab lab = rgb_to_lab(Rgb{g, g, g});
        EXPECT_NEAR(lab.a, 0.0, 1e-6);
        EXPECT_NEAR(lab.b, 0.0, 1e-6);
    }
}

TEST(Achromatic, ValueAndLightnessStrictlyIncreasing) {
    double prev_v = -1.0, prev_L = -1.0;
    for (int i = 0; i <= 255; ++i) {
        const double g = i / 255.0;
        const double v = rgb_to_hsv(Rgb{g, g, g}).v;
        const double L = rgb_to_lab(Rgb{g, g, g}).L;
        ASSERT_GT(v, prev_v);
        ASSERT_GT(L, prev_L);
        prev_v = v;
        prev_L = L;
    }
}

TEST(MultiColorStack, WhiteAndBlack) {
    const double mid = 128.0 / 255.0;
    const Image white = multi_color_stack(Image(3, 1, 1, 1.0));
    const double expect_white[9] = {1, 1, 1, 0, 0, 1, 1, mid, mid};
    for (int c = 0; c < 9; ++c) EXPECT_NEAR(white.data[c], expect_white[c], 1e-9) << "channel " << c;
    const Image black = multi_color_stack(Image(3, 1, 1, 0.0));
    const double expect_black[9] = {0, 0, 0, 0, 0, 0, 0, mid, mid};
    for (int c = 0; c < 9; ++c) EXPECT_NEAR(black.data[c], expect_black[c], 1e-9) << "channel " << c;
}

TEST(MultiColorStack, ShapeAndRgbPassthrough) {
    const Image rgb = testing::random_image(3, 5, 7, 21);
    const Image stack = multi_color_stack(rgb);
    EXPECT_EQ(stack.channels, 9);
    EXPECT_EQ(stack.height, 5);
    EXPECT_EQ(stack.width, 7);
    for (std::size_t i = 0; i < rgb.data.size(); ++i) EXPECT_EQ(stack.data[i], rgb.data[i]);
    for (std::size_t i = 0; i < stack.data.size(); ++i) {
        EXPECT_GE(stack.data[i], 0.0);
        EXPECT_LE(stack.data[i], 1.0);
    }
}

TEST(MultiColorStack, TensorBatchMatchesImagePath) {
    const Image a = testing::random_image(3, 4, 4, 1), b = testing::random_image(3, 4, 4, 2);
    const Image ims[] = {a, b};
    const Tensor stack = multi_color_stack(to_batch(ims));
    EXPECT_EQ(stack.shape(), (Shape{2, 9, 4, 4}));
    EXPECT_EQ(to_image(stack, 1), multi_color_stack(b));
}

}  // namespace
}  // namespace waveuie::color
