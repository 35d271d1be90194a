#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"
#include "waveuie/errors.hpp"
#include "waveuie/losses.hpp"
#include "waveuie/ops.hpp"
#include "waveuie/optim.hpp"

namespace waveuie {
namespace {

using testing::gradcheck;
using testing::random_tensor;

// Direct-summation multi-scale SSIM over one plane; the pyramid uses 2x2
// block means with the trailing odd row/column dropped.
double reference_ms_ssim_plane(std::vector<double> x, std::vector<double> y, int H, int W, int scales,
                               double data_range) {
    const double weights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
    double wsum = 0.0;
    for (int s = 0; s < scales; ++s) wsum += weights[s];
    const int K = 11;
    double g[K], gsum = 0.0;
    for (int i = 0; i < K; ++i) gsum += g[i] = std::exp(-(i - 5.0) * (i - 5.0) / (2 * 1.5 * 1.5));
    const double c1 = std::pow(0.01 * data_range, 2), c2 = std::pow(0.03 * data_range, 2);
    double result = 1.0;
    for (int s = 0; s < scales; ++s) {
        double cs_sum = 0.0, ssim_sum = 0.0;
        const int Ho = H - K + 1, Wo = W - K + 1;
        for (int oy = 0; oy < Ho; ++oy) {
            for (int ox = 0; ox < Wo; ++ox) {
                double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
                for (int i = 0; i < K; ++i) {
                    for (int j = 0; j < K; ++j) {
                        const double wt = g[i] * g[j] / (gsum * gsum);
                        const double a = x[(oy + i) * W + ox + j], b = y[(oy + i) * W + ox + j];
                        mx += wt * a;
                        my += wt * b;
                        sxx += wt * a * a;
                        syy += wt * b * b;
                        sxy += wt * a * b;
                    }
                }
                sxx -= mx * mx;
                syy -= my * my;
                sxy -= mx * my;
                const double l = (2 * mx * my + c1) / (mx * mx + my * my + c1);
                const double cs = (2 * sxy + c2) / (sxx + syy + c2);
                cs_sum += cs;
                ssim_sum += l * cs;
            }
        }
        const double value = (s == scales - 1 ? ssim_sum : cs_sum) / (Ho * Wo);
        result *= std::pow(std::max(value, 1e-6), weights[s] / wsum);
        const int h2 = H / 2, w2 = W / 2;
        std::vector<double> xs(h2 * w2), ys(h2 * w2);
        for (int r = 0; r < h2; ++r)
            for (int c = 0; c < w2; ++c) {
                const int i0 = 2 * r * W + 2 * c;
                xs[r * w2 + c] = 0.25 * (x[i0] + x[i0 + 1] + x[i0 + W] + x[i0 + W + 1]);
                ys[r * w2 + c] = 0.25 * (y[i0] + y[i0 + 1] + y[i0 + W] + y[i0 + W + 1]);
            }
        x = std::move(xs);
        y = std::move(ys);
        H = h2;
        W = w2;
    }
    return result;
}

Tensor smooth_batch(int n, int h, int w, std::uint64_t seed) {
    std::vector<Image> ims;
    for (int i = 0; i < n; ++i) ims.push_back(testing::smooth_scene(h, w, seed + i));
    return to_batch(ims);
}

TEST(L1Loss, Examples) {
    const Tensor t = random_tensor({1, 3, 4, 4}, 1, 0, 1, false);
    EXPECT_EQ(l1_loss(t, t).item(), 0.0);
    EXPECT_NEAR(l1_loss(t + 0.5, t).item(), 0.5, 1e-12);
}

TEST(L1Loss, Gradcheck) {
    auto p = random_tensor({1, 2, 5, 5}, 2);
    // Offset keeps every difference away from the kink at 0.
    const Tensor t = p.detach() + random_tensor({1, 2, 5, 5}, 3, 0.1, 0.5, false);
    EXPECT_LT(gradcheck([&] { return l1_loss(p, t); }, {p}).max_rel_error, 1e-3);
}

TEST(L1Loss, ShapeMismatch) {
    EXPECT_THROW(l1_loss(Tensor::zeros({1, 3, 4, 4}), Tensor::zeros({1, 3, 4, 5})), DimensionError);
}

TEST(DetailLoss, Examples) {
    const Tensor t = random_tensor({1, 3, 4, 4}, 4, -1, 1, false);
    EXPECT_EQ(detail_loss(t, t).item(), 0.0);
    EXPECT_NEAR(detail_loss(t - 0.3, t).item(), 0.3, 1e-12);
}

TEST(DetailLoss, Gradcheck) {
    auto p = random_tensor({1, 3, 4, 4}, 5);
    const Tensor t = random_tensor({1, 3, 4, 4}, 6, -1, 1, false);
    EXPECT_LT(gradcheck([&] { return detail_loss(p, t); }, {p}).max_rel_error, 1e-3);
}

TEST(MsSsim, IdenticalIsOne) {
    const Tensor x = smooth_batch(2, 64, 64, 10);
    EXPECT_NEAR(ms_ssim(x, x).item(), 1.0, 1e-12);
}

TEST(MsSsim, ComplementIsBelowOne) {
    const Tensor x = random_tensor({1, 3, 64, 64}, 7, 0, 1, false);
    EXPECT_LT(ms_ssim(x, 1.0 - x).item(), 1.0);
}

TEST(MsSsim, MatchesDirectSummation) {
    const Tensor x = smooth_batch(1, 64, 64, 20);
    const Tensor y = clamp(x + random_tensor({1, 3, 64, 64}, 21, -0.15, 0.15, false), 0.0, 1.0);
    MsSsimInfo info;
    const double got = ms_ssim(x, y, {}, &info).item();
    ASSERT_EQ(info.scales, 3);
    double expected = 0.0;
    for (int c = 0; c < 3; ++c) {
        std::vector<double> a(x.data().begin() + c * 4096, x.data().begin() + (c + 1) * 4096);
        std::vector<double> b(y.data().begin() + c * 4096, y.data().begin() + (c + 1) * 4096);
        expected += reference_ms_ssim_plane(a, b, 64, 64, 3, 1.0) / 3.0;
    }
    EXPECT_NEAR(got, expected, 1e-4);
}

TEST(MsSsim, Symmetric) {
    const Tensor x = smooth_batch(1, 48, 48, 30);
    const Tensor y = smooth_batch(1, 48, 48, 31);
    EXPECT_NEAR(ms_ssim(x, y).item(), ms_ssim(y, x).item(), 1e-6);
}

TEST(MsSsim, SmallInputsReduceScales) {
    EXPECT_EQ(feasible_scales(176, 176, 5, 11), 5);
    EXPECT_EQ(feasible_scales(175, 200, 5, 11), 4);
    EXPECT_EQ(feasible_scales(32, 32, 5, 11), 2);
    EXPECT_EQ(feasible_scales(12, 12, 5, 11), 1);
    MsSsimInfo info;
    const Tensor x = random_tensor({1, 1, 7, 9}, 8, 0, 1, false);
    const double v = ms_ssim(x, x, {}, &info).item();
    EXPECT_EQ(info.scales, 1);
    EXPECT_EQ(info.window, 7);
    EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(MsSsim, Gradcheck) {
    auto x = random_tensor({1, 2, 24, 24}, 40, 0, 1);
    const Tensor y = random_tensor({1, 2, 24, 24}, 41, 0, 1, false);
    EXPECT_LT(gradcheck([&] { return ms_ssim(x, y); }, {x}, 1e-3, 200).max_rel_error, 1e-3);
}

TEST(MsSsimLoss, BoundedAndZeroOnIdentity) {
    const Tensor x = smooth_batch(1, 32, 32, 50);
    EXPECT_NEAR(ms_ssim_loss(x, x).item(), 0.0, 1e-12);
    for (std::uint64_t s = 0; s < 5; ++s) {
        const double v = ms_ssim_loss(random_tensor({1, 3, 32, 32}, 60 + s, 0, 1, false), x).item();
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 2.0);
    }
}

TEST(MsSsimLoss, DecreasesAlongInterpolation) {
    const Tensor target = smooth_batch(1, 48, 48, 70);
    const Tensor start = random_tensor({1, 3, 48, 48}, 71, 0, 1, false);
    double prev = 3.0;
    for (int k = 0; k <= 10; ++k) {
        const double t = k / 10.0;
        const double v = ms_ssim_loss((1.0 - t) * start + t * target, target).item();
        EXPECT_LT(v, prev) << "t=" << t;
        prev = v;
    }
}

TEST(StructureLoss, EndpointsAndMidpoint) {
    const Tensor p = mul_scalar(smooth_batch(1, 32, 32, 80), 2.0);
    const Tensor t = mul_scalar(smooth_batch(1, 32, 32, 81), 2.0);
    MsSsimOptions band;
    band.data_range = 2.0;
    const double l1 = l1_loss(p, t).item();
    const double ms = ms_ssim_loss(p, t, band).item();
    EXPECT_NEAR(structure_loss(p, t, 0.0).item(), l1, 1e-7);
    EXPECT_NEAR(structure_loss(p, t, 1.0).item(), ms, 1e-7);
    EXPECT_NEAR(structure_loss(p, t, 0.5).item(), 0.5 * l1 + 0.5 * ms, 1e-12);
}

TEST(StructureLoss, AffineInAlpha) {
    const Tensor p = mul_scalar(smooth_batch(1, 32, 32, 90), 2.0);
    const Tensor t = mul_scalar(smooth_batch(1, 32, 32, 91), 2.0);
    const double a = structure_loss(p, t, 0.2).item();
    const double b = structure_loss(p, t, 0.6).item();
    const double c = structure_loss(p, t, 0.4).item();
    EXPECT_NEAR(c, 0.5 * (a + b), 1e-12);
}

TEST(StructureLoss, Gradcheck) {
    auto p = random_tensor({1, 3, 24, 24}, 100, 0.1, 1.9);
    const Tensor t = random_tensor({1, 3, 24, 24}, 101, 0, 2, false);
    EXPECT_LT(gradcheck([&] { return structure_loss(p, t, 0.5); }, {p}, 1e-3, 200).max_rel_error, 1e-3);
}

TEST(StructureLoss, AlphaOutOfRange) {
    const Tensor t = Tensor::zeros({1, 3, 16, 16});
    EXPECT_THROW(structure_loss(t, t, 1.5), DomainError);
}

TEST(WganLosses, Examples) {
    const Tensor s = Tensor::from_data({3}, {0.2, -0.4, 1.1});
    const WganLosses equal = wgan_losses(s, s);
    EXPECT_EQ(equal.critic.item(), 0.0);
    const Tensor fake = Tensor::from_data({2}, {0.5, -1.5});
    EXPECT_NEAR(wgan_losses(s, fake).generator.item(), 0.5, 1e-15);
    EXPECT_NEAR(wgan_losses(s, fake).critic.item(), -0.5 - 0.3, 1e-15);
}

TEST(WganLosses, CriticStepOnSeparableToyDataDecreasesLoss) {
    // Linear critic f(x) = w*x + b on real samples near +1 and fake near -1.
    Parameter w("w", {1}), b("b", {1});
    w.assign(std::vector<double>{0.1});
    const Tensor real = Tensor::from_data({4}, {0.9, 1.0, 1.1, 1.2});
    const Tensor fake = Tensor::from_data({4}, {-1.2, -1.0, -0.9, -0.8});
    auto loss = [&] { return wgan_losses(real * w.value + b.value, fake * w.value + b.value).critic; };
    const double before = loss().item();
    loss().backward();
    Parameter* params[] = {&w, &b};
    rmsprop_step(params, {.lr = 0.01});
    EXPECT_LT(loss().item(), before);
}

TEST(TotalLoss, WeightedSum) {
    const LossWeights w{0.5, 1.0, 1.0, 0.5};
    const Tensor ls = Tensor::scalar(0.2), ld = Tensor::scalar(0.1), la = Tensor::scalar(-0.3);
    EXPECT_NEAR(total_loss(ls, ld, la, w).item(), -0.1, 1e-15);
    EXPECT_NEAR(total_loss(ls, ld, Tensor(), w).item(), 0.2, 1e-15);
    EXPECT_EQ(total_loss(ls, ld, la, {0, 0, 0, 0.5}).item(), 0.0);
}

TEST(TotalLoss, GradientSplitsIntoBranches) {
    auto ls = Tensor::scalar(0.2, true), ld = Tensor::scalar(0.1, true), la = Tensor::scalar(-0.3, true);
    total_loss(ls, ld, la, {0.5, 2.0, 3.0, 0.5}).backward();
    EXPECT_EQ(ls.grad()[0], 0.5);
    EXPECT_EQ(ld.grad()[0], 2.0);
    EXPECT_EQ(la.grad()[0], 3.0);
}

TEST(Losses, NonNegative) {
    for (std::uint64_t s = 0; s < 10; ++s) {
        const Tensor p = random_tensor({1, 3, 24, 24}, 200 + s, 0, 2, false);
        const Tensor t = random_tensor({1, 3, 24, 24}, 300 + s, 0, 2, false);
        EXPECT_GE(l1_loss(p, t).item(), 0.0);
        EXPECT_GE(detail_loss(p, t).item(), 0.0);
        EXPECT_GE(ms_ssim_loss(p, t).item(), 0.0);
        EXPECT_GE(structure_loss(p, t, 0.5).item(), 0.0);
    }
}

}  // namespace
}  // namespace waveuie
