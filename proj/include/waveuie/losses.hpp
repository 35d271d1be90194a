#pragma once

#include <array>
#include <utility>

#include "waveuie/tensor.hpp"

namespace waveuie {

struct LossWeights {
    double lambda1 = 0.5;
    double lambda2 = 1.0;
    double lambda3 = 1.0;
    double alpha = 0.5;
};

/// Mean absolute difference.
Tensor l1_loss(const Tensor& pred, const Tensor& target);

/// Root of the mean squared difference of one band.
Tensor detail_loss(const Tensor& pred_band, const Tensor& target_band);

struct MsSsimOptions {
    int scales = 5;
    double data_range = 1.0;
    std::array<double, 5> weights{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
    int window = 11;
    double sigma = 1.5;
};

/// What ms_ssim actually ran with after fitting the pyramid to the input.
struct MsSsimInfo {
    int scales = 0;
    int window = 0;
};

/// Largest pyramid depth (<= requested) whose coarsest level still holds a
/// full window: min(H, W) >= 2^(scales-1) * window. At least 1.
int feasible_scales(std::int64_t height, std::int64_t width, int requested, int window);

/// Multi-scale SSIM of NCHW tensors, averaged over samples and channels.
/// Too-small inputs run with fewer scales (weights renormalized); inputs
/// smaller than the window use the largest odd window that fits.
Tensor ms_ssim(const Tensor& x, const Tensor& y, const MsSsimOptions& options = {}, MsSsimInfo* info = nullptr);

Tensor ms_ssim_loss(const Tensor& pred, const Tensor& target, const MsSsimOptions& options = {});

/// alpha * (1 - MS-SSIM) + (1 - alpha) * L1. The default data range 2
/// matches the LL band.
Tensor structure_loss(const Tensor& pred_ll, const Tensor& target_ll, double alpha, double data_range = 2.0);

struct WganLosses {
    Tensor critic;
    Tensor generator;
};

/// critic = mean(fake) - mean(real); generator = -mean(fake).
WganLosses wgan_losses(const Tensor& critic_real, const Tensor& critic_fake);

/// lambda1*l_s + lambda2*l_d (+ lambda3*l_adv when l_adv is defined).
Tensor total_loss(const Tensor& l_s, const Tensor& l_d, const Tensor& l_adv, const LossWeights& weights);

}  // namespace waveuie
