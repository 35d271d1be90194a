#include "waveuie/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "waveuie/errors.hpp"
#include "waveuie/ops.hpp"

namespace waveuie {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shapes " + shape_to_string(a.shape()) + " and " +
                             shape_to_string(b.shape()) + " differ");
    }
}

Tensor gaussian_window(int size, double sigma) {
    std::vector<double> g(static_cast<std::size_t>(size));
    const double c = (size - 1) / 2.0;
    double total = 0.0;
    for (int i = 0; i < size; ++i) {
        g[i] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
        total += g[i];
    }
    std::vector<double> k(static_cast<std::size_t>(size * size));
    for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) k[i * size + j] = g[i] * g[j] / (total * total);
    return Tensor::from_data({1, 1, size, size}, std::move(k));
}

struct SsimTerms {
    Tensor luminance;  // [P] mean of the luminance map
    Tensor cs;         // [P] mean of the contrast-structure map
    Tensor ssim;       // [P] mean of their product
};

// x, y are [P, 1, H, W].
SsimTerms ssim_terms(const Tensor& x, const Tensor& y, const Tensor& window, double c1, double c2) {
    const std::int64_t P = x.dim(0);
    const Tensor stacked = concat_batch({x, y, x * x, y * y, x * y});
    const Tensor filtered = conv2d(stacked, window, Tensor(), 1, 0);
    const Tensor mu_x = slice_batch(filtered, 0, P);
    const Tensor mu_y = slice_batch(filtered, P, 2 * P);
    const Tensor sigma_xx = slice_batch(filtered, 2 * P, 3 * P) - mu_x * mu_x;
    const Tensor sigma_yy = slice_batch(filtered, 3 * P, 4 * P) - mu_y * mu_y;
    const Tensor sigma_xy = slice_batch(filtered, 4 * P, 5 * P) - mu_x * mu_y;
    const Tensor lum = (2.0 * mu_x * mu_y + c1) / (mu_x * mu_x + mu_y * mu_y + c1);
    const Tensor cs = (2.0 * sigma_xy + c2) / (sigma_xx + sigma_yy + c2);
    return {mean_per_sample(lum), mean_per_sample(cs), mean_per_sample(lum * cs)};
}

Tensor average_pool2(const Tensor& x) {
    static const Tensor kernel = Tensor::full({1, 1, 2, 2}, 0.25);
    return conv2d(x, kernel, Tensor(), 2, 0);
}

constexpr double kProductFloor = 1e-6;

}  // namespace

Tensor l1_loss(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "l1_loss");
    return reduce_mean(abs(pred - target));
}

Tensor detail_loss(const Tensor& pred_band, const Tensor& target_band) {
    require_same_shape(pred_band, target_band, "detail_loss");
    return sqrt(reduce_mean(square(pred_band - target_band)));
}

int feasible_scales(std::int64_t height, std::int64_t width, int requested, int window) {
    const std::int64_t side = std::min(height, width);
    int scales = 1;
    while (scales < requested && side >= (std::int64_t{1} << scales) * window) ++scales;
    return scales;
}

Tensor ms_ssim(const Tensor& x, const Tensor& y, const MsSsimOptions& options, MsSsimInfo* info) {
    require_same_shape(x, y, "ms_ssim");
    if (x.ndim() != 4) throw DimensionError("ms_ssim: expected NCHW, got " + shape_to_string(x.shape()));
    if (options.scales < 1 || options.scales > static_cast<int>(options.weights.size())) {
        throw UsageError("ms_ssim: scales must be in [1, " + std::to_string(options.weights.size()) + "]");
    }
    const std::int64_t P = x.dim(0) * x.dim(1), H = x.dim(2), W = x.dim(3);
    if (H == 0 || W == 0) throw DomainError("ms_ssim: empty image");

    int window = options.window;
    const std::int64_t side = std::min(H, W);
    if (side < window) window = static_cast<int>(side % 2 == 1 ? side : side - 1);
    const int scales = feasible_scales(H, W, options.scales, window);
    if (info) *info = {scales, window};

    double weight_sum = 0.0;
    for (int s = 0; s < scales; ++s) weight_sum += options.weights[s];

    const Tensor kernel = gaussian_window(window, options.sigma);
    const double c1 = std::pow(0.01 * options.data_range, 2);
    const double c2 = std::pow(0.03 * options.data_range, 2);

    Tensor a = reshape(x, {P, 1, H, W});
    Tensor b = reshape(y, {P, 1, H, W});
    Tensor product;
    for (int s = 0; s < scales; ++s) {
        const SsimTerms t = ssim_terms(a, b, kernel, c1, c2);
        const bool last = s == scales - 1;
        const Tensor factor = pow_scalar(clamp_min(last ? t.ssim : t.cs, kProductFloor), options.weights[s] / weight_sum);
        product = product.defined() ? product * factor : factor;
        if (!last) {
            a = average_pool2(a);
            b = average_pool2(b);
        }
    }
    return reduce_mean(product);
}

Tensor ms_ssim_loss(const Tensor& pred, const Tensor& target, const MsSsimOptions& options) {
    return 1.0 - ms_ssim(pred, target, options);
}

Tensor structure_loss(const Tensor& pred_ll, const Tensor& target_ll, double alpha, double data_range) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("structure_loss: alpha must lie in [0, 1]");
    MsSsimOptions options;
    options.data_range = data_range;
    const Tensor l1 = l1_loss(pred_ll, target_ll);
    if (alpha == 0.0) return l1;
    const Tensor ms = ms_ssim_loss(pred_ll, target_ll, options);
    if (alpha == 1.0) return ms;
    return alpha * ms + (1.0 - alpha) * l1;
}

WganLosses wgan_losses(const Tensor& critic_real, const Tensor& critic_fake) {
    const Tensor fake = reduce_mean(critic_fake);
    return {fake - reduce_mean(critic_real), neg(fake)};
}

Tensor total_loss(const Tensor& l_s, const Tensor& l_d, const Tensor& l_adv, const LossWeights& weights) {
    Tensor total = weights.lambda1 * l_s + weights.lambda2 * l_d;
    if (l_adv.defined()) total = total + weights.lambda3 * l_adv;
    return total;
}

}  // namespace waveuie
