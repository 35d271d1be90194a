#include "waveuie/wavelet.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "waveuie/errors.hpp"
#include "waveuie/ops.hpp"

namespace waveuie {

std::array<double, 4> haar_kernel(Band band) {
    switch (band) {
        case Band::LL: return {0.5, 0.5, 0.5, 0.5};
        case Band::LH: return {0.5, -0.5, 0.5, -0.5};
        case Band::HL: return {0.5, 0.5, -0.5, -0.5};
        case Band::HH: return {0.5, -0.5, -0.5, 0.5};
    }
    return {};
}

const Image& SubBands::band(Band b) const {
    switch (b) {
        case Band::LL: return ll;
        case Band::LH: return lh;
        case Band::HL: return hl;
        case Band::HH: return hh;
    }
    return ll;
}

namespace {

Tensor kernel_tensor(Band band) {
    const auto k = haar_kernel(band);
    return Tensor::from_data({1, 1, 2, 2}, {k.begin(), k.end()});
}

Tensor analyze(const Tensor& planes, Band band, std::int64_t N, std::int64_t C) {
    Tensor out = conv2d(planes, kernel_tensor(band), Tensor{}, 2, 0);
    return reshape(out, {N, C, out.dim(2), out.dim(3)});
}

}  // namespace

TensorBands dwt2(const Tensor& batch) {
    if (batch.ndim() != 4) throw DimensionError("dwt2 expects NCHW, got " + shape_to_string(batch.shape()));
    const auto N = batch.dim(0), C = batch.dim(1), H = batch.dim(2), W = batch.dim(3);
    if (N == 0 || C == 0 || H == 0 || W == 0) throw DomainError("dwt2 of an empty image");
    const FastInferenceGuard exact(false);
    Tensor x = batch;
    if (H % 2 != 0 || W % 2 != 0) x = pad_reflect(x, H % 2, W % 2);
    Tensor planes = reshape(x, {N * C, 1, x.dim(2), x.dim(3)});
    TensorBands bands;
    bands.ll = analyze(planes, Band::LL, N, C);
    bands.lh = analyze(planes, Band::LH, N, C);
    bands.hl = analyze(planes, Band::HL, N, C);
    bands.hh = analyze(planes, Band::HH, N, C);
    bands.parent_height = H;
    bands.parent_width = W;
    return bands;
}

Tensor idwt2(const TensorBands& bands) {
    const Shape& s = bands.ll.shape();
    if (s.size() != 4) throw DimensionError("idwt2: LL band must be NCHW, got " + shape_to_string(s));
    for (const Tensor* t : {&bands.lh, &bands.hl, &bands.hh}) {
        if (t->shape() != s) {
            throw DimensionError("idwt2: band shapes disagree: " + shape_to_string(s) + " vs " +
                                 shape_to_string(t->shape()));
        }
    }
    const auto N = s[0], C = s[1], h = s[2], w = s[3];
    const auto H = bands.parent_height > 0 ? bands.parent_height : 2 * h;
    const auto W = bands.parent_width > 0 ? bands.parent_width : 2 * w;
    if ((H + 1) / 2 != h || (W + 1) / 2 != w) {
        throw DimensionError("idwt2: parent shape " + std::to_string(H) + "x" + std::to_string(W) +
                             " inconsistent with band shape " + shape_to_string(s));
    }
    Tensor sum;
    const std::array<std::pair<const Tensor*, Band>, 4> parts{
        {{&bands.ll, Band::LL}, {&bands.lh, Band::LH}, {&bands.hl, Band::HL}, {&bands.hh, Band::HH}}};
    for (const auto& [band, kind] : parts) {
        Tensor planes = reshape(*band, {N * C, 1, h, w});
        Tensor up = conv_transpose2d(planes, kernel_tensor(kind), Tensor{}, 2, 0);
        sum = sum.defined() ? add(sum, up) : up;
    }
    Tensor full = reshape(sum, {N, C, 2 * h, 2 * w});
    if (H != 2 * h || W != 2 * w) full = crop(full, H, W);
    return full;
}

SubBands dwt2(const Image& image) {
    if (image.empty()) throw DomainError("dwt2 of an empty image");
    NoGradGuard guard;
    TensorBands t = dwt2(to_tensor(image));
    SubBands out;
    out.ll = to_image(t.ll);
    out.lh = to_image(t.lh);
    out.hl = to_image(t.hl);
    out.hh = to_image(t.hh);
    out.parent_height = image.height;
    out.parent_width = image.width;
    return out;
}

Image idwt2(const SubBands& bands) {
    NoGradGuard guard;
    TensorBands t;
    t.ll = to_tensor(bands.ll);
    t.lh = to_tensor(bands.lh);
    t.hl = to_tensor(bands.hl);
    t.hh = to_tensor(bands.hh);
    t.parent_height = bands.parent_height;
    t.parent_width = bands.parent_width;
    return to_image(idwt2(t));
}

Image visualize_band(const Image& band) {
    Image out(3, band.height, band.width, 0.0);
    std::vector<double> magnitude(band.plane_size(), 0.0);
    for (int c = 0; c < band.channels; ++c) {
        auto p = band.plane(c);
        for (std::size_t i = 0; i < p.size(); ++i) magnitude[i] = std::max(magnitude[i], std::abs(p[i]));
    }
    const double peak = magnitude.empty() ? 0.0 : *std::max_element(magnitude.begin(), magnitude.end());
    if (peak <= 0.0) return out;
    auto r = out.plane(0);
    auto g = out.plane(1);
    for (std::size_t i = 0; i < magnitude.size(); ++i) {
        const double v = magnitude[i] / peak;
        r[i] = std::min(1.0, 2.0 * v);
        g[i] = std::max(0.0, 2.0 * v - 1.0);
    }
    return out;
}

}  // namespace waveuie
