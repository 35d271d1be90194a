#include "waveuie/colorspace.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>

#include "waveuie/errors.hpp"

namespace waveuie::color {

namespace {

const Eigen::Matrix3d& rgb_to_xyz_matrix() {
    static const Eigen::Matrix3d m = (Eigen::Matrix3d() << 0.4124564, 0.3575761, 0.1804375,  //
                                      0.2126729, 0.7151522, 0.0721750,                       //
                                      0.0193339, 0.1191920, 0.9503041)
                                         .finished();
    return m;
}

const Eigen::Matrix3d& xyz_to_rgb_matrix() {
    static const Eigen::Matrix3d m = rgb_to_xyz_matrix().inverse();
    return m;
}

// Reference white is the XYZ of RGB (1, 1, 1), so white maps to L=100, a=b=0.
const Eigen::Vector3d& white_point() {
    static const Eigen::Vector3d w = rgb_to_xyz_matrix() * Eigen::Vector3d::Ones();
    return w;
}

constexpr double kDelta = 6.0 / 29.0;

double lab_f(double t) {
    return t > kDelta * kDelta * kDelta ? std::cbrt(t) : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}

double lab_f_inv(double f) { return f > kDelta ? f * f * f : 3.0 * kDelta * kDelta * (f - 4.0 / 29.0); }

double clamp_input(double v, ConversionStats* stats) {
    if (v < 0.0 || v > 1.0 || std::isnan(v)) {
        if (stats) ++stats->clamped_inputs;
        return std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0);
    }
    return v;
}

Rgb clamp_rgb(Rgb c, ConversionStats* stats) {
    ConversionStats local;
    c.r = clamp_input(c.r, &local);
    c.g = clamp_input(c.g, &local);
    c.b = clamp_input(c.b, &local);
    if (stats && local.clamped_inputs) ++stats->clamped_inputs;
    return c;
}

void require_rgb(const Image& image, const char* op) {
    if (image.channels != 3) {
        throw DimensionError(std::string(op) + ": expected 3 channels, got " + std::to_string(image.channels));
    }
}

template <typename Fn>
Image map_pixels(const Image& in, Fn fn) {
    Image out(3, in.height, in.width);
    const std::size_t n = in.plane_size();
    auto p0 = in.plane(0), p1 = in.plane(1), p2 = in.plane(2);
    auto o0 = out.plane(0), o1 = out.plane(1), o2 = out.plane(2);
    for (std::size_t i = 0; i < n; ++i) {
        const auto [x, y, z] = fn(p0[i], p1[i], p2[i]);
        o0[i] = x;
        o1[i] = y;
        o2[i] = z;
    }
    return out;
}

}  // namespace

double srgb_to_linear(double c) { return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4); }

double linear_to_srgb(double c) { return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055; }

Hsv rgb_to_hsv(Rgb rgb, ConversionStats* stats) {
    rgb = clamp_rgb(rgb, stats);
    const double mx = std::max({rgb.r, rgb.g, rgb.b});
    const double mn = std::min({rgb.r, rgb.g, rgb.b});
    const double delta = mx - mn;
    Hsv out;
    out.v = mx;
    out.s = mx > 0.0 ? delta / mx : 0.0;
    if (delta <= 0.0) return out;
    double h;
    if (mx == rgb.r) {
        h = (rgb.g - rgb.b) / delta;
    } else if (mx == rgb.g) {
        h = 2.0 + (rgb.b - rgb.r) / delta;
    } else {
        h = 4.0 + (rgb.r - rgb.g) / delta;
    }
    h /= 6.0;
    if (h < 0.0) h += 1.0;
    if (h >= 1.0) h -= 1.0;
    out.h = h;
    return out;
}

Rgb hsv_to_rgb(Hsv hsv) {
    const double s = std::clamp(hsv.s, 0.0, 1.0);
    const double v = std::clamp(hsv.v, 0.0, 1.0);
    double h = hsv.h - std::floor(hsv.h);
    if (s <= 0.0) return {v, v, v};
    h *= 6.0;
    const int sector = static_cast<int>(std::floor(h)) % 6;
    const double f = h - std::floor(h);
    const double p = v * (1.0 - s);
    const double q = v * (1.0 - s * f);
    const double t = v * (1.0 - s * (1.0 - f));
    switch (sector) {
        case 0: return {v, t, p};
        case 1: return {q, v, p};
        case 2: return {p, v, t};
        case 3: return {p, q, v};
        case 4: return {t, p, v};
        default: return {v, p, q};
    }
}

Lab rgb_to_lab(Rgb rgb, ConversionStats* stats) {
    rgb = clamp_rgb(rgb, stats);
    const Eigen::Vector3d lin(srgb_to_linear(rgb.r), srgb_to_linear(rgb.g), srgb_to_linear(rgb.b));
    const Eigen::Vector3d xyz = rgb_to_xyz_matrix() * lin;
    const Eigen::Vector3d& w = white_point();
    const double fx = lab_f(xyz[0] / w[0]);
    const double fy = lab_f(xyz[1] / w[1]);
    const double fz = lab_f(xyz[2] / w[2]);
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

Rgb lab_to_rgb(Lab lab, ConversionStats* stats) {
    const double fy = (lab.L + 16.0) / 116.0;
    const double fx = fy + lab.a / 500.0;
    const double fz = fy - lab.b / 200.0;
    const Eigen::Vector3d& w = white_point();
    const Eigen::Vector3d xyz(w[0] * lab_f_inv(fx), w[1] * lab_f_inv(fy), w[2] * lab_f_inv(fz));
    const Eigen::Vector3d lin = xyz_to_rgb_matrix() * xyz;
    Rgb out;
    bool clipped = false;
    double* channels[3] = {&out.r, &out.g, &out.b};
    for (int i = 0; i < 3; ++i) {
        double c = lin[i];
        if (c < 0.0) {
            c = 0.0;
            clipped = true;
        }
        double e = linear_to_srgb(c);
        if (e > 1.0) {
            e = 1.0;
            clipped = true;
        }
        *channels[i] = e;
    }
    // Rounding noise at the gamut boundary is not an excursion.
    if (clipped && stats) {
        const double worst = std::max({-lin.minCoeff(), lin.maxCoeff() - 1.0});
        if (worst > 1e-9) ++stats->out_of_gamut;
    }
    return out;
}

Image rgb_to_hsv(const Image& rgb, ConversionStats* stats) {
    require_rgb(rgb, "rgb_to_hsv");
    return map_pixels(rgb, [stats](double r, double g, double b) {
        const Hsv c = rgb_to_hsv(Rgb{r, g, b}, stats);
        return std::array<double, 3>{c.h, c.s, c.v};
    });
}

Image hsv_to_rgb(const Image& hsv) {
    require_rgb(hsv, "hsv_to_rgb");
    return map_pixels(hsv, [](double h, double s, double v) {
        const Rgb c = hsv_to_rgb(Hsv{h, s, v});
        return std::array<double, 3>{c.r, c.g, c.b};
    });
}

Image rgb_to_lab(const Image& rgb, ConversionStats* stats) {
    require_rgb(rgb, "rgb_to_lab");
    return map_pixels(rgb, [stats](double r, double g, double b) {
        const Lab c = rgb_to_lab(Rgb{r, g, b}, stats);
        return std::array<double, 3>{c.L, c.a, c.b};
    });
}

Image lab_to_rgb(const Image& lab, ConversionStats* stats) {
    require_rgb(lab, "lab_to_rgb");
    return map_pixels(lab, [stats](double L, double a, double b) {
        const Rgb c = lab_to_rgb(Lab{L, a, b}, stats);
        return std::array<double, 3>{c.r, c.g, c.b};
    });
}

Image multi_color_stack(const Image& rgb, ConversionStats* stats) {
    require_rgb(rgb, "multi_color_stack");
    Image out(kStackChannels, rgb.height, rgb.width);
    const std::size_t n = rgb.plane_size();
    std::copy(rgb.data.begin(), rgb.data.end(), out.data.begin());
    auto r = rgb.plane(0), g = rgb.plane(1), b = rgb.plane(2);
    for (std::size_t i = 0; i < n; ++i) {
        const Rgb px{r[i], g[i], b[i]};
        const Hsv hsv = rgb_to_hsv(px, stats);
        const Lab lab = rgb_to_lab(px, nullptr);
        out.data[3 * n + i] = hsv.h;
        out.data[4 * n + i] = hsv.s;
        out.data[5 * n + i] = hsv.v;
        out.data[6 * n + i] = lab.L / 100.0;
        out.data[7 * n + i] = (lab.a + 128.0) / 255.0;
        out.data[8 * n + i] = (lab.b + 128.0) / 255.0;
    }
    return out;
}

Tensor multi_color_stack(const Tensor& rgb_batch, ConversionStats* stats) {
    if (rgb_batch.ndim() != 4 || rgb_batch.dim(1) != 3) {
        throw DimensionError("multi_color_stack expects [N,3,H,W], got " + shape_to_string(rgb_batch.shape()));
    }
    const auto N = rgb_batch.dim(0);
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(N * kStackChannels * rgb_batch.dim(2) * rgb_batch.dim(3)));
    for (std::int64_t n = 0; n < N; ++n) {
        const Image stack = multi_color_stack(to_image(rgb_batch, n), stats);
        data.insert(data.end(), stack.data.begin(), stack.data.end());
    }
    return Tensor::from_data({N, kStackChannels, rgb_batch.dim(2), rgb_batch.dim(3)}, std::move(data));
}

}  // namespace waveuie::color
