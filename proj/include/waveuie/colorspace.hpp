#pragma once

#include <cstddef>

#include "waveuie/image.hpp"
#include "waveuie/tensor.hpp"

namespace waveuie::color {

struct Rgb {
    double r = 0, g = 0, b = 0;
};

/// h in [0, 1) (degrees / 360), s and v in [0, 1].
struct Hsv {
    double h = 0, s = 0, v = 0;
};

/// CIE L*a*b* relative to D65; L in [0, 100].
struct Lab {
    double L = 0, a = 0, b = 0;
};

/// Counts inputs clamped into [0, 1] and Lab colors outside the sRGB gamut.
struct ConversionStats {
    std::size_t clamped_inputs = 0;
    std::size_t out_of_gamut = 0;
};

Hsv rgb_to_hsv(Rgb rgb, ConversionStats* stats = nullptr);
Rgb hsv_to_rgb(Hsv hsv);

/// sRGB (IEC 61966-2-1 transfer curve) -> linear RGB -> XYZ (D65) -> Lab.
Lab rgb_to_lab(Rgb rgb, ConversionStats* stats = nullptr);
/// Results outside [0, 1] are clamped and counted as out of gamut.
Rgb lab_to_rgb(Lab lab, ConversionStats* stats = nullptr);

double srgb_to_linear(double c);
double linear_to_srgb(double c);

Image rgb_to_hsv(const Image& rgb, ConversionStats* stats = nullptr);
Image hsv_to_rgb(const Image& hsv);
Image rgb_to_lab(const Image& rgb, ConversionStats* stats = nullptr);
Image lab_to_rgb(const Image& lab, ConversionStats* stats = nullptr);

inline constexpr int kStackChannels = 9;

/// 9 x h x w: [R, G, B, H, S, V, L/100, (a+128)/255, (b+128)/255].
/// Channels 0-2 are copied from the input unchanged.
Image multi_color_stack(const Image& rgb, ConversionStats* stats = nullptr);

/// Applies multi_color_stack per sample of an [N, 3, H, W] batch. The result
/// carries no gradient history: the stack is a fixed input transform.
Tensor multi_color_stack(const Tensor& rgb_batch, ConversionStats* stats = nullptr);

}  // namespace waveuie::color
