#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "waveuie/tensor.hpp"

namespace waveuie {

/// Planar C x H x W array of samples. RGB images hold sRGB-encoded values
/// in [0, 1] with channel order R, G, B.
struct Image {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;

    Image() = default;
    Image(int c, int h, int w, double fill = 0.0);

    bool empty() const { return data.empty(); }
    std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }

    double& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
    double at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }

    std::span<double> plane(int c) { return {data.data() + c * plane_size(), plane_size()}; }
    std::span<const double> plane(int c) const { return {data.data() + c * plane_size(), plane_size()}; }

    bool operator==(const Image&) const = default;
};

/// Single-channel depth map in meters.
struct DepthMap {
    int height = 0;
    int width = 0;
    std::vector<double> meters;

    double at(int y, int x) const { return meters[static_cast<std::size_t>(y) * width + x]; }
};

/// [1, C, H, W] tensor holding a copy of the image.
Tensor to_tensor(const Image& image);
/// [N, C, H, W]; all images must share a shape.
Tensor to_batch(std::span<const Image> images);
/// Extracts sample `n` of an NCHW tensor.
Image to_image(const Tensor& batch, std::int64_t n = 0);

Image clamp01(Image image);
Image flip_horizontal(const Image& image);
Image flip_vertical(const Image& image);
Image crop_image(const Image& image, int top, int left, int height, int width);

}  // namespace waveuie
