#include "waveuie/image.hpp"

#include <algorithm>
#include <string>

#include "waveuie/errors.hpp"

namespace waveuie {

Image::Image(int c, int h, int w, double fill) : channels(c), height(h), width(w) {
    if (c < 0 || h < 0 || w < 0) throw DimensionError("negative image extent");
    data.assign(static_cast<std::size_t>(c) * h * w, fill);
}

Tensor to_tensor(const Image& image) {
    return Tensor::from_data({1, image.channels, image.height, image.width}, image.data);
}

Tensor to_batch(std::span<const Image> images) {
    if (images.empty()) throw UsageError("to_batch of an empty list");
    const Image& first = images.front();
    std::vector<double> data;
    data.reserve(first.data.size() * images.size());
    for (const Image& im : images) {
        if (im.channels != first.channels || im.height != first.height || im.width != first.width) {
            throw DimensionError("to_batch: images differ in shape");
        }
        data.insert(data.end(), im.data.begin(), im.data.end());
    }
    return Tensor::from_data({static_cast<std::int64_t>(images.size()), first.channels, first.height, first.width},
                             std::move(data));
}

Image to_image(const Tensor& batch, std::int64_t n) {
    if (batch.ndim() != 4) throw DimensionError("to_image expects NCHW, got " + shape_to_string(batch.shape()));
    if (n < 0 || n >= batch.dim(0)) throw DimensionError("to_image: sample index out of range");
    Image im(static_cast<int>(batch.dim(1)), static_cast<int>(batch.dim(2)), static_cast<int>(batch.dim(3)));
    auto src = batch.data().subspan(static_cast<std::size_t>(n) * im.data.size(), im.data.size());
    std::copy(src.begin(), src.end(), im.data.begin());
    return im;
}

Image clamp01(Image image) {
    for (double& v : image.data) v = std::clamp(v, 0.0, 1.0);
    return image;
}

Image flip_horizontal(const Image& image) {
    Image out(image.channels, image.height, image.width);
    for (int c = 0; c < image.channels; ++c)
        for (int y = 0; y < image.height; ++y)
            for (int x = 0; x < image.width; ++x) out.at(c, y, x) = image.at(c, y, image.width - 1 - x);
    return out;
}

Image flip_vertical(const Image& image) {
    Image out(image.channels, image.height, image.width);
    for (int c = 0; c < image.channels; ++c)
        for (int y = 0; y < image.height; ++y)
            for (int x = 0; x < image.width; ++x) out.at(c, y, x) = image.at(c, image.height - 1 - y, x);
    return out;
}

Image crop_image(const Image& image, int top, int left, int height, int width) {
    if (top < 0 || left < 0 || height <= 0 || width <= 0 || top + height > image.height ||
        left + width > image.width) {
        throw DimensionError("crop window " + std::to_string(height) + "x" + std::to_string(width) + " at (" +
                             std::to_string(top) + "," + std::to_string(left) + ") exceeds image " +
                             std::to_string(image.height) + "x" + std::to_string(image.width));
    }
    Image out(image.channels, height, width);
    for (int c = 0; c < image.channels; ++c)
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) out.at(c, y, x) = image.at(c, top + y, left + x);
    return out;
}

}  // namespace waveuie
