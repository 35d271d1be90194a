#include "waveuie/io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>

#include "waveuie/errors.hpp"

namespace waveuie {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw IoError("cannot open " + path.string());
    return f;
}

// Rows as decoded by libpng after the requested transforms.
struct Decoded {
    int width = 0, height = 0, channels = 0, bit_depth = 0;
    std::vector<std::uint8_t> bytes;
};

enum class Want { Rgb, Gray };

Decoded decode(const std::filesystem::path& path, Want want) {
    FilePtr file = open_file(path, "rb");
    std::uint8_t sig[8];
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw IoError("not a PNG file: " + path.string());
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng initialization failed for " + path.string());
    }
    Decoded out;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("corrupt PNG: " + path.string());
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    if (want == Want::Rgb && (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)) {
        png_set_gray_to_rgb(png);
    }
    if (want == Want::Gray && (color & PNG_COLOR_MASK_COLOR)) {
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    }
    if (depth == 16) png_set_swap(png);
    png_read_update_info(png, info);
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.channels = png_get_channels(png, info);
    out.bit_depth = png_get_bit_depth(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    out.bytes.resize(stride * static_cast<std::size_t>(out.height));
    rows.resize(static_cast<std::size_t>(out.height));
    for (int y = 0; y < out.height; ++y) rows[y] = out.bytes.data() + stride * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

double sample(const Decoded& d, std::size_t index) {
    if (d.bit_depth == 16) {
        std::uint16_t v;
        std::memcpy(&v, d.bytes.data() + 2 * index, 2);
        return v / 65535.0;
    }
    return d.bytes[index] / 255.0;
}

void encode(const std::filesystem::path& path, int width, int height, int channels, int bit_depth,
            const std::vector<std::uint8_t>& bytes) {
    FilePtr file = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng initialization failed for " + path.string());
    }
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed writing " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, width, height, bit_depth, channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (bit_depth == 16) png_set_swap(png);
    const std::size_t stride = static_cast<std::size_t>(width) * channels * (bit_depth / 8);
    for (int y = 0; y < height; ++y) rows[y] = const_cast<png_bytep>(bytes.data() + stride * y);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    if (std::fflush(file.get()) != 0) throw IoError("failed writing " + path.string());
}

}  // namespace

std::uint8_t quantize8(double x) {
    if (std::isnan(x)) return 0;
    return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(x, 0.0, 1.0)));
}

Image load_image(const std::filesystem::path& path) {
    const Decoded d = decode(path, Want::Rgb);
    Image im(3, d.height, d.width);
    for (int y = 0; y < d.height; ++y)
        for (int x = 0; x < d.width; ++x)
            for (int c = 0; c < 3; ++c)
                im.at(c, y, x) = sample(d, (static_cast<std::size_t>(y) * d.width + x) * 3 + c);
    return im;
}

Gray16 load_gray16(const std::filesystem::path& path) {
    const Decoded d = decode(path, Want::Gray);
    Gray16 out{d.height, d.width, {}};
    out.samples.resize(static_cast<std::size_t>(d.height) * d.width);
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
        if (d.bit_depth == 16) {
            std::memcpy(&out.samples[i], d.bytes.data() + 2 * i, 2);
        } else {
            out.samples[i] = d.bytes[i];
        }
    }
    return out;
}

DepthMap load_depth(const std::filesystem::path& path, double meters_per_unit) {
    const Gray16 raw = load_gray16(path);
    DepthMap depth{raw.height, raw.width, std::vector<double>(raw.samples.size())};
    for (std::size_t i = 0; i < raw.samples.size(); ++i) depth.meters[i] = raw.samples[i] * meters_per_unit;
    return depth;
}

void save_image(const std::filesystem::path& path, const Image& image) {
    if (image.channels != 1 && image.channels != 3) {
        throw DimensionError("save_image supports 1 or 3 channels, got " + std::to_string(image.channels));
    }
    if (image.empty()) throw DomainError("save_image: empty image for " + path.string());
    std::vector<std::uint8_t> bytes(image.data.size());
    std::size_t k = 0;
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            for (int c = 0; c < image.channels; ++c) bytes[k++] = quantize8(image.at(c, y, x));
    encode(path, image.width, image.height, image.channels, 8, bytes);
}

void save_gray16(const std::filesystem::path& path, const Gray16& image) {
    std::vector<std::uint8_t> bytes(image.samples.size() * 2);
    std::memcpy(bytes.data(), image.samples.data(), bytes.size());
    encode(path, image.width, image.height, 1, 16, bytes);
}

}  // namespace waveuie
