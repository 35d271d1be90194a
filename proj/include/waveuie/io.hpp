#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "waveuie/image.hpp"

namespace waveuie {

/// Reads an 8- or 16-bit PNG as RGB in [0, 1] (gray is replicated, alpha
/// dropped, palettes expanded). Throws IoError naming the path.
Image load_image(const std::filesystem::path& path);

/// Raw 16-bit single-channel samples of a grayscale PNG.
struct Gray16 {
    int height = 0;
    int width = 0;
    std::vector<std::uint16_t> samples;
};

Gray16 load_gray16(const std::filesystem::path& path);

/// Depth PNG scaled to meters: raw sample * meters_per_unit.
DepthMap load_depth(const std::filesystem::path& path, double meters_per_unit);

/// Writes an 8-bit PNG (1 or 3 channels): round(255 * clamp(x, 0, 1)).
void save_image(const std::filesystem::path& path, const Image& image);

void save_gray16(const std::filesystem::path& path, const Gray16& image);

/// 8-bit quantization used by save_image.
std::uint8_t quantize8(double x);

}  // namespace waveuie
