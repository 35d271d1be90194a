#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "waveuie/image.hpp"

namespace waveuie {

/// Named attenuation profile. beta in 1/meter (R, G, B); background is the
/// veiling-light chromaticity, scaled by the light level at synthesis time.
struct WaterType {
    std::string name;
    std::array<double, 3> beta{};
    std::array<double, 3> background{};
};

/// Builds a profile from per-meter residual energy ratios N (beta = -ln N).
/// The background chromaticity is the light left after five meters of that
/// water, normalized so its brightest channel is 1.
WaterType water_from_residual_ratio(const std::string& name, std::array<double, 3> ratio);

/// I, IB, II, III, 1C and 3C.
std::vector<WaterType> default_water_types();

struct SynthSpec {
    std::vector<WaterType> water_types = default_water_types();
    std::vector<double> light_levels{0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    double depth_scale = 0.001;  // meters per raw depth unit
    // Each variant scales its depth by a factor in [1 - jitter, 1 + jitter]
    // drawn from the dataset seed.
    double depth_jitter = 0.0;
};

/// I_c = J_c t_c + B_c (1 - t_c), t_c = exp(-beta_c d), B = light * background,
/// clamped to [0, 1].
Image synthesize(const Image& clean, const DepthMap& depth, const WaterType& water, double light);

struct ManifestRow {
    std::string variant;  // degraded file name relative to the dataset root
    std::string source;   // stem of the clean image, stored as clean/<stem>.png
    std::string water_name;
    double light_level = 0.0;

    bool operator==(const ManifestRow&) const = default;
};

struct Manifest {
    std::filesystem::path root;
    std::vector<ManifestRow> rows;

    std::filesystem::path degraded_path(const ManifestRow& row) const { return root / row.variant; }
    std::filesystem::path clean_path(const ManifestRow& row) const;
};

struct SkippedSource {
    std::string stem;
    std::string reason;
};

struct DatasetReport {
    Manifest manifest;
    std::vector<SkippedSource> skipped;
};

/// Light level as it appears in variant names and the manifest.
std::string format_light(double light);
std::string variant_name(const std::string& stem, const std::string& water, double light);

/// Reads <stem>.png + <stem>_depth.png pairs from rgbd_dir and writes every
/// water x light variant, clean/<stem>.png and manifest.tsv into out_dir.
/// Sources without a readable depth map are skipped and reported. Existing
/// files are only replaced when overwrite is set. Up to `threads` sources are
/// processed at once; the manifest order does not depend on it.
DatasetReport generate_dataset(const std::filesystem::path& rgbd_dir, const SynthSpec& spec,
                               const std::filesystem::path& out_dir, std::uint64_t seed, bool overwrite = false,
                               int threads = 1);

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);
/// Parses manifest.tsv; root becomes the manifest's directory.
Manifest load_manifest(const std::filesystem::path& path);

/// Same size x size window from both images, position drawn from seed.
std::pair<Image, Image> random_crop_pair(const Image& clean, const Image& degraded, int size, std::uint64_t seed);

}  // namespace waveuie
