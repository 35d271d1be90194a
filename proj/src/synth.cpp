#include "waveuie/synth.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <optional>
#include <random>
#include <thread>

#include "waveuie/errors.hpp"
#include "waveuie/io.hpp"

namespace waveuie {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifestHeader = "variant\tsource\twater_name\tlight_level";
constexpr const char* kDepthSuffix = "_depth";

std::uint32_t fnv1a(const std::string& s) {
    std::uint32_t h = 2166136261u;
    for (unsigned char c : s) h = (h ^ c) * 16777619u;
    return h;
}

void ensure_writable(const fs::path& path, bool overwrite) {
    if (!overwrite && fs::exists(path)) throw UsageError("refusing to overwrite " + path.string() + " (use --force)");
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t tab = line.find('\t', start);
        out.push_back(line.substr(start, tab - start));
        if (tab == std::string::npos) return out;
        start = tab + 1;
    }
}

}  // namespace

WaterType water_from_residual_ratio(const std::string& name, std::array<double, 3> ratio) {
    WaterType w{name, {}, {}};
    double peak = 0.0;
    for (int c = 0; c < 3; ++c) {
        if (!(ratio[c] > 0.0 && ratio[c] <= 1.0)) throw DomainError("residual ratio must lie in (0, 1] for " + name);
        w.beta[c] = -std::log(ratio[c]);
        w.background[c] = std::exp(-5.0 * w.beta[c]);
        peak = std::max(peak, w.background[c]);
    }
    for (double& b : w.background) b /= peak;
    return w;
}

std::vector<WaterType> default_water_types() {
    return {
        water_from_residual_ratio("I", {0.80, 0.961, 0.982}),
        water_from_residual_ratio("IB", {0.80, 0.925, 0.965}),
        water_from_residual_ratio("II", {0.75, 0.885, 0.94}),
        water_from_residual_ratio("III", {0.71, 0.80, 0.875}),
        water_from_residual_ratio("1C", {0.67, 0.73, 0.67}),
        water_from_residual_ratio("3C", {0.62, 0.61, 0.50}),
    };
}

Image synthesize(const Image& clean, const DepthMap& depth, const WaterType& water, double light) {
    if (clean.channels != 3) throw DimensionError("synthesize expects an RGB image");
    if (depth.height != clean.height || depth.width != clean.width) {
        throw DimensionError("depth map " + std::to_string(depth.height) + "x" + std::to_string(depth.width) +
                             " does not match image " + std::to_string(clean.height) + "x" +
                             std::to_string(clean.width));
    }
    const auto nan_count = std::count_if(depth.meters.begin(), depth.meters.end(), [](double d) { return std::isnan(d); });
    if (nan_count > 0) throw DomainError("depth map has " + std::to_string(nan_count) + " NaN pixels");
    if (std::any_of(depth.meters.begin(), depth.meters.end(), [](double d) { return d < 0.0; })) {
        throw DomainError("depth map has negative values");
    }
    Image out(3, clean.height, clean.width);
    for (int c = 0; c < 3; ++c) {
        const double b = light * water.background[c];
        auto src = clean.plane(c);
        auto dst = out.plane(c);
        for (std::size_t i = 0; i < dst.size(); ++i) {
            const double t = std::exp(-water.beta[c] * depth.meters[i]);
            dst[i] = std::clamp(src[i] * t + b * (1.0 - t), 0.0, 1.0);
        }
    }
    return out;
}

fs::path Manifest::clean_path(const ManifestRow& row) const { return root / "clean" / (row.source + ".png"); }

std::string format_light(double light) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", light);
    return buf;
}

std::string variant_name(const std::string& stem, const std::string& water, double light) {
    return stem + "__" + water + "__" + format_light(light) + ".png";
}

DatasetReport generate_dataset(const fs::path& rgbd_dir, const SynthSpec& spec, const fs::path& out_dir,
                               std::uint64_t seed, bool overwrite, int threads) {
    if (!fs::is_directory(rgbd_dir)) throw IoError("input directory not found: " + rgbd_dir.string());
    if (spec.water_types.empty() || spec.light_levels.empty()) throw UsageError("synth spec has no variants");
    for (double l : spec.light_levels) {
        if (!(l > 0.0 && l <= 1.0)) throw DomainError("light level " + std::to_string(l) + " outside (0, 1]");
    }
    if (!(spec.depth_scale > 0.0)) throw DomainError("depth_scale must be positive");
    if (!(spec.depth_jitter >= 0.0 && spec.depth_jitter < 1.0)) throw DomainError("depth_jitter must lie in [0, 1)");

    std::vector<std::string> stems;
    for (const auto& entry : fs::directory_iterator(rgbd_dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".png") continue;
        const std::string stem = entry.path().stem().string();
        if (stem.size() >= 6 && stem.ends_with(kDepthSuffix)) continue;
        stems.push_back(stem);
    }
    std::sort(stems.begin(), stems.end());

    std::error_code ec;
    fs::create_directories(out_dir / "clean", ec);
    if (ec) throw IoError("cannot create " + (out_dir / "clean").string() + ": " + ec.message());
    ensure_writable(out_dir / "manifest.tsv", overwrite);

    struct Outcome {
        std::vector<ManifestRow> rows;
        std::optional<std::string> skipped;
        std::exception_ptr error;
    };
    auto process = [&](const std::string& stem) {
        Outcome o;
        const fs::path depth_path = rgbd_dir / (stem + kDepthSuffix + ".png");
        if (!fs::exists(depth_path)) {
            o.skipped = "missing depth map " + depth_path.filename().string();
            return o;
        }
        Image clean;
        DepthMap depth;
        try {
            clean = load_image(rgbd_dir / (stem + ".png"));
            depth = load_depth(depth_path, spec.depth_scale);
        } catch (const IoError& e) {
            o.skipped = e.what();
            return o;
        }
        if (depth.height != clean.height || depth.width != clean.width) {
            o.skipped = "depth map size differs from color image";
            return o;
        }
        const fs::path clean_out = out_dir / "clean" / (stem + ".png");
        ensure_writable(clean_out, overwrite);
        save_image(clean_out, clean);
        for (std::size_t w = 0; w < spec.water_types.size(); ++w) {
            const WaterType& water = spec.water_types[w];
            for (std::size_t l = 0; l < spec.light_levels.size(); ++l) {
                const double light = spec.light_levels[l];
                DepthMap d = depth;
                if (spec.depth_jitter > 0.0) {
                    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                                      fnv1a(stem), static_cast<std::uint32_t>(w), static_cast<std::uint32_t>(l)};
                    std::mt19937_64 rng(seq);
                    const double f =
                        std::uniform_real_distribution<double>(1.0 - spec.depth_jitter, 1.0 + spec.depth_jitter)(rng);
                    for (double& m : d.meters) m *= f;
                }
                ManifestRow row{variant_name(stem, water.name, light), stem, water.name, light};
                const fs::path out = out_dir / row.variant;
                ensure_writable(out, overwrite);
                save_image(out, synthesize(clean, d, water, light));
                o.rows.push_back(std::move(row));
            }
        }
        return o;
    };

    // Sources are independent; results are gathered back in sorted order.
    std::vector<Outcome> outcomes(stems.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next++) < stems.size();) {
            try {
                outcomes[i] = process(stems[i]);
            } catch (...) {
                outcomes[i].error = std::current_exception();
            }
        }
    };
    const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), stems.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    DatasetReport report;
    report.manifest.root = out_dir;
    for (std::size_t i = 0; i < stems.size(); ++i) {
        if (outcomes[i].error) std::rethrow_exception(outcomes[i].error);
        if (outcomes[i].skipped) report.skipped.push_back({stems[i], *outcomes[i].skipped});
        for (auto& row : outcomes[i].rows) report.manifest.rows.push_back(std::move(row));
    }
    write_manifest(out_dir / "manifest.tsv", report.manifest.rows);
    return report;
}

void write_manifest(const fs::path& path, const std::vector<ManifestRow>& rows) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << kManifestHeader << '\n';
    for (const auto& r : rows) out << r.variant << '\t' << r.source << '\t' << r.water_name << '\t' << format_light(r.light_level) << '\n';
    out.flush();
    if (!out) throw IoError("failed writing " + path.string());
}

Manifest load_manifest(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read manifest " + path.string());
    Manifest m;
    m.root = path.parent_path();
    std::string line;
    if (!std::getline(in, line) || line != kManifestHeader) {
        throw IoError("manifest " + path.string() + " lacks the header '" + kManifestHeader + "'");
    }
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cols = split_tabs(line);
        const auto bad = [&](const std::string& why) {
            return IoError(path.string() + ":" + std::to_string(line_no) + ": " + why);
        };
        if (cols.size() != 4) throw bad("expected 4 columns, got " + std::to_string(cols.size()));
        ManifestRow row{cols[0], cols[1], cols[2], 0.0};
        const auto [ptr, err] = std::from_chars(cols[3].data(), cols[3].data() + cols[3].size(), row.light_level);
        if (err != std::errc{} || ptr != cols[3].data() + cols[3].size()) throw bad("bad light level '" + cols[3] + "'");
        if (row.variant.empty() || row.source.empty()) throw bad("empty variant or source");
        m.rows.push_back(std::move(row));
    }
    return m;
}

std::pair<Image, Image> random_crop_pair(const Image& clean, const Image& degraded, int size, std::uint64_t seed) {
    if (clean.channels != degraded.channels || clean.height != degraded.height || clean.width != degraded.width) {
        throw DimensionError("crop pair images differ in shape");
    }
    if (size < 1 || size > clean.height || size > clean.width) {
        throw DimensionError("crop size " + std::to_string(size) + " does not fit " + std::to_string(clean.height) +
                             "x" + std::to_string(clean.width));
    }
    std::mt19937_64 rng(seed);
    const int top = std::uniform_int_distribution<int>(0, clean.height - size)(rng);
    const int left = std::uniform_int_distribution<int>(0, clean.width - size)(rng);
    return {crop_image(clean, top, left, size, size), crop_image(degraded, top, left, size, size)};
}

}  // namespace waveuie
