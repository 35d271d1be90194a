#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "waveuie/colorspace.hpp"
#include "waveuie/image.hpp"

namespace waveuie {

/// Single-scale SSIM of the Rec.601 luminance of two RGB images in [0, 1]:
/// 11x11 Gaussian window (sigma 1.5), valid positions only, K1 = 0.01,
/// K2 = 0.03. Images smaller than the window use the largest odd window
/// that fits.
double ssim(const Image& x, const Image& y);

/// Rec.601 luminance plane (0.299 R + 0.587 G + 0.114 B), 1 x H x W.
Image luminance(const Image& rgb);

struct UiqmCoefficients {
    double c1 = 0.0282;
    double c2 = 0.2953;
    double c3 = 3.5753;
};

struct UiqmComponents {
    double uicm = 0.0;
    double uism = 0.0;
    double uiconm = 0.0;
    double score = 0.0;
};

/// Colorfulness, sharpness and contrast terms on the 0-255 scale. A constant
/// image yields all zeros.
UiqmComponents uiqm_components(const Image& rgb, const UiqmCoefficients& k = {});
double uiqm(const Image& rgb, const UiqmCoefficients& k = {});

struct UciqeCoefficients {
    double c1 = 0.4680;
    double c2 = 0.2745;
    double c3 = 0.2576;
};

struct UciqeComponents {
    double chroma_std = 0.0;          // std of Lab chroma / 100
    double luminance_contrast = 0.0;  // (mean top 1% L - mean bottom 1% L) / 100
    double saturation_mean = 0.0;     // mean HSV saturation
    double score = 0.0;
};

UciqeComponents uciqe_components(const Image& rgb, const UciqeCoefficients& k = {});
double uciqe(const Image& rgb, const UciqeCoefficients& k = {});

double ciede2000(const color::Lab& lab1, const color::Lab& lab2);
/// Mean per-pixel CIEDE2000 between two RGB images.
double mean_ciede2000(const Image& x, const Image& y);

struct Patch {
    int top = 0;
    int left = 0;
    int height = 0;
    int width = 0;
};

/// Mean CIEDE2000 between each patch's mean color and its reference.
double colorchecker_score(const Image& rgb, const std::vector<Patch>& layout,
                          const std::vector<color::Lab>& reference_colors);

enum class Metric { Ssim, Uiqm, Uciqe, Ciede2000 };

std::string metric_name(Metric m);
/// Throws UsageError for unknown names.
Metric parse_metric(const std::string& name);
bool needs_reference(Metric m);

struct MetricCoefficients {
    UiqmCoefficients uiqm;
    UciqeCoefficients uciqe;
};

/// Scores pred (against ref for full-reference metrics).
double compute_metric(Metric m, const Image& pred, const Image* ref, const MetricCoefficients& k = {});

struct MetricReport {
    struct Row {
        std::string image;
        std::vector<double> values;  // one per metric, same order as `metrics`
        double seconds = 0.0;        // enhancement wall-clock time, 0 when not timed
    };
    std::vector<Metric> metrics;
    std::vector<Row> rows;
    std::vector<std::string> skipped;

    double mean(std::size_t metric) const;
    double stddev(std::size_t metric) const;
    double mean_seconds() const;
};

/// Header `image` + one column per metric (+ `seconds` when timed), one row
/// per image, then `mean` and `std` rows.
void write_report_tsv(std::ostream& out, const MetricReport& report, bool timed);

}  // namespace waveuie
