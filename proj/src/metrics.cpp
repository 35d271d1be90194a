#include "waveuie/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "waveuie/errors.hpp"

namespace waveuie {

namespace {

void require_rgb(const Image& im, const char* what) {
    if (im.channels != 3) throw DimensionError(std::string(what) + " expects an RGB image");
    if (im.empty()) throw DomainError(std::string(what) + ": empty image");
}

void require_same_shape(const Image& x, const Image& y, const char* what) {
    if (x.channels != y.channels || x.height != y.height || x.width != y.width) {
        throw DimensionError(std::string(what) + ": images differ in shape (" + std::to_string(x.height) + "x" +
                             std::to_string(x.width) + " vs " + std::to_string(y.height) + "x" +
                             std::to_string(y.width) + ")");
    }
}

// Valid-mode separable filter of an H x W plane with kernel g.
std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w, const std::vector<double>& g) {
    const int k = static_cast<int>(g.size());
    const int ho = h - k + 1, wo = w - k + 1;
    std::vector<double> rows(static_cast<std::size_t>(h) * wo, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < wo; ++x) {
            double s = 0.0;
            for (int i = 0; i < k; ++i) s += g[i] * plane[static_cast<std::size_t>(y) * w + x + i];
            rows[static_cast<std::size_t>(y) * wo + x] = s;
        }
    std::vector<double> out(static_cast<std::size_t>(ho) * wo, 0.0);
    for (int y = 0; y < ho; ++y)
        for (int x = 0; x < wo; ++x) {
            double s = 0.0;
            for (int i = 0; i < k; ++i) s += g[i] * rows[static_cast<std::size_t>(y + i) * wo + x];
            out[static_cast<std::size_t>(y) * wo + x] = s;
        }
    return out;
}

std::vector<double> gaussian_1d(int size, double sigma) {
    std::vector<double> g(static_cast<std::size_t>(size));
    const double r = (size - 1) / 2.0;
    double sum = 0.0;
    for (int i = 0; i < size; ++i) sum += g[i] = std::exp(-(i - r) * (i - r) / (2.0 * sigma * sigma));
    for (double& v : g) v /= sum;
    return g;
}

bool is_constant(const Image& im) {
    for (int c = 0; c < im.channels; ++c) {
        const auto p = im.plane(c);
        if (std::any_of(p.begin(), p.end(), [&](double v) { return v != p[0]; })) return false;
    }
    return true;
}

// Block edges along an axis of length n: about n / 8 blocks of at least 8
// samples, laid out mirror-symmetrically so flips permute the blocks.
std::vector<int> block_edges(int n) {
    int k = std::max(1, n / 8);
    if (n % 2 == 1 && k % 2 == 0) --k;
    k = std::max(1, k);
    std::vector<int> edges(static_cast<std::size_t>(k) + 1);
    for (int i = 0; i <= k; ++i) {
        edges[i] = 2 * i <= k ? static_cast<int>(static_cast<long long>(i) * n / k)
                              : n - static_cast<int>(static_cast<long long>(k - i) * n / k);
    }
    return edges;
}

template <typename BlockFn>
double over_blocks(int h, int w, BlockFn&& fn) {
    const auto ye = block_edges(h), xe = block_edges(w);
    const double blocks = static_cast<double>((ye.size() - 1) * (xe.size() - 1));
    double sum = 0.0;
    for (std::size_t by = 0; by + 1 < ye.size(); ++by)
        for (std::size_t bx = 0; bx + 1 < xe.size(); ++bx) sum += fn(ye[by], ye[by + 1], xe[bx], xe[bx + 1]);
    return sum / blocks;
}

std::pair<double, double> block_range(const std::vector<double>& plane, int w, int y0, int y1, int x0, int x1) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            const double v = plane[static_cast<std::size_t>(y) * w + x];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    return {lo, hi};
}

// Half-sample symmetric index.
int reflect(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
    return i;
}

std::vector<double> sobel_magnitude(const std::vector<double>& p, int h, int w) {
    std::vector<double> out(p.size());
    auto at = [&](int y, int x) { return p[static_cast<std::size_t>(reflect(y, h)) * w + reflect(x, w)]; };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double gx = (at(y - 1, x + 1) + 2 * at(y, x + 1) + at(y + 1, x + 1)) -
                              (at(y - 1, x - 1) + 2 * at(y, x - 1) + at(y + 1, x - 1));
            const double gy = (at(y + 1, x - 1) + 2 * at(y + 1, x) + at(y + 1, x + 1)) -
                              (at(y - 1, x - 1) + 2 * at(y - 1, x) + at(y - 1, x + 1));
            out[static_cast<std::size_t>(y) * w + x] = std::hypot(gx, gy);
        }
    return out;
}

double trimmed_mean(std::vector<double> v, double alpha_low, double alpha_high) {
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size();
    const auto lo = static_cast<std::size_t>(std::ceil(alpha_low * static_cast<double>(k)));
    const auto hi = static_cast<std::size_t>(std::floor(alpha_high * static_cast<double>(k)));
    if (lo + hi >= k) throw DomainError("trimmed mean removes every sample");
    double s = 0.0;
    for (std::size_t i = lo; i < k - hi; ++i) s += v[i];
    return s / static_cast<double>(k - lo - hi);
}

double uicm(const Image& rgb) {
    const std::size_t n = rgb.plane_size();
    std::vector<double> rg(n), yb(n);
    const auto r = rgb.plane(0), g = rgb.plane(1), b = rgb.plane(2);
    for (std::size_t i = 0; i < n; ++i) {
        rg[i] = 255.0 * (r[i] - g[i]);
        yb[i] = 255.0 * ((r[i] + g[i]) / 2.0 - b[i]);
    }
    const double mu_rg = trimmed_mean(rg, 0.1, 0.1), mu_yb = trimmed_mean(yb, 0.1, 0.1);
    double var_rg = 0.0, var_yb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        var_rg += (rg[i] - mu_rg) * (rg[i] - mu_rg);
        var_yb += (yb[i] - mu_yb) * (yb[i] - mu_yb);
    }
    var_rg /= static_cast<double>(n);
    var_yb /= static_cast<double>(n);
    return -0.0268 * std::hypot(mu_rg, mu_yb) + 0.1586 * std::sqrt(var_rg + var_yb);
}

double eme(const std::vector<double>& plane, int h, int w) {
    return 2.0 * over_blocks(h, w, [&](int y0, int y1, int x0, int x1) {
               const auto [lo, hi] = block_range(plane, w, y0, y1, x0, x1);
               return lo > 0.0 && hi > 0.0 ? std::log(hi / lo) : 0.0;
           });
}

double uism(const Image& rgb) {
    constexpr double kWeights[3] = {0.299, 0.587, 0.114};
    double s = 0.0;
    for (int c = 0; c < 3; ++c) {
        const auto p = rgb.plane(c);
        std::vector<double> ch(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) ch[i] = 255.0 * p[i];
        std::vector<double> edge = sobel_magnitude(ch, rgb.height, rgb.width);
        for (std::size_t i = 0; i < edge.size(); ++i) edge[i] *= ch[i];
        s += kWeights[c] * eme(edge, rgb.height, rgb.width);
    }
    return s;
}

double uiconm(const Image& rgb) {
    const Image y = luminance(rgb);
    std::vector<double> plane(y.data.size());
    for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = 255.0 * y.data[i];
    return -over_blocks(rgb.height, rgb.width, [&](int y0, int y1, int x0, int x1) {
        const auto [lo, hi] = block_range(plane, rgb.width, y0, y1, x0, x1);
        const double top = hi - lo, bot = hi + lo;
        if (top <= 0.0 || bot <= 0.0) return 0.0;
        return (top / bot) * std::log(top / bot);
    });
}

double deg(double rad) { return rad * 180.0 / std::numbers::pi; }
double rad(double deg) { return deg * std::numbers::pi / 180.0; }

}  // namespace

Image luminance(const Image& rgb) {
    require_rgb(rgb, "luminance");
    Image y(1, rgb.height, rgb.width);
    const auto r = rgb.plane(0), g = rgb.plane(1), b = rgb.plane(2);
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
    return y;
}

double ssim(const Image& x, const Image& y) {
    require_rgb(x, "ssim");
    require_same_shape(x, y, "ssim");
    int window = std::min({11, x.height, x.width});
    if (window % 2 == 0) --window;
    const auto g = gaussian_1d(window, 1.5);
    const Image lx = luminance(x), ly = luminance(y);
    const int h = x.height, w = x.width;
    std::vector<double> xx(lx.data.size()), yy(xx.size()), xy(xx.size());
    for (std::size_t i = 0; i < xx.size(); ++i) {
        xx[i] = lx.data[i] * lx.data[i];
        yy[i] = ly.data[i] * ly.data[i];
        xy[i] = lx.data[i] * ly.data[i];
    }
    const auto mx = filter_valid(lx.data, h, w, g), my = filter_valid(ly.data, h, w, g);
    const auto sxx = filter_valid(xx, h, w, g), syy = filter_valid(yy, h, w, g), sxy = filter_valid(xy, h, w, g);
    constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double total = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
        const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cxy = sxy[i] - mx[i] * my[i];
        total += ((2 * mx[i] * my[i] + c1) * (2 * cxy + c2)) /
                 ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    return total / static_cast<double>(mx.size());
}

UiqmComponents uiqm_components(const Image& rgb, const UiqmCoefficients& k) {
    require_rgb(rgb, "uiqm");
    UiqmComponents out;
    if (is_constant(rgb)) return out;
    out.uicm = uicm(rgb);
    out.uism = uism(rgb);
    out.uiconm = uiconm(rgb);
    out.score = k.c1 * out.uicm + k.c2 * out.uism + k.c3 * out.uiconm;
    return out;
}

double uiqm(const Image& rgb, const UiqmCoefficients& k) { return uiqm_components(rgb, k).score; }

UciqeComponents uciqe_components(const Image& rgb, const UciqeCoefficients& k) {
    require_rgb(rgb, "uciqe");
    const Image lab = color::rgb_to_lab(rgb);
    const Image hsv = color::rgb_to_hsv(rgb);
    const std::size_t n = rgb.plane_size();
    std::vector<double> chroma(n), light(lab.plane(0).begin(), lab.plane(0).end());
    double mean_c = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        chroma[i] = std::hypot(lab.plane(1)[i], lab.plane(2)[i]);
        mean_c += chroma[i];
    }
    mean_c /= static_cast<double>(n);
    double var_c = 0.0;
    for (double c : chroma) var_c += (c - mean_c) * (c - mean_c);
    UciqeComponents out;
    out.chroma_std = std::sqrt(var_c / static_cast<double>(n)) / 100.0;
    std::sort(light.begin(), light.end());
    const std::size_t tail = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.01 * static_cast<double>(n))));
    double low = 0.0, high = 0.0;
    for (std::size_t i = 0; i < tail; ++i) {
        low += light[i];
        high += light[n - 1 - i];
    }
    out.luminance_contrast = (high - low) / static_cast<double>(tail) / 100.0;
    double sat = 0.0;
    for (double s : hsv.plane(1)) sat += s;
    out.saturation_mean = sat / static_cast<double>(n);
    out.score = k.c1 * out.chroma_std + k.c2 * out.luminance_contrast + k.c3 * out.saturation_mean;
    return out;
}

double uciqe(const Image& rgb, const UciqeCoefficients& k) { return uciqe_components(rgb, k).score; }

double ciede2000(const color::Lab& p, const color::Lab& q) {
    const double c1 = std::hypot(p.a, p.b), c2 = std::hypot(q.a, q.b);
    const double cbar7 = std::pow((c1 + c2) / 2.0, 7.0);
    const double g = 0.5 * (1.0 - std::sqrt(cbar7 / (cbar7 + std::pow(25.0, 7.0))));
    const double a1 = (1.0 + g) * p.a, a2 = (1.0 + g) * q.a;
    const double cp1 = std::hypot(a1, p.b), cp2 = std::hypot(a2, q.b);
    auto hue = [](double b, double a) {
        if (a == 0.0 && b == 0.0) return 0.0;
        const double h = deg(std::atan2(b, a));
        return h < 0.0 ? h + 360.0 : h;
    };
    const double h1 = hue(p.b, a1), h2 = hue(q.b, a2);

    const double dl = q.L - p.L, dc = cp2 - cp1;
    double dh = 0.0;
    if (cp1 * cp2 != 0.0) {
        dh = h2 - h1;
        if (dh > 180.0) dh -= 360.0;
        else if (dh < -180.0) dh += 360.0;
    }
    const double dH = 2.0 * std::sqrt(cp1 * cp2) * std::sin(rad(dh / 2.0));

    const double lbar = (p.L + q.L) / 2.0, cbar = (cp1 + cp2) / 2.0;
    double hbar = h1 + h2;
    if (cp1 * cp2 != 0.0) {
        if (std::abs(h1 - h2) <= 180.0) hbar = (h1 + h2) / 2.0;
        else if (h1 + h2 < 360.0) hbar = (h1 + h2 + 360.0) / 2.0;
        else hbar = (h1 + h2 - 360.0) / 2.0;
    }
    const double t = 1.0 - 0.17 * std::cos(rad(hbar - 30.0)) + 0.24 * std::cos(rad(2.0 * hbar)) +
                     0.32 * std::cos(rad(3.0 * hbar + 6.0)) - 0.20 * std::cos(rad(4.0 * hbar - 63.0));
    const double dtheta = 30.0 * std::exp(-std::pow((hbar - 275.0) / 25.0, 2.0));
    const double cbar_7 = std::pow(cbar, 7.0);
    const double rc = 2.0 * std::sqrt(cbar_7 / (cbar_7 + std::pow(25.0, 7.0)));
    const double l50 = (lbar - 50.0) * (lbar - 50.0);
    const double sl = 1.0 + 0.015 * l50 / std::sqrt(20.0 + l50);
    const double sc = 1.0 + 0.045 * cbar;
    const double sh = 1.0 + 0.015 * cbar * t;
    const double rt = -std::sin(rad(2.0 * dtheta)) * rc;
    const double tl = dl / sl, tc = dc / sc, th = dH / sh;
    return std::sqrt(tl * tl + tc * tc + th * th + rt * tc * th);
}

double mean_ciede2000(const Image& x, const Image& y) {
    require_rgb(x, "ciede2000");
    require_same_shape(x, y, "ciede2000");
    const Image lx = color::rgb_to_lab(x), ly = color::rgb_to_lab(y);
    double s = 0.0;
    for (std::size_t i = 0; i < x.plane_size(); ++i) {
        s += ciede2000({lx.plane(0)[i], lx.plane(1)[i], lx.plane(2)[i]}, {ly.plane(0)[i], ly.plane(1)[i], ly.plane(2)[i]});
    }
    return s / static_cast<double>(x.plane_size());
}

double colorchecker_score(const Image& rgb, const std::vector<Patch>& layout,
                          const std::vector<color::Lab>& reference_colors) {
    require_rgb(rgb, "colorchecker_score");
    if (layout.empty()) throw UsageError("colorchecker layout has no patches");
    if (layout.size() != reference_colors.size()) {
        throw UsageError("colorchecker layout has " + std::to_string(layout.size()) + " patches but " +
                         std::to_string(reference_colors.size()) + " reference colors");
    }
    double total = 0.0;
    for (std::size_t k = 0; k < layout.size(); ++k) {
        const Patch& p = layout[k];
        if (p.height < 1 || p.width < 1 || p.top < 0 || p.left < 0 || p.top + p.height > rgb.height ||
            p.left + p.width > rgb.width) {
            throw DimensionError("colorchecker patch " + std::to_string(k) + " lies outside the " +
                                 std::to_string(rgb.height) + "x" + std::to_string(rgb.width) + " image");
        }
        double mean[3] = {0, 0, 0};
        for (int c = 0; c < 3; ++c) {
            for (int y = p.top; y < p.top + p.height; ++y)
                for (int x = p.left; x < p.left + p.width; ++x) mean[c] += rgb.at(c, y, x);
            mean[c] /= static_cast<double>(p.height) * p.width;
        }
        total += ciede2000(color::rgb_to_lab(color::Rgb{mean[0], mean[1], mean[2]}), reference_colors[k]);
    }
    return total / static_cast<double>(layout.size());
}

std::string metric_name(Metric m) {
    switch (m) {
        case Metric::Ssim: return "ssim";
        case Metric::Uiqm: return "uiqm";
        case Metric::Uciqe: return "uciqe";
        case Metric::Ciede2000: return "ciede2000";
    }
    return "unknown";
}

Metric parse_metric(const std::string& name) {
    for (Metric m : {Metric::Ssim, Metric::Uiqm, Metric::Uciqe, Metric::Ciede2000}) {
        if (metric_name(m) == name) return m;
    }
    throw UsageError("unknown metric '" + name + "' (expected ssim, uiqm, uciqe or ciede2000)");
}

bool needs_reference(Metric m) { return m == Metric::Ssim || m == Metric::Ciede2000; }

double compute_metric(Metric m, const Image& pred, const Image* ref, const MetricCoefficients& k) {
    if (needs_reference(m) && !ref) throw UsageError(metric_name(m) + " requires a reference image");
    switch (m) {
        case Metric::Ssim: return ssim(pred, *ref);
        case Metric::Uiqm: return uiqm(pred, k.uiqm);
        case Metric::Uciqe: return uciqe(pred, k.uciqe);
        case Metric::Ciede2000: return mean_ciede2000(pred, *ref);
    }
    throw UsageError("unknown metric");
}

double MetricReport::mean(std::size_t metric) const {
    if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (const Row& r : rows) s += r.values.at(metric);
    return s / static_cast<double>(rows.size());
}

double MetricReport::stddev(std::size_t metric) const {
    if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double mu = mean(metric);
    double s = 0.0;
    for (const Row& r : rows) s += (r.values.at(metric) - mu) * (r.values.at(metric) - mu);
    return std::sqrt(s / static_cast<double>(rows.size()));
}

double MetricReport::mean_seconds() const {
    if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (const Row& r : rows) s += r.seconds;
    return s / static_cast<double>(rows.size());
}

void write_report_tsv(std::ostream& out, const MetricReport& report, bool timed) {
    auto num = [](double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6f", v);
        return std::string(buf);
    };
    out << "image";
    for (Metric m : report.metrics) out << '\t' << metric_name(m);
    if (timed) out << "\tseconds";
    out << '\n';
    for (const auto& r : report.rows) {
        out << r.image;
        for (double v : r.values) out << '\t' << num(v);
        if (timed) out << '\t' << num(r.seconds);
        out << '\n';
    }
    if (report.rows.empty()) return;
    out << "mean";
    for (std::size_t k = 0; k < report.metrics.size(); ++k) out << '\t' << num(report.mean(k));
    if (timed) out << '\t' << num(report.mean_seconds());
    out << '\n';
    out << "std";
    for (std::size_t k = 0; k < report.metrics.size(); ++k) out << '\t' << num(report.stddev(k));
    if (timed) {
        const double mu = report.mean_seconds();
        double var = 0.0;
        for (const auto& r : report.rows) var += (r.seconds - mu) * (r.seconds - mu);
        out << '\t' << num(std::sqrt(var / static_cast<double>(report.rows.size())));
    }
    out << '\n';
}

}  // namespace waveuie
