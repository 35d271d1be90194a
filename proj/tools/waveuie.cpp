#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "waveuie/checkpoint.hpp"
#include "waveuie/config.hpp"
#include "waveuie/errors.hpp"
#include "waveuie/io.hpp"
#include "waveuie/metrics.hpp"
#include "waveuie/synth.hpp"
#include "waveuie/trainer.hpp"
#include "waveuie/wavelet.hpp"

namespace fs = std::filesystem;
using namespace waveuie;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

constexpr const char* kThreadsVar = "WAVEUIE_THREADS";

int thread_count() {
    const char* v = std::getenv(kThreadsVar);
    if (!v || !*v) return 1;
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (*end != '\0' || n < 1 || n > 1024) {
        throw UsageError(std::string(kThreadsVar) + " must be an integer in [1, 1024], got '" + v + "'");
    }
    return static_cast<int>(n);
}

void refuse_existing(const fs::path& p, bool force) {
    if (!force && fs::exists(p)) throw UsageError("refusing to overwrite " + p.string() + " (use --force)");
}

bool is_png(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png";
}

/// Sorted PNG files of a directory, keyed by file name.
std::map<std::string, fs::path> png_files(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    std::map<std::string, fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && is_png(e.path())) out[e.path().filename().string()] = e.path();
    }
    return out;
}

template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn fn) {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    auto worker = [&] {
        for (std::size_t i; (i = next++) < n;) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const std::size_t t = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    for (std::size_t k = 1; k < t; ++k) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

RunConfig config_or_default(const std::string& path) { return path.empty() ? RunConfig{} : load_config(path); }

// synth

struct SynthArgs {
    std::string input, output, config;
    std::uint64_t seed = 0;
    bool force = false;
};

int run_synth(const SynthArgs& a) {
    const RunConfig config = config_or_default(a.config);
    const DatasetReport r =
        generate_dataset(a.input, config.synth, a.output, a.seed, a.force, thread_count());
    for (const auto& s : r.skipped) std::cerr << "skipped " << s.stem << ": " << s.reason << '\n';
    std::cerr << "wrote " << r.manifest.rows.size() << " variants to " << a.output << '\n';
    if (r.manifest.rows.empty()) {
        std::cerr << "error: no usable RGB-D pairs in " << a.input << '\n';
        return kData;
    }
    return kOk;
}

// train

struct TrainArgs {
    std::string data, out, config, resume;
    std::optional<std::uint64_t> seed;
    int keep = 3;
    bool force = false;
};

int run_train(const TrainArgs& a) {
    RunConfig config = config_or_default(a.config);
    if (a.seed) config.train.seed = *a.seed;
    validate(config.train);
    const fs::path data = a.data;
    const Manifest manifest = load_manifest(fs::is_directory(data) ? data / "manifest.tsv" : data);
    TrainOptions o;
    o.checkpoint_dir = a.out;
    o.overwrite = a.force;
    o.keep_checkpoints = a.keep;
    if (!a.resume.empty()) {
        o.resume = a.resume;
        if (!a.config.empty() || a.seed) std::cerr << "note: --resume uses the configuration stored in the checkpoint\n";
    }
    o.hooks.on_epoch = [](const EpochRecord& r) {
        char line[200];
        std::snprintf(line, sizeof line, "epoch %d (phase %d) L_S=%.6f L_D=%.6f L_adv=%.6f critic=%.6f\n", r.epoch,
                      r.phase, r.losses.l_s, r.losses.l_d, r.losses.l_adv, r.losses.critic);
        std::cerr << line;
    };
    const TrainResult r = train(manifest, config, o);
    if (o.resume == std::nullopt) {
        std::ofstream(fs::path(a.out) / "config.json") << to_text(config);
    }
    std::cerr << "finished at epoch " << r.final.state.epoch << "; final checkpoint "
              << (fs::path(a.out) / "final.ckpt").string() << '\n';
    return kOk;
}

// enhance

struct EnhanceArgs {
    std::string model, input, output;
    bool force = false;
};

int run_enhance(const EnhanceArgs& a) {
    const ModelBundle bundle = build_bundle(load_checkpoint(a.model));
    const fs::path in = a.input, out = a.output;
    if (!fs::exists(in)) throw IoError("input not found: " + in.string());
    std::vector<std::pair<fs::path, fs::path>> jobs;
    if (fs::is_directory(in)) {
        const auto files = png_files(in);
        if (files.empty()) throw IoError("no PNG images in " + in.string());
        fs::create_directories(out);
        for (const auto& [name, path] : files) jobs.emplace_back(path, out / name);
    } else {
        jobs.emplace_back(in, fs::is_directory(out) ? out / in.filename() : out);
    }
    for (const auto& [src, dst] : jobs) refuse_existing(dst, a.force);
    parallel_for(jobs.size(), thread_count(),
                 [&](std::size_t i) { save_image(jobs[i].second, enhance(bundle, load_image(jobs[i].first))); });
    std::cerr << "enhanced " << jobs.size() << " image(s)\n";
    return kOk;
}

// decompose

struct DecomposeArgs {
    std::string input, output;
    bool force = false;
};

int run_decompose(const DecomposeArgs& a) {
    const SubBands b = dwt2(load_image(a.input));
    const fs::path out = a.output;
    fs::create_directories(out);
    const std::vector<std::string> names = {"ll.png", "lh.png", "hl.png", "hh.png"};
    for (const auto& n : names) refuse_existing(out / n, a.force);
    // LL carries twice the image scale.
    Image ll = b.ll;
    for (double& v : ll.data) v *= 0.5;
    save_image(out / "ll.png", ll);
    save_image(out / "lh.png", visualize_band(b.lh));
    save_image(out / "hl.png", visualize_band(b.hl));
    save_image(out / "hh.png", visualize_band(b.hh));
    return kOk;
}

// eval

struct EvalArgs {
    std::vector<std::string> metrics;
    std::string pred, ref, out, model, config, checker;
    bool force = false;
};

std::vector<Patch> read_checker(const fs::path& path, std::vector<color::Lab>& colors) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    std::vector<Patch> layout;
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty() || line[0] == '#' || line.rfind("top", 0) == 0) continue;
        std::istringstream s(line);
        Patch p;
        color::Lab lab;
        if (!(s >> p.top >> p.left >> p.height >> p.width >> lab.L >> lab.a >> lab.b)) {
            throw IoError(path.string() + ":" + std::to_string(n) + ": expected top left height width L a b");
        }
        layout.push_back(p);
        colors.push_back(lab);
    }
    return layout;
}

int run_eval(const EvalArgs& a) {
    const RunConfig config = config_or_default(a.config);
    std::vector<Metric> metrics;
    for (const auto& m : a.metrics) metrics.push_back(parse_metric(m));
    if (metrics.empty() && a.checker.empty()) throw UsageError("eval needs at least one --metric or --checker");
    for (Metric m : metrics) {
        if (needs_reference(m) && a.ref.empty()) throw UsageError("--metric " + metric_name(m) + " requires --ref");
    }
    if (!a.out.empty()) refuse_existing(a.out, a.force);

    const auto preds = png_files(a.pred);
    std::vector<EvalItem> items;
    if (!a.ref.empty()) {
        const auto refs = png_files(a.ref);
        std::vector<std::string> unmatched;
        for (const auto& [name, p] : preds)
            if (!refs.count(name)) unmatched.push_back(name + " (no reference)");
        for (const auto& [name, p] : refs)
            if (!preds.count(name)) unmatched.push_back(name + " (no prediction)");
        if (!unmatched.empty()) {
            std::string msg = "prediction and reference sets differ:";
            for (const auto& u : unmatched) msg += "\n  " + u;
            throw IoError(msg);
        }
        for (const auto& [name, p] : preds) items.push_back({name, p, refs.at(name)});
    } else {
        for (const auto& [name, p] : preds) items.push_back({name, p, std::nullopt});
    }

    std::optional<ModelBundle> bundle;
    if (!a.model.empty()) bundle.emplace(build_bundle(load_checkpoint(a.model)));

    std::ostringstream text;
    if (!metrics.empty()) {
        const MetricReport r = evaluate(bundle ? &*bundle : nullptr, items, metrics, config.metrics);
        for (const auto& s : r.skipped) std::cerr << "skipped unreadable image " << s << '\n';
        write_report_tsv(text, r, bundle.has_value());
        if (bundle && !r.rows.empty()) {
            std::fprintf(stderr, "mean enhance time %.4f s per image\n", r.mean_seconds());
        }
    }
    if (!a.checker.empty()) {
        std::vector<color::Lab> colors;
        const auto layout = read_checker(a.checker, colors);
        text << "image\tcolorchecker_de2000\n";
        for (const auto& item : items) {
            Image im = load_image(item.input);
            if (bundle) im = enhance(*bundle, im);
            char v[64];
            std::snprintf(v, sizeof v, "%.6f", colorchecker_score(im, layout, colors));
            text << item.name << '\t' << v << '\n';
        }
    }
    if (a.out.empty()) {
        std::cout << text.str();
    } else {
        std::ofstream f(a.out, std::ios::trunc);
        f << text.str();
        if (!f) throw IoError("cannot write " + a.out);
    }
    return kOk;
}

// config init

struct ConfigArgs {
    std::string out;
    bool force = false;
};

int run_config_init(const ConfigArgs& a) {
    const std::string text = to_text(RunConfig{});
    if (a.out.empty()) {
        std::cout << text;
        return kOk;
    }
    refuse_existing(a.out, a.force);
    std::ofstream f(a.out, std::ios::trunc);
    f << text;
    if (!f) throw IoError("cannot write " + a.out);
    return kOk;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"Wavelet-based dual-stream underwater image enhancement"};
    app.require_subcommand(1);
    app.footer(std::string("Environment: ") + kThreadsVar + " sets the worker count for per-file work (default 1).");

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "Synthesize degraded training pairs from RGB-D images");
    synth->add_option("-i,--input", sa.input, "Directory of <stem>.png + <stem>_depth.png")->required();
    synth->add_option("-o,--output", sa.output, "Output dataset directory")->required();
    synth->add_option("--seed", sa.seed, "Seed for depth jitter");
    synth->add_option("-c,--config", sa.config, "Run config (synth section is used)");
    synth->add_flag("-f,--force", sa.force, "Overwrite existing outputs");

    TrainArgs ta;
    auto* trn = app.add_subcommand("train", "Train the enhancement model");
    trn->add_option("-d,--data", ta.data, "Dataset directory or manifest.tsv")->required();
    trn->add_option("-o,--out", ta.out, "Run directory for checkpoints and losses.tsv")->required();
    trn->add_option("-c,--config", ta.config, "Run config");
    trn->add_option("--resume", ta.resume, "Continue from a checkpoint");
    trn->add_option("--seed", ta.seed, "Override train.seed");
    trn->add_option("--keep", ta.keep, "Epoch checkpoints to keep (0 keeps all)")->check(CLI::NonNegativeNumber);
    trn->add_flag("-f,--force", ta.force, "Replace an existing run");

    EnhanceArgs ea;
    auto* enh = app.add_subcommand("enhance", "Enhance an image or a directory of images");
    enh->add_option("-m,--model", ea.model, "Checkpoint")->required();
    enh->add_option("-i,--input", ea.input, "PNG file or directory")->required();
    enh->add_option("-o,--output", ea.output, "Output file or directory")->required();
    enh->add_flag("-f,--force", ea.force, "Overwrite existing outputs");

    DecomposeArgs da;
    auto* dec = app.add_subcommand("decompose", "Write the four Haar sub-bands of an image");
    dec->add_option("-i,--input", da.input, "PNG image")->required();
    dec->add_option("-o,--output", da.output, "Output directory")->required();
    dec->add_flag("-f,--force", da.force, "Overwrite existing outputs");

    EvalArgs va;
    auto* ev = app.add_subcommand("eval", "Score images and write a TSV report");
    ev->add_option("--metric", va.metrics, "ssim, uiqm, uciqe or ciede2000 (repeatable)");
    ev->add_option("--pred", va.pred, "Directory of images to score")->required();
    ev->add_option("--ref", va.ref, "Directory of reference images with matching names");
    ev->add_option("--out", va.out, "Report file (default stdout)");
    ev->add_option("-m,--model", va.model, "Enhance each image with this checkpoint first and time it");
    ev->add_option("-c,--config", va.config, "Run config (metrics section is used)");
    ev->add_option("--checker", va.checker, "ColorChecker layout TSV: top left height width L a b");
    ev->add_flag("-f,--force", va.force, "Overwrite an existing report");

    ConfigArgs ca;
    auto* cfg = app.add_subcommand("config", "Configuration helpers");
    cfg->require_subcommand(1);
    auto* init = cfg->add_subcommand("init", "Print or write the full default config");
    init->add_option("-o,--out", ca.out, "Output file (default stdout)");
    init->add_flag("-f,--force", ca.force, "Overwrite an existing file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }
    thread_count();
    if (*synth) return run_synth(sa);
    if (*trn) return run_train(ta);
    if (*enh) return run_enhance(ea);
    if (*dec) return run_decompose(da);
    if (*ev) return run_eval(va);
    if (*init) return run_config_init(ca);
    return kUsage;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const IoError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const DimensionError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const DomainError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return kInternal;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kInternal;
    }
}
