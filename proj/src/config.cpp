#include "waveuie/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "waveuie/errors.hpp"

namespace waveuie {

using nlohmann::json;

namespace {

// Walks one JSON object, remembering which keys were consumed so the rest
// can be reported as unknown.
class Section {
public:
    Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) throw UsageError("config key '" + display() + "' must be an object");
    }
    // Rejects keys nobody asked for.
    void finish() const {
        for (const auto& [key, value] : node_.items()) {
            if (!seen_.count(key)) throw UsageError("unknown config key '" + qualify(key) + "'");
        }
    }

    template <typename T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        if (!node_.contains(key)) return;
        const json& v = node_.at(key);
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw UsageError("");
            } else if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_integer()) throw UsageError("");
                if constexpr (std::is_unsigned_v<T>) {
                    if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) throw UsageError("");
                }
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!v.is_number()) throw UsageError("");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw UsageError("");
            }
            out = v.get<T>();
        } catch (const std::exception&) {
            throw UsageError("config key '" + qualify(key) + "' has the wrong type");
        }
    }

    template <std::size_t N>
    void read_array(const char* key, std::array<double, N>& out) {
        seen_.insert(key);
        if (!node_.contains(key)) return;
        const json& v = node_.at(key);
        if (!v.is_array() || v.size() != N) {
            throw UsageError("config key '" + qualify(key) + "' must be an array of " + std::to_string(N) + " numbers");
        }
        for (std::size_t i = 0; i < N; ++i) {
            if (!v[i].is_number()) throw UsageError("config key '" + qualify(key) + "' must hold numbers");
            out[i] = v[i].get<double>();
        }
    }

    bool has(const char* key) {
        seen_.insert(key);
        return node_.contains(key);
    }
    const json& at(const char* key) const { return node_.at(key); }
    std::string qualify(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    std::string display() const { return path_.empty() ? "<root>" : path_; }
    const json& node_;
    std::string path_;
    std::set<std::string> seen_;
};

const char* schedule_name(CriticSchedule s) { return s == CriticSchedule::PerBatch ? "per_batch" : "per_epoch"; }

json to_json(const RunConfig& c) {
    const auto& m = c.model;
    const auto& t = c.train;
    json water = json::array();
    for (const auto& w : c.synth.water_types) {
        water.push_back({{"name", w.name}, {"beta", w.beta}, {"background", w.background}});
    }
    return {
        {"version", kConfigVersion},
        {"model",
         {{"structure", {{"levels", m.structure.levels}, {"base_channels", m.structure.base_channels}}},
          {"detail", {{"residual", m.detail.residual}, {"final_init_scale", m.detail.final_init_scale}}},
          {"critic", {{"layers", m.critic.layers}, {"base_channels", m.critic.base_channels}, {"clip", m.critic.clip}}},
          {"switches",
           {{"use_dwt", m.switches.use_dwt},
            {"use_detail_net", m.switches.use_detail_net},
            {"use_multicolor", m.switches.use_multicolor},
            {"use_gan", m.switches.use_gan}}}}},
        {"train",
         {{"batch_size", t.batch_size},
          {"lr_structure", t.lr_structure},
          {"lr_detail", t.lr_detail},
          {"lr_critic", t.lr_critic},
          {"loss_weights",
           {{"lambda1", t.weights.lambda1},
            {"lambda2", t.weights.lambda2},
            {"lambda3", t.weights.lambda3},
            {"alpha", t.weights.alpha}}},
          {"critic_steps_per_gen", t.critic_steps_per_gen},
          {"critic_schedule", schedule_name(t.critic_schedule)},
          {"phase1_epochs", t.phase1_epochs},
          {"phase2_epochs", t.phase2_epochs},
          {"crop_size", t.crop_size},
          {"seed", t.seed},
          {"rmsprop", {{"smoothing", t.rmsprop_smoothing}, {"eps", t.rmsprop_eps}}}}},
        {"synth",
         {{"depth_scale", c.synth.depth_scale},
          {"depth_jitter", c.synth.depth_jitter},
          {"light_levels", c.synth.light_levels},
          {"water_types", water}}},
        {"metrics",
         {{"uiqm", {{"c1", c.metrics.uiqm.c1}, {"c2", c.metrics.uiqm.c2}, {"c3", c.metrics.uiqm.c3}}},
          {"uciqe", {{"c1", c.metrics.uciqe.c1}, {"c2", c.metrics.uciqe.c2}, {"c3", c.metrics.uciqe.c3}}}}},
    };
}

void read_model(Section& s, ModelConfig& m) {
    if (s.has("structure")) {
        Section st(s.at("structure"), s.qualify("structure"));
        st.read("levels", m.structure.levels);
        st.read("base_channels", m.structure.base_channels);
        st.finish();
    }
    if (s.has("detail")) {
        Section d(s.at("detail"), s.qualify("detail"));
        d.read("residual", m.detail.residual);
        d.read("final_init_scale", m.detail.final_init_scale);
        d.finish();
    }
    if (s.has("critic")) {
        Section c(s.at("critic"), s.qualify("critic"));
        c.read("layers", m.critic.layers);
        c.read("base_channels", m.critic.base_channels);
        c.read("clip", m.critic.clip);
        c.finish();
    }
    if (s.has("switches")) {
        Section w(s.at("switches"), s.qualify("switches"));
        w.read("use_dwt", m.switches.use_dwt);
        w.read("use_detail_net", m.switches.use_detail_net);
        w.read("use_multicolor", m.switches.use_multicolor);
        w.read("use_gan", m.switches.use_gan);
        w.finish();
    }
}

void read_train(Section& s, TrainConfig& t) {
    s.read("batch_size", t.batch_size);
    s.read("lr_structure", t.lr_structure);
    s.read("lr_detail", t.lr_detail);
    s.read("lr_critic", t.lr_critic);
    if (s.has("loss_weights")) {
        Section w(s.at("loss_weights"), s.qualify("loss_weights"));
        w.read("lambda1", t.weights.lambda1);
        w.read("lambda2", t.weights.lambda2);
        w.read("lambda3", t.weights.lambda3);
        w.read("alpha", t.weights.alpha);
        w.finish();
    }
    s.read("critic_steps_per_gen", t.critic_steps_per_gen);
    std::string schedule = schedule_name(t.critic_schedule);
    s.read("critic_schedule", schedule);
    if (schedule == "per_batch") {
        t.critic_schedule = CriticSchedule::PerBatch;
    } else if (schedule == "per_epoch") {
        t.critic_schedule = CriticSchedule::PerEpoch;
    } else {
        throw UsageError("config key '" + s.qualify("critic_schedule") + "' must be per_batch or per_epoch");
    }
    s.read("phase1_epochs", t.phase1_epochs);
    s.read("phase2_epochs", t.phase2_epochs);
    s.read("crop_size", t.crop_size);
    s.read("seed", t.seed);
    if (s.has("rmsprop")) {
        Section r(s.at("rmsprop"), s.qualify("rmsprop"));
        r.read("smoothing", t.rmsprop_smoothing);
        r.read("eps", t.rmsprop_eps);
        r.finish();
    }
}

void read_synth(Section& s, SynthSpec& spec) {
    s.read("depth_scale", spec.depth_scale);
    s.read("depth_jitter", spec.depth_jitter);
    if (s.has("light_levels")) {
        const json& v = s.at("light_levels");
        if (!v.is_array()) throw UsageError("config key 'synth.light_levels' must be an array");
        spec.light_levels.clear();
        for (const json& x : v) {
            if (!x.is_number()) throw UsageError("config key 'synth.light_levels' must hold numbers");
            spec.light_levels.push_back(x.get<double>());
        }
    }
    if (s.has("water_types")) {
        const json& v = s.at("water_types");
        if (!v.is_array()) throw UsageError("config key 'synth.water_types' must be an array");
        spec.water_types.clear();
        for (std::size_t i = 0; i < v.size(); ++i) {
            Section w(v[i], "synth.water_types[" + std::to_string(i) + "]");
            WaterType t;
            w.read("name", t.name);
            w.read_array("beta", t.beta);
            w.read_array("background", t.background);
            w.finish();
            if (t.name.empty()) throw UsageError("config key '" + w.qualify("name") + "' is required");
            spec.water_types.push_back(t);
        }
    }
}

void read_metrics(Section& s, MetricCoefficients& m) {
    if (s.has("uiqm")) {
        Section u(s.at("uiqm"), s.qualify("uiqm"));
        u.read("c1", m.uiqm.c1);
        u.read("c2", m.uiqm.c2);
        u.read("c3", m.uiqm.c3);
        u.finish();
    }
    if (s.has("uciqe")) {
        Section u(s.at("uciqe"), s.qualify("uciqe"));
        u.read("c1", m.uciqe.c1);
        u.read("c2", m.uciqe.c2);
        u.read("c3", m.uciqe.c3);
        u.finish();
    }
}

}  // namespace

void validate(const TrainConfig& c) {
    auto need = [](bool ok, const std::string& what) {
        if (!ok) throw UsageError("invalid train config: " + what);
    };
    need(c.batch_size >= 1, "batch_size must be >= 1");
    need(c.lr_structure > 0.0, "lr_structure must be positive");
    need(c.lr_detail > 0.0, "lr_detail must be positive");
    need(c.lr_critic > 0.0, "lr_critic must be positive");
    need(c.weights.alpha >= 0.0 && c.weights.alpha <= 1.0, "loss_weights.alpha must lie in [0, 1]");
    need(c.weights.lambda1 >= 0.0 && c.weights.lambda2 >= 0.0 && c.weights.lambda3 >= 0.0,
         "loss weights must be non-negative");
    need(c.critic_steps_per_gen >= 1, "critic_steps_per_gen must be >= 1");
    need(c.phase1_epochs >= 0 && c.phase2_epochs >= 0, "epoch counts must be non-negative");
    need(c.crop_size >= 1, "crop_size must be >= 1");
    need(c.rmsprop_smoothing >= 0.0 && c.rmsprop_smoothing < 1.0, "rmsprop.smoothing must lie in [0, 1)");
    need(c.rmsprop_eps > 0.0, "rmsprop.eps must be positive");
}

std::string to_text(const RunConfig& config) { return to_json(config).dump(2) + "\n"; }

RunConfig parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw UsageError(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig c;
    Section s(root, "");
    int version = kConfigVersion;
    s.read("version", version);
    if (version != kConfigVersion) {
        throw UsageError("config version " + std::to_string(version) + " is not supported (expected " +
                         std::to_string(kConfigVersion) + ")");
    }
    if (s.has("model")) {
        Section m(s.at("model"), "model");
        read_model(m, c.model);
        m.finish();
    }
    if (s.has("train")) {
        Section t(s.at("train"), "train");
        read_train(t, c.train);
        t.finish();
    }
    if (s.has("synth")) {
        Section y(s.at("synth"), "synth");
        read_synth(y, c.synth);
        y.finish();
    }
    if (s.has("metrics")) {
        Section m(s.at("metrics"), "metrics");
        read_metrics(m, c.metrics);
        m.finish();
    }
    s.finish();
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read config " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

}  // namespace waveuie
