#include "waveuie/models.hpp"

#include <cmath>
#include <random>
#include <set>

#include "waveuie/colorspace.hpp"
#include "waveuie/errors.hpp"
#include "waveuie/ops.hpp"

namespace waveuie {

ConvLayer::ConvLayer(const std::string& name, std::int64_t in, std::int64_t out, int kernel, int stride_,
                     int padding_, bool transposed_)
    : weight(name + ".weight", transposed_ ? Shape{in, out, kernel, kernel} : Shape{out, in, kernel, kernel}),
      bias(name + ".bias", {out}),
      stride(stride_),
      padding(padding_),
      transposed(transposed_) {}

Tensor ConvLayer::forward(const Tensor& x) const {
    return transposed ? conv_transpose2d(x, weight.value, bias.value, stride, padding)
                      : conv2d(x, weight.value, bias.value, stride, padding);
}

std::int64_t ConvLayer::fan_in() const {
    const auto& s = weight.value.shape();
    const std::int64_t taps = s[2] * s[3];
    if (transposed) return std::max<std::int64_t>(1, s[0] * taps / (stride * stride));
    return s[1] * taps;
}

namespace {

std::vector<Parameter*> flatten(const std::vector<ConvLayer*>& layers) {
    std::vector<Parameter*> out;
    for (ConvLayer* l : layers) {
        out.push_back(&l->weight);
        out.push_back(&l->bias);
    }
    return out;
}

// FNV-1a, stable across standard libraries unlike std::hash.
std::uint32_t name_hash(const std::string& name) {
    std::uint32_t h = 2166136261u;
    for (unsigned char c : name) h = (h ^ c) * 16777619u;
    return h;
}

}  // namespace

StructureNet::StructureNet(const StructureNetConfig& config, bool multicolor)
    : config_(config), multicolor_(multicolor) {
    if (config.levels < 1) throw UsageError("structure net levels must be >= 1");
    if (config.base_channels < 8) throw UsageError("structure net base_channels must be >= 8");
    const std::int64_t in = multicolor ? color::kStackChannels : 3;
    const std::int64_t c0 = config.base_channels;
    enc0_ = ConvLayer("structure.enc0", in, c0, 3, 1, 1);
    for (int l = 1; l <= config.levels; ++l) {
        const std::int64_t prev = c0 << (l - 1), cur = c0 << l;
        const std::string tag = std::to_string(l);
        down_.emplace_back("structure.down" + tag, prev, cur, 3, 2, 1);
        enc_.emplace_back("structure.enc" + tag, cur, cur, 3, 1, 1);
        up_.emplace_back("structure.up" + tag, cur, prev, 2, 2, 0, true);
        fuse_.emplace_back("structure.fuse" + tag, 2 * prev, prev, 3, 1, 1);
    }
    head_ = ConvLayer("structure.head", c0, 3, 1, 1, 0);
}

Tensor StructureNet::forward(const Tensor& x) const {
    if (x.ndim() != 4 || x.dim(1) != 3) {
        throw DimensionError("structure net expects [N,3,h,w], got " + shape_to_string(x.shape()));
    }
    const std::int64_t d = divisor();
    if (x.dim(2) % d != 0 || x.dim(3) % d != 0) {
        const std::int64_t ph = (d - x.dim(2) % d) % d, pw = (d - x.dim(3) % d) % d;
        throw DimensionError("structure net input " + std::to_string(x.dim(2)) + "x" + std::to_string(x.dim(3)) +
                             " is not a multiple of " + std::to_string(d) + "; pad by " + std::to_string(ph) +
                             " rows and " + std::to_string(pw) + " columns");
    }
    const Tensor half = mul_scalar(x, 0.5);
    Tensor h = relu(enc0_.forward(multicolor_ ? color::multi_color_stack(half.detach()) : half));
    std::vector<Tensor> skips{h};
    for (int l = 0; l < config_.levels; ++l) {
        h = relu(down_[l].forward(h));
        h = relu(enc_[l].forward(h));
        if (l + 1 < config_.levels) skips.push_back(h);
    }
    for (int l = config_.levels - 1; l >= 0; --l) {
        h = relu(up_[l].forward(h));
        h = relu(fuse_[l].forward(concat_channels({h, skips[l]})));
    }
    return mul_scalar(sigmoid(head_.forward(h)), 2.0);
}

std::vector<ConvLayer*> StructureNet::layers() {
    std::vector<ConvLayer*> out{&enc0_};
    for (int l = 0; l < config_.levels; ++l) {
        out.push_back(&down_[l]);
        out.push_back(&enc_[l]);
        out.push_back(&up_[l]);
        out.push_back(&fuse_[l]);
    }
    out.push_back(&head_);
    return out;
}

std::vector<Parameter*> StructureNet::parameters() { return flatten(layers()); }

DetailNet::DetailNet(const DetailNetConfig& config) : config_(config) {
    constexpr int kLayers = 10, kWidth = 64;
    for (int i = 0; i < kLayers; ++i) {
        const std::int64_t in = i == 0 ? 3 : kWidth, out = i == kLayers - 1 ? 3 : kWidth;
        layers_.emplace_back("detail.conv" + std::to_string(i), in, out, 3, 1, 1);
    }
}

Tensor DetailNet::forward(const Tensor& x) const { return forward(x, config_.residual); }

Tensor DetailNet::forward(const Tensor& x, bool residual) const {
    Tensor h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        h = layers_[i].forward(h);
        if (i + 1 < layers_.size()) h = relu(h);
    }
    return residual ? x + h : h;
}

std::vector<ConvLayer*> DetailNet::layers() {
    std::vector<ConvLayer*> out;
    for (auto& l : layers_) out.push_back(&l);
    return out;
}

std::vector<Parameter*> DetailNet::parameters() { return flatten(layers()); }

Critic::Critic(const CriticConfig& config) : config_(config) {
    if (config.layers < 1) throw UsageError("critic layers must be >= 1");
    if (!(config.clip > 0.0)) throw UsageError("critic clip must be positive");
    std::int64_t in = 3;
    for (int i = 0; i < config.layers; ++i) {
        const std::int64_t out = std::int64_t{config.base_channels} << i;
        layers_.emplace_back("critic.conv" + std::to_string(i), in, out, 4, 2, 1);
        in = out;
    }
    project_ = ConvLayer("critic.project", in, 1, 1, 1, 0);
}

Tensor Critic::forward(const Tensor& x) const {
    if (x.ndim() != 4 || x.dim(2) < min_size() || x.dim(3) < min_size()) {
        throw DimensionError("critic needs [N,3,H,W] with H, W >= " + std::to_string(min_size()) + ", got " +
                             shape_to_string(x.shape()));
    }
    Tensor h = x;
    for (const auto& l : layers_) h = leaky_relu(l.forward(h), 0.2);
    return mean_per_sample(project_.forward(h));
}

std::vector<ConvLayer*> Critic::layers() {
    std::vector<ConvLayer*> out;
    for (auto& l : layers_) out.push_back(&l);
    out.push_back(&project_);
    return out;
}

std::vector<Parameter*> Critic::parameters() { return flatten(layers()); }

ModelBundle::ModelBundle(const ModelConfig& config_, std::uint64_t seed_)
    : config(config_),
      seed(seed_),
      structure(config_.structure, config_.switches.use_multicolor),
      detail(config_.detail),
      critic(config_.critic) {
    init_params(*this, seed_);
}

std::vector<Parameter*> ModelBundle::detail_parameters() {
    if (!config.switches.use_detail_net) return {};
    return detail.parameters();
}

std::vector<Parameter*> ModelBundle::generator_parameters() {
    auto out = structure.parameters();
    for (Parameter* p : detail_parameters()) out.push_back(p);
    return out;
}

std::vector<Parameter*> ModelBundle::all_parameters() {
    auto out = structure.parameters();
    for (Parameter* p : detail.parameters()) out.push_back(p);
    for (Parameter* p : critic.parameters()) out.push_back(p);
    return out;
}

std::int64_t ModelBundle::input_divisor() const {
    return config.switches.use_dwt ? 2 * structure.divisor() : structure.divisor();
}

Tensor ModelBundle::structure_forward(const Tensor& x) const {
    return structure_override ? structure_override(x) : structure.forward(x);
}

Generated ModelBundle::generate(const Tensor& batch) const {
    Generated g;
    const bool use_detail = config.switches.use_detail_net;
    if (!config.switches.use_dwt) {
        g.structure = structure_forward(mul_scalar(batch, 2.0));
        g.image = mul_scalar(g.structure, 0.5);
        if (use_detail) {
            g.detail_full = detail.forward(batch, false);
            g.image = g.image + g.detail_full;
        }
        return g;
    }
    const TensorBands bands = dwt2(batch);
    g.structure = structure_forward(bands.ll);
    if (use_detail) {
        const std::int64_t n = batch.dim(0);
        const Tensor d = detail.forward(concat_batch({bands.lh, bands.hl, bands.hh}));
        g.detail_lh = slice_batch(d, 0, n);
        g.detail_hl = slice_batch(d, n, 2 * n);
        g.detail_hh = slice_batch(d, 2 * n, 3 * n);
    } else {
        g.detail_lh = bands.lh;
        g.detail_hl = bands.hl;
        g.detail_hh = bands.hh;
    }
    g.image = idwt2({g.structure, g.detail_lh, g.detail_hl, g.detail_hh, bands.parent_height, bands.parent_width});
    return g;
}

void init_params(ModelBundle& bundle, std::uint64_t seed) {
    bundle.seed = seed;
    std::set<std::string> seen;
    auto init_layer = [&](ConvLayer& layer, double scale) {
        for (const Parameter* p : {&layer.weight, &layer.bias}) {
            if (!seen.insert(p->name).second) throw UsageError("duplicate parameter name " + p->name);
        }
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          name_hash(layer.weight.name)};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(layer.fan_in())));
        std::vector<double> w(static_cast<std::size_t>(layer.weight.numel()));
        for (double& v : w) v = scale * normal(rng);
        layer.weight.assign(w);
        layer.bias.assign(std::vector<double>(static_cast<std::size_t>(layer.bias.numel()), 0.0));
        std::fill(layer.weight.mean_square.begin(), layer.weight.mean_square.end(), 0.0f);
        std::fill(layer.bias.mean_square.begin(), layer.bias.mean_square.end(), 0.0f);
    };
    for (ConvLayer* l : bundle.structure.layers()) init_layer(*l, 1.0);
    const auto detail = bundle.detail.layers();
    for (ConvLayer* l : detail) init_layer(*l, l == detail.back() ? bundle.detail.config().final_init_scale : 1.0);
    for (ConvLayer* l : bundle.critic.layers()) init_layer(*l, 1.0);
}

Image enhance(const ModelBundle& bundle, const Image& image) {
    if (image.channels != 3) throw DimensionError("enhance expects an RGB image");
    if (image.empty()) throw DomainError("enhance: empty image");
    const std::int64_t d = bundle.input_divisor();
    const std::int64_t ph = (d - image.height % d) % d, pw = (d - image.width % d) % d;
    NoGradGuard guard;
    FastInferenceGuard fast;
    const Tensor padded = pad_reflect(to_tensor(image), ph, pw);
    const Generated g = bundle.generate(padded);
    return clamp01(to_image(crop(g.image, image.height, image.width)));
}

}  // namespace waveuie
