#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "waveuie/image.hpp"
#include "waveuie/optim.hpp"
#include "waveuie/tensor.hpp"
#include "waveuie/wavelet.hpp"

namespace waveuie {

struct StructureNetConfig {
    int levels = 3;
    int base_channels = 32;
};

struct DetailNetConfig {
    // f_D(x) = x + net(x) when set; net(x) alone otherwise.
    bool residual = true;
    // Multiplier on the He-initialized weights of the final layer.
    double final_init_scale = 1.0;
};

struct CriticConfig {
    int layers = 4;
    int base_channels = 32;
    double clip = 0.01;
};

/// Ablation switches.
struct PipelineSwitches {
    bool use_dwt = true;
    bool use_detail_net = true;
    bool use_multicolor = true;
    bool use_gan = true;
};

struct ModelConfig {
    StructureNetConfig structure;
    DetailNetConfig detail;
    CriticConfig critic;
    PipelineSwitches switches;
};

/// One convolution layer with its trainable weight and bias.
struct ConvLayer {
    Parameter weight;
    Parameter bias;
    int stride = 1;
    int padding = 0;
    bool transposed = false;

    ConvLayer() = default;
    ConvLayer(const std::string& name, std::int64_t in, std::int64_t out, int kernel, int stride, int padding,
              bool transposed = false);
    Tensor forward(const Tensor& x) const;
    std::int64_t fan_in() const;
};

/// U-net f_S over the (optionally color-stacked) structure image.
class StructureNet {
public:
    StructureNet(const StructureNetConfig& config, bool multicolor);
    /// x: [N,3,h,w] in [0,2] -> [N,3,h,w] in [0,2]. h, w must be multiples
    /// of 2^levels (DimensionError otherwise).
    Tensor forward(const Tensor& x) const;
    std::vector<ConvLayer*> layers();
    std::vector<Parameter*> parameters();
    std::int64_t divisor() const { return std::int64_t{1} << config_.levels; }

private:
    StructureNetConfig config_;
    bool multicolor_;
    ConvLayer enc0_;
    std::vector<ConvLayer> down_, enc_, up_, fuse_;
    ConvLayer head_;
};

/// f_D: ten 3x3 convolutions, 64 wide, ReLU on the first nine.
class DetailNet {
public:
    explicit DetailNet(const DetailNetConfig& config);
    /// Applies the same weights to every sample of x: [N,3,h,w].
    Tensor forward(const Tensor& x) const;
    Tensor forward(const Tensor& x, bool residual) const;
    std::vector<ConvLayer*> layers();
    std::vector<Parameter*> parameters();
    ConvLayer& final_layer() { return layers_.back(); }
    const DetailNetConfig& config() const { return config_; }
    void set_residual(bool residual) { config_.residual = residual; }

private:
    DetailNetConfig config_;
    std::vector<ConvLayer> layers_;
};

/// WGAN critic: strided 4x4 convolutions with leaky ReLU, a 1x1 projection
/// to one channel and a global average. [N,3,H,W] -> [N].
class Critic {
public:
    explicit Critic(const CriticConfig& config);
    Tensor forward(const Tensor& x) const;
    std::vector<ConvLayer*> layers();
    std::vector<Parameter*> parameters();
    std::int64_t min_size() const { return std::int64_t{1} << config_.layers; }
    const CriticConfig& config() const { return config_; }

private:
    CriticConfig config_;
    std::vector<ConvLayer> layers_;
    ConvLayer project_;
};

/// Differentiable pipeline output for one batch.
struct Generated {
    Tensor structure;                   // f_S output: LL estimate, or full image without DWT
    Tensor detail_lh, detail_hl, detail_hh;  // f_D outputs (pass-through bands when f_D is off)
    Tensor detail_full;                 // without DWT: the full-resolution detail residual, if any
    Tensor image;                       // reconstructed image, unclamped
};

struct ModelBundle {
    ModelConfig config;
    std::uint64_t seed = 0;
    StructureNet structure;
    DetailNet detail;
    Critic critic;
    // Test hook replacing f_S.
    std::function<Tensor(const Tensor&)> structure_override;

    explicit ModelBundle(const ModelConfig& config, std::uint64_t seed = 0);
    // Copies would share parameter storage.
    ModelBundle(const ModelBundle&) = delete;
    ModelBundle& operator=(const ModelBundle&) = delete;
    ModelBundle(ModelBundle&&) = default;
    ModelBundle& operator=(ModelBundle&&) = default;

    /// f_S + f_D parameters in a fixed order.
    std::vector<Parameter*> generator_parameters();
    std::vector<Parameter*> structure_parameters() { return structure.parameters(); }
    std::vector<Parameter*> detail_parameters();
    std::vector<Parameter*> critic_parameters() { return critic.parameters(); }
    /// Every parameter, names unique.
    std::vector<Parameter*> all_parameters();

    /// Spatial multiple the pipeline input must have.
    std::int64_t input_divisor() const;

    Tensor structure_forward(const Tensor& x) const;
    Generated generate(const Tensor& batch) const;
};

/// He-normal weights (std sqrt(2/fan_in)), zero biases. Each parameter
/// draws from a stream seeded by (seed, name).
void init_params(ModelBundle& bundle, std::uint64_t seed);

/// Full enhancement f(I): pads to the pipeline divisor, runs the networks,
/// crops back and clamps to [0, 1].
Image enhance(const ModelBundle& bundle, const Image& image);

}  // namespace waveuie
