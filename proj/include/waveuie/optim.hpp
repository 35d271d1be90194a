#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "waveuie/tensor.hpp"

namespace waveuie {

/// A trainable leaf tensor plus its RMSProp accumulator.
///
/// Values and accumulator entries are kept exactly representable as 32-bit
/// floats (they are rounded after every mutation), so checkpoints holding
/// float32 blobs reproduce them bit for bit.
struct Parameter {
    std::string name;
    Tensor value;
    std::vector<float> mean_square;

    Parameter() = default;
    Parameter(std::string name, Shape shape);

    std::int64_t numel() const { return value.numel(); }
    /// Overwrites the values (rounded to float32).
    void assign(std::span<const double> values);
};

struct RmsPropOptions {
    double lr = 1e-3;
    double smoothing = 0.9;
    double eps = 1e-8;
};

/// s <- smoothing*s + (1-smoothing)*g^2;  p <- p - lr*g/(sqrt(s)+eps);
/// then clears the gradients. Throws UsageError if a parameter has no grad.
void rmsprop_step(std::span<Parameter* const> params, const RmsPropOptions& options);

/// Clips every element into [lo, hi]. Throws UsageError if lo > hi.
void clamp_params(std::span<Parameter* const> params, double lo, double hi);

void zero_grad(std::span<Parameter* const> params);

/// Total element count.
std::int64_t count_elements(std::span<Parameter* const> params);

/// FNV-1a over the raw value bytes; used to assert update isolation.
std::uint64_t hash_values(std::span<Parameter* const> params);

}  // namespace waveuie
