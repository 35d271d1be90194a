#include "waveuie/optim.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "waveuie/errors.hpp"

namespace waveuie {

Parameter::Parameter(std::string param_name, Shape shape)
    : name(std::move(param_name)),
      value(Tensor::zeros(std::move(shape), true)),
      mean_square(static_cast<std::size_t>(value.numel()), 0.0f) {}

void Parameter::assign(std::span<const double> values) {
    auto dst = value.mutable_data();
    if (values.size() != dst.size()) {
        throw DimensionError("parameter " + name + ": assigning " + std::to_string(values.size()) +
                             " values to " + std::to_string(dst.size()) + " elements");
    }
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<float>(values[i]);
}

void rmsprop_step(std::span<Parameter* const> params, const RmsPropOptions& options) {
    for (Parameter* p : params) {
        if (!p->value.has_grad()) throw UsageError("rmsprop_step: parameter " + p->name + " has no gradient");
    }
    for (Parameter* p : params) {
        auto values = p->value.mutable_data();
        auto grad = p->value.grad();
        if (p->mean_square.size() != values.size()) p->mean_square.assign(values.size(), 0.0f);
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double g = grad[i];
            const double s = options.smoothing * p->mean_square[i] + (1.0 - options.smoothing) * g * g;
            p->mean_square[i] = static_cast<float>(s);
            values[i] = static_cast<float>(values[i] - options.lr * g / (std::sqrt(s) + options.eps));
        }
        p->value.zero_grad();
    }
}

void clamp_params(std::span<Parameter* const> params, double lo, double hi) {
    if (lo > hi) throw UsageError("clamp_params: lo > hi");
    // Tightest float32 bounds inside [lo, hi] keep clipped values float-exact.
    float flo = static_cast<float>(lo);
    float fhi = static_cast<float>(hi);
    if (flo < lo) flo = std::nextafter(flo, std::numeric_limits<float>::infinity());
    if (fhi > hi) fhi = std::nextafter(fhi, -std::numeric_limits<float>::infinity());
    if (flo > fhi) flo = fhi;
    for (Parameter* p : params) {
        for (double& v : p->value.mutable_data()) v = std::clamp(v, double{flo}, double{fhi});
    }
}

void zero_grad(std::span<Parameter* const> params) {
    for (Parameter* p : params) p->value.zero_grad();
}

std::int64_t count_elements(std::span<Parameter* const> params) {
    std::int64_t n = 0;
    for (const Parameter* p : params) n += p->numel();
    return n;
}

std::uint64_t hash_values(std::span<Parameter* const> params) {
    std::uint64_t h = 1469598103934665603ull;
    for (const Parameter* p : params) {
        for (double v : p->value.data()) {
            unsigned char bytes[sizeof(double)];
            std::memcpy(bytes, &v, sizeof v);
            for (unsigned char b : bytes) {
                h ^= b;
                h *= 1099511628211ull;
            }
        }
    }
    return h;
}

}  // namespace waveuie
