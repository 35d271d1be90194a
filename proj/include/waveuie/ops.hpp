#pragma once

#include <vector>

#include "waveuie/tensor.hpp"

// Differentiable operations. Elementwise binaries require equal shapes, or
// one operand with a single element (scalar broadcast); anything else is a
// DimensionError.

namespace waveuie {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& x, double c);
Tensor mul_scalar(const Tensor& x, double c);
Tensor neg(const Tensor& x);

Tensor abs(const Tensor& x);
Tensor square(const Tensor& x);
/// Subgradient 0 where the result is 0.
Tensor sqrt(const Tensor& x);
Tensor exp(const Tensor& x);
/// x^p for x > 0; inputs <= 0 map to 0 with zero gradient.
Tensor pow_scalar(const Tensor& x, double p);
/// Gradient passes where lo < x < hi.
Tensor clamp(const Tensor& x, double lo, double hi);
Tensor clamp_min(const Tensor& x, double lo);

Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope);
Tensor sigmoid(const Tensor& x);

Tensor reduce_sum(const Tensor& x);
Tensor reduce_mean(const Tensor& x);
/// Mean over every axis but the first: [N, ...] -> [N].
Tensor mean_per_sample(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
Tensor concat_channels(const std::vector<Tensor>& parts);
Tensor concat_batch(const std::vector<Tensor>& parts);
/// Samples [begin, end) along axis 0.
Tensor slice_batch(const Tensor& x, std::int64_t begin, std::int64_t end);

/// Mirror-pads an NCHW tensor at the bottom and right edges (no edge repeat).
/// Pads larger than the extent fold back repeatedly.
Tensor pad_reflect(const Tensor& x, std::int64_t pad_bottom, std::int64_t pad_right);
/// Keeps the top-left height x width window of an NCHW tensor.
Tensor crop(const Tensor& x, std::int64_t height, std::int64_t width);

/// Cross-correlation. input [N,C,H,W], weight [O,C,K,K], bias [O] or undefined.
/// H' = (H + 2*padding - K)/stride + 1.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int padding);

/// Adjoint of conv2d. input [N,Ci,H,W], weight [Ci,Co,K,K], bias [Co] or
/// undefined. H' = (H - 1)*stride - 2*padding + K. Passing conv2d's weight
/// maps conv2d's output space back to its input space.
Tensor conv_transpose2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
                        int padding);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double c) { return add_scalar(a, c); }
inline Tensor operator+(double c, const Tensor& a) { return add_scalar(a, c); }
inline Tensor operator-(const Tensor& a, double c) { return add_scalar(a, -c); }
inline Tensor operator-(double c, const Tensor& a) { return add_scalar(neg(a), c); }
inline Tensor operator*(const Tensor& a, double c) { return mul_scalar(a, c); }
inline Tensor operator*(double c, const Tensor& a) { return mul_scalar(a, c); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

}  // namespace waveuie
