#include "waveuie/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

#include "waveuie/errors.hpp"

namespace waveuie {

namespace {

using detail::Node;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;
using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMapF = Eigen::Map<RowMatrixF>;

Node& input_node(Node& self, std::size_t i) { return *self.inputs[i]; }

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
    auto xs = x.data();
    std::vector<double> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = fwd(xs[i]);
    return Tensor::make_result(x.shape(), std::move(out), {x}, [deriv](Node& self) {
        Node& in = input_node(self, 0);
        if (!in.requires_grad) return;
        auto& g = in.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * deriv(in.data[i], self.data[i]);
    });
}

// Binary elementwise with scalar broadcast. `fwd(a, b)`; `da(a, b, y)` and
// `db(a, b, y)` give the local partial derivatives.
template <typename Fwd, typename Da, typename Db>
Tensor binary(const char* name, const Tensor& a, const Tensor& b, Fwd fwd, Da da, Db db) {
    const auto na = a.numel();
    const auto nb = b.numel();
    const bool same = a.shape() == b.shape();
    if (!same && na != 1 && nb != 1) {
        throw DimensionError(std::string(name) + ": shapes " + shape_to_string(a.shape()) + " and " +
                             shape_to_string(b.shape()) + " differ (only scalar broadcast is supported)");
    }
    const Shape out_shape = (same || nb == 1) ? a.shape() : b.shape();
    const auto n = static_cast<std::size_t>(std::max(na, nb));
    const std::size_t sa = na == 1 ? 0 : 1;
    const std::size_t sb = nb == 1 ? 0 : 1;
    auto ad = a.data();
    auto bd = b.data();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(ad[i * sa], bd[i * sb]);
    return Tensor::make_result(out_shape, std::move(out), {a, b}, [sa, sb, da, db](Node& self) {
        Node& an = input_node(self, 0);
        Node& bn = input_node(self, 1);
        const std::size_t count = self.grad.size();
        if (an.requires_grad) {
            auto& g = an.ensure_grad();
            for (std::size_t i = 0; i < count; ++i)
                g[i * sa] += self.grad[i] * da(an.data[i * sa], bn.data[i * sb], self.data[i]);
        }
        if (bn.requires_grad) {
            auto& g = bn.ensure_grad();
            for (std::size_t i = 0; i < count; ++i)
                g[i * sb] += self.grad[i] * db(an.data[i * sa], bn.data[i * sb], self.data[i]);
        }
    });
}

void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* what) {
    if (t.ndim() != rank) {
        throw DimensionError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                             ", got shape " + shape_to_string(t.shape()));
    }
}

// Unrolls output rows [oy0, oy1) of one [C,H,W] image into a
// [C*K*K, (oy1-oy0)*Wo] column matrix.
template <typename T>
void im2col_rows(const double* x, std::int64_t C, std::int64_t H, std::int64_t W, int K, int stride, int pad,
                 std::int64_t oy0, std::int64_t oy1, std::int64_t Wo, T* cols) {
    const std::int64_t P = (oy1 - oy0) * Wo;
    for (std::int64_t c = 0; c < C; ++c) {
        const double* xc = x + c * H * W;
        for (int ki = 0; ki < K; ++ki) {
            for (int kj = 0; kj < K; ++kj) {
                T* row = cols + ((c * K + ki) * K + kj) * P;
                for (std::int64_t oy = oy0; oy < oy1; ++oy) {
                    const std::int64_t iy = oy * stride - pad + ki;
                    T* dst = row + (oy - oy0) * Wo;
                    if (iy < 0 || iy >= H) {
                        std::fill(dst, dst + Wo, T(0));
                        continue;
                    }
                    const double* src = xc + iy * W;
                    if (stride == 1) {
                        for (std::int64_t ox = 0; ox < Wo; ++ox) {
                            const std::int64_t ix = ox - pad + kj;
                            dst[ox] = (ix >= 0 && ix < W) ? static_cast<T>(src[ix]) : T(0);
                        }
                    } else {
                        for (std::int64_t ox = 0; ox < Wo; ++ox) {
                            const std::int64_t ix = ox * stride - pad + kj;
                            dst[ox] = (ix >= 0 && ix < W) ? static_cast<T>(src[ix]) : T(0);
                        }
                    }
                }
            }
        }
    }
}

// Unrolls one [C,H,W] image into a [C*K*K, Ho*Wo] column matrix.
void im2col(const double* x, std::int64_t C, std::int64_t H, std::int64_t W, int K, int stride, int pad,
            std::int64_t Ho, std::int64_t Wo, double* cols) {
    im2col_rows(x, C, H, W, K, stride, pad, 0, Ho, Wo, cols);
}

// Adjoint of im2col: scatters columns back, accumulating into x.
void col2im(const double* cols, std::int64_t C, std::int64_t H, std::int64_t W, int K, int stride, int pad,
            std::int64_t Ho, std::int64_t Wo, double* x) {
    const std::int64_t P = Ho * Wo;
    for (std::int64_t c = 0; c < C; ++c) {
        double* xc = x + c * H * W;
        for (int ki = 0; ki < K; ++ki) {
            for (int kj = 0; kj < K; ++kj) {
                const double* row = cols + ((c * K + ki) * K + kj) * P;
                for (std::int64_t oy = 0; oy < Ho; ++oy) {
                    const std::int64_t iy = oy * stride - pad + ki;
                    if (iy < 0 || iy >= H) continue;
                    double* dst = xc + iy * W;
                    const double* src = row + oy * Wo;
                    for (std::int64_t ox = 0; ox < Wo; ++ox) {
                        const std::int64_t ix = ox * stride - pad + kj;
                        if (ix >= 0 && ix < W) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

struct ConvGeometry {
    std::int64_t N, C, H, W;  // input of the forward correlation
    std::int64_t O, Ho, Wo;   // output of the forward correlation
    int K, stride, pad;
};

// Geometry of conv2d(input [N,C,H,W], weight [O,C,K,K]).
ConvGeometry conv_geometry(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
                           int padding, const char* op) {
    require_rank(input, 4, op, "input");
    require_rank(weight, 4, op, "weight");
    if (stride <= 0) throw DomainError(std::string(op) + ": stride must be positive");
    if (padding < 0) throw DomainError(std::string(op) + ": padding must be non-negative");
    const auto& ws = weight.shape();
    if (ws[2] != ws[3]) {
        throw DimensionError(std::string(op) + ": kernel axes 2 and 3 must be equal, weight shape " +
                             shape_to_string(ws));
    }
    ConvGeometry g{};
    g.N = input.dim(0);
    g.C = input.dim(1);
    g.H = input.dim(2);
    g.W = input.dim(3);
    g.O = ws[0];
    g.K = static_cast<int>(ws[2]);
    g.stride = stride;
    g.pad = padding;
    if (ws[1] != g.C) {
        throw DimensionError(std::string(op) + ": input axis 1 (channels=" + std::to_string(g.C) +
                             ") does not match weight axis 1 (" + std::to_string(ws[1]) + ")");
    }
    if (bias.defined() && (bias.ndim() != 1 || bias.dim(0) != g.O)) {
        throw DimensionError(std::string(op) + ": bias shape " + shape_to_string(bias.shape()) +
                             " does not match weight axis 0 (" + std::to_string(g.O) + ")");
    }
    const std::int64_t span_h = g.H + 2 * padding - g.K;
    const std::int64_t span_w = g.W + 2 * padding - g.K;
    if (span_h < 0 || span_w < 0) {
        throw DomainError(std::string(op) + ": kernel " + std::to_string(g.K) + " does not fit padded input " +
                          std::to_string(g.H + 2 * padding) + "x" + std::to_string(g.W + 2 * padding));
    }
    g.Ho = span_h / stride + 1;
    g.Wo = span_w / stride + 1;
    return g;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary(
        "add", a, b, [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
        [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary(
        "sub", a, b, [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
        [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary(
        "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
        [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary(
        "div", a, b, [](double x, double y) { return x / y; }, [](double, double y, double) { return 1.0 / y; },
        [](double, double y, double out) { return -out / y; });
}

Tensor add_scalar(const Tensor& x, double c) {
    return unary(x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& x, double c) {
    return unary(x, [c](double v) { return v * c; }, [c](double, double) { return c; });
}

Tensor neg(const Tensor& x) { return mul_scalar(x, -1.0); }

Tensor abs(const Tensor& x) {
    return unary(
        x, [](double v) { return std::abs(v); },
        [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& x) {
    return unary(x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor sqrt(const Tensor& x) {
    return unary(
        x,
        [](double v) {
            if (v < 0.0) throw DomainError("sqrt of negative value");
            return std::sqrt(v);
        },
        [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Tensor exp(const Tensor& x) {
    return unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor pow_scalar(const Tensor& x, double p) {
    return unary(
        x, [p](double v) { return v > 0.0 ? std::pow(v, p) : 0.0; },
        [p](double v, double y) { return v > 0.0 ? p * y / v : 0.0; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
    if (lo > hi) throw UsageError("clamp: lo > hi");
    return unary(
        x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
        [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

Tensor clamp_min(const Tensor& x, double lo) {
    return unary(
        x, [lo](double v) { return std::max(v, lo); }, [lo](double v, double) { return v > lo ? 1.0 : 0.0; });
}

Tensor relu(const Tensor& x) {
    return unary(
        x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& x, double slope) {
    return unary(
        x, [slope](double v) { return v > 0.0 ? v : slope * v; },
        [slope](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? slope : 0.0); });
}

Tensor sigmoid(const Tensor& x) {
    return unary(
        x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); }, [](double, double y) { return y * (1.0 - y); });
}

Tensor reduce_sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    return Tensor::make_result({}, {s}, {x}, [](Node& self) {
        Node& in = input_node(self, 0);
        if (!in.requires_grad) return;
        auto& g = in.ensure_grad();
        for (auto& v : g) v += self.grad[0];
    });
}

Tensor reduce_mean(const Tensor& x) {
    const auto n = x.numel();
    if (n == 0) throw DomainError("reduce_mean of an empty tensor");
    double s = 0.0;
    for (double v : x.data()) s += v;
    const double inv = 1.0 / static_cast<double>(n);
    return Tensor::make_result({}, {s * inv}, {x}, [inv](Node& self) {
        Node& in = input_node(self, 0);
        if (!in.requires_grad) return;
        auto& g = in.ensure_grad();
        for (auto& v : g) v += self.grad[0] * inv;
    });
}

Tensor mean_per_sample(const Tensor& x) {
    if (x.ndim() < 1) throw DimensionError("mean_per_sample needs rank >= 1");
    const auto N = x.dim(0);
    if (N == 0 || x.numel() == 0) throw DomainError("mean_per_sample of an empty tensor");
    const auto per = x.numel() / N;
    auto xs = x.data();
    std::vector<double> out(static_cast<std::size_t>(N));
    for (std::int64_t n = 0; n < N; ++n) {
        double s = 0.0;
        for (std::int64_t i = 0; i < per; ++i) s += xs[static_cast<std::size_t>(n * per + i)];
        out[static_cast<std::size_t>(n)] = s / static_cast<double>(per);
    }
    return Tensor::make_result({N}, std::move(out), {x}, [per](Node& self) {
        Node& in = input_node(self, 0);
        if (!in.requires_grad) return;
        auto& g = in.ensure_grad();
        const double inv = 1.0 / static_cast<double>(per);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i / static_cast<std::size_t>(per)] * inv;
    });
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel()) {
        throw DimensionError("reshape: cannot view " + shape_to_string(x.shape()) + " as " + shape_to_string(shape));
    }
    auto xs = x.data();
    return Tensor::make_result(std::move(shape), std::vector<double>(xs.begin(), xs.end()), {x}, [](Node& self) {
        Node& in = input_node(self, 0);
        if (in.requires_grad) in.accumulate_grad(self.grad);
    });
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw UsageError("concat_channels of an empty list");
    for (const auto& p : parts) require_rank(p, 4, "concat_channels", "every part");
    const auto N = parts[0].dim(0);
    const auto H = parts[0].dim(2);
    const auto W = parts[0].dim(3);
    std::int64_t C = 0;
    std::vector<std::int64_t> offsets;
    for (const auto& p : parts) {
        if (p.dim(0) != N || p.dim(2) != H || p.dim(3) != W) {
            throw DimensionError("concat_channels: part " + shape_to_string(p.shape()) +
                                 " disagrees on axes 0/2/3 with " + shape_to_string(parts[0].shape()));
        }
        offsets.push_back(C);
        C += p.dim(1);
    }
    const std::int64_t plane = H * W;
    std::vector<double> out(static_cast<std::size_t>(N * C * plane));
    for (std::size_t k = 0; k < parts.size(); ++k) {
        auto src = parts[k].data();
        const auto Ck = parts[k].dim(1);
        for (std::int64_t n = 0; n < N; ++n) {
            std::copy_n(src.begin() + n * Ck * plane, Ck * plane,
                        out.begin() + (n * C + offsets[k]) * plane);
        }
    }
    return Tensor::make_result({N, C, H, W}, std::move(out), parts, [offsets, N, C, plane](Node& self) {
        for (std::size_t k = 0; k < self.inputs.size(); ++k) {
            Node& in = *self.inputs[k];
            if (!in.requires_grad) continue;
            const auto Ck = in.shape[1];
            auto& g = in.ensure_grad();
            for (std::int64_t n = 0; n < N; ++n) {
                const double* src = self.grad.data() + (n * C + offsets[k]) * plane;
                double* dst = g.data() + n * Ck * plane;
                for (std::int64_t i = 0; i < Ck * plane; ++i) dst[i] += src[i];
            }
        }
    });
}

Tensor concat_batch(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw UsageError("concat_batch of an empty list");
    Shape tail(parts[0].shape().begin() + 1, parts[0].shape().end());
    std::int64_t N = 0;
    std::vector<double> out;
    for (const auto& p : parts) {
        if (p.ndim() != tail.size() + 1 || !std::equal(tail.begin(), tail.end(), p.shape().begin() + 1)) {
            throw DimensionError("concat_batch: part " + shape_to_string(p.shape()) + " disagrees with " +
                                 shape_to_string(parts[0].shape()));
        }
        N += p.dim(0);
        out.insert(out.end(), p.data().begin(), p.data().end());
    }
    Shape shape{N};
    shape.insert(shape.end(), tail.begin(), tail.end());
    return Tensor::make_result(std::move(shape), std::move(out), parts, [](Node& self) {
        std::size_t offset = 0;
        for (auto& in_ptr : self.inputs) {
            Node& in = *in_ptr;
            if (in.requires_grad) in.accumulate_grad(std::span<const double>(self.grad).subspan(offset, in.data.size()));
            offset += in.data.size();
        }
    });
}

Tensor slice_batch(const Tensor& x, std::int64_t begin, std::int64_t end) {
    if (x.ndim() < 1) throw DimensionError("slice_batch needs rank >= 1");
    if (begin < 0 || end > x.dim(0) || begin >= end) {
        throw DimensionError("slice_batch: range [" + std::to_string(begin) + "," + std::to_string(end) +
                             ") invalid for axis 0 of " + shape_to_string(x.shape()));
    }
    const auto per = x.numel() / x.dim(0);
    Shape shape = x.shape();
    shape[0] = end - begin;
    auto xs = x.data();
    std::vector<double> out(xs.begin() + begin * per, xs.begin() + end * per);
    const auto offset = static_cast<std::size_t>(begin * per);
    return Tensor::make_result(std::move(shape), std::move(out), {x}, [offset](Node& self) {
        Node& in = input_node(self, 0);
        if (!in.requires_grad) return;
        auto& g = in.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[offset + i] += self.grad[i];
    });
}

namespace {

// Mirror index without edge repetition; folds repeatedly for large offsets.
std::int64_t reflect_index(std::int64_t i, std::int64_t n) {
    if (n == 1) return 0;
    const std::int64_t period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

bool records_history(std::initializer_list<const Tensor*> inputs) {
    if (!grad_mode_enabled()) return false;
    for (const Tensor* t : inputs) {
        if (t->defined() && t->requires_grad()) return true;
    }
    return false;
}

// Forward-only convolution with a single-precision GEMM over blocks of
// output rows, so the column buffer stays cache resident.
std::vector<double> conv2d_inference(const Tensor& input, const Tensor& weight, const Tensor& bias,
                                     const ConvGeometry& g) {
    constexpr std::int64_t kBlockColumns = 384;
    const std::int64_t CKK = g.C * g.K * g.K;
    const std::int64_t P = g.Ho * g.Wo;
    const std::int64_t in_plane = g.C * g.H * g.W;
    const std::int64_t rows_per_block = std::max<std::int64_t>(1, kBlockColumns / g.Wo);
    const RowMatrixF w = ConstMatMap(weight.data().data(), g.O, CKK).cast<float>();
    std::vector<float> cols(static_cast<std::size_t>(CKK * rows_per_block * g.Wo));
    RowMatrixF block;
    std::vector<double> out(static_cast<std::size_t>(g.N * g.O * P));
    for (std::int64_t n = 0; n < g.N; ++n) {
        const double* x = input.data().data() + n * in_plane;
        double* o = out.data() + n * g.O * P;
        for (std::int64_t oy0 = 0; oy0 < g.Ho; oy0 += rows_per_block) {
            const std::int64_t oy1 = std::min(g.Ho, oy0 + rows_per_block);
            const std::int64_t pc = (oy1 - oy0) * g.Wo;
            im2col_rows(x, g.C, g.H, g.W, g.K, g.stride, g.pad, oy0, oy1, g.Wo, cols.data());
            block.noalias() = w * MatMapF(cols.data(), CKK, pc);
            for (std::int64_t oc = 0; oc < g.O; ++oc) {
                const double b = bias.defined() ? bias.data()[oc] : 0.0;
                double* dst = o + oc * P + oy0 * g.Wo;
                for (std::int64_t j = 0; j < pc; ++j) dst[j] = static_cast<double>(block(oc, j)) + b;
            }
        }
    }
    return out;
}

}  // namespace


Tensor pad_reflect(const Tensor& x, std::int64_t pad_bottom, std::int64_t pad_right) {
    require_rank(x, 4, "pad_reflect", "input");
    if (pad_bottom < 0 || pad_right < 0) throw DomainError("pad_reflect: negative padding");
    const auto N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (H == 0 || W == 0) throw DomainError("pad_reflect: empty spatial extent");
    const auto Hp = H + pad_bottom, Wp = W + pad_right;
    std::vector<std::int64_t> src_index(static_cast<std::size_t>(Hp * Wp));
    for (std::int64_t y = 0; y < Hp; ++y)
        for (std::int64_t xx = 0; xx < Wp; ++xx)
            src_index[static_cast<std::size_t>(y * Wp + xx)] = reflect_index(y, H) * W + reflect_index(xx, W);
    auto xs = x.data();
    std::vector<double> out(static_cast<std::size_t>(N * C * Hp * Wp));
    for (std::int64_t p = 0; p < N * C; ++p)
        for (std::int64_t i = 0; i < Hp * Wp; ++i)
            out[static_cast<std::size_t>(p * Hp * Wp + i)] = xs[static_cast<std::size_t>(p * H * W + src_index[i])];
    return Tensor::make_result({N, C, Hp, Wp}, std::move(out), {x},
                               [src_index = std::move(src_index), N, C, H, W, Hp, Wp](Node& self) {
                                   Node& in = input_node(self, 0);
                                   if (!in.requires_grad) return;
                                   auto& g = in.ensure_grad();
                                   for (std::int64_t p = 0; p < N * C; ++p)
                                       for (std::int64_t i = 0; i < Hp * Wp; ++i)
                                           g[p * H * W + src_index[i]] += self.grad[p * Hp * Wp + i];
                               });
}

Tensor crop(const Tensor& x, std::int64_t height, std::int64_t width) {
    require_rank(x, 4, "crop", "input");
    const auto N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (height <= 0 || width <= 0 || height > H || width > W) {
        throw DimensionError("crop: window " + std::to_string(height) + "x" + std::to_string(width) +
                             " invalid for " + shape_to_string(x.shape()));
    }
    auto xs = x.data();
    std::vector<double> out(static_cast<std::size_t>(N * C * height * width));
    for (std::int64_t p = 0; p < N * C; ++p)
        for (std::int64_t y = 0; y < height; ++y)
            std::copy_n(xs.begin() + (p * H + y) * W, width, out.begin() + (p * height + y) * width);
    return Tensor::make_result({N, C, height, width}, std::move(out), {x}, [N, C, H, W, height, width](Node& self) {
        Node& in = input_node(self, 0);
        if (!in.requires_grad) return;
        auto& g = in.ensure_grad();
        for (std::int64_t p = 0; p < N * C; ++p)
            for (std::int64_t y = 0; y < height; ++y)
                for (std::int64_t xx = 0; xx < width; ++xx)
                    g[(p * H + y) * W + xx] += self.grad[(p * height + y) * width + xx];
    });
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int padding) {
    const ConvGeometry g = conv_geometry(input, weight, bias, stride, padding, "conv2d");
    const std::int64_t CKK = g.C * g.K * g.K;
    const std::int64_t P = g.Ho * g.Wo;
    const std::int64_t in_plane = g.C * g.H * g.W;
    const std::int64_t out_plane = g.O * P;
    const bool direct = g.K == 1 && stride == 1 && padding == 0;
    if (!direct && fast_inference_enabled() && !records_history({&input, &weight, &bias})) {
        return Tensor::from_data({g.N, g.O, g.Ho, g.Wo}, conv2d_inference(input, weight, bias, g));
    }

    std::vector<double> out(static_cast<std::size_t>(g.N * out_plane));
    std::vector<double> cols(direct ? 0 : static_cast<std::size_t>(CKK * P));
    ConstMatMap w(weight.data().data(), g.O, CKK);
    const double* xs = input.data().data();
    for (std::int64_t n = 0; n < g.N; ++n) {
        const double* col_ptr = xs + n * in_plane;
        if (!direct) {
            im2col(col_ptr, g.C, g.H, g.W, g.K, stride, padding, g.Ho, g.Wo, cols.data());
            col_ptr = cols.data();
        }
        MatMap o(out.data() + n * out_plane, g.O, P);
        o.noalias() = w * ConstMatMap(col_ptr, CKK, P);
        if (bias.defined()) {
            auto bs = bias.data();
            for (std::int64_t oc = 0; oc < g.O; ++oc) o.row(oc).array() += bs[oc];
        }
    }

    std::vector<Tensor> inputs{input, weight};
    if (bias.defined()) inputs.push_back(bias);
    return Tensor::make_result({g.N, g.O, g.Ho, g.Wo}, std::move(out), std::move(inputs), [g, direct](Node& self) {
        Node& in = *self.inputs[0];
        Node& wn = *self.inputs[1];
        Node* bn = self.inputs.size() > 2 ? self.inputs[2].get() : nullptr;
        const std::int64_t CKK = g.C * g.K * g.K;
        const std::int64_t P = g.Ho * g.Wo;
        const std::int64_t in_plane = g.C * g.H * g.W;
        const std::int64_t out_plane = g.O * P;
        std::vector<double> cols(direct ? 0 : static_cast<std::size_t>(CKK * P));
        std::vector<double> dcols(static_cast<std::size_t>(CKK * P));
        ConstMatMap w(wn.data.data(), g.O, CKK);
        double* dw = wn.requires_grad ? wn.ensure_grad().data() : nullptr;
        double* dx = in.requires_grad ? in.ensure_grad().data() : nullptr;
        double* db = (bn && bn->requires_grad) ? bn->ensure_grad().data() : nullptr;
        for (std::int64_t n = 0; n < g.N; ++n) {
            ConstMatMap dout(self.grad.data() + n * out_plane, g.O, P);
            if (db) {
                for (std::int64_t oc = 0; oc < g.O; ++oc) db[oc] += dout.row(oc).sum();
            }
            if (dw) {
                const double* col_ptr = in.data.data() + n * in_plane;
                if (!direct) {
                    im2col(col_ptr, g.C, g.H, g.W, g.K, g.stride, g.pad, g.Ho, g.Wo, cols.data());
                    col_ptr = cols.data();
                }
                MatMap(dw, g.O, CKK).noalias() += dout * ConstMatMap(col_ptr, CKK, P).transpose();
            }
            if (dx) {
                if (direct) {
                    MatMap(dx + n * in_plane, CKK, P).noalias() += w.transpose() * dout;
                } else {
                    MatMap(dcols.data(), CKK, P).noalias() = w.transpose() * dout;
                    col2im(dcols.data(), g.C, g.H, g.W, g.K, g.stride, g.pad, g.Ho, g.Wo, dx + n * in_plane);
                }
            }
        }
    });
}

Tensor conv_transpose2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int padding) {
    require_rank(input, 4, "conv_transpose2d", "input");
    require_rank(weight, 4, "conv_transpose2d", "weight");
    if (stride <= 0) throw DomainError("conv_transpose2d: stride must be positive");
    if (padding < 0) throw DomainError("conv_transpose2d: padding must be non-negative");
    const auto& ws = weight.shape();
    if (ws[2] != ws[3]) {
        throw DimensionError("conv_transpose2d: kernel axes 2 and 3 must be equal, weight shape " +
                             shape_to_string(ws));
    }
    const std::int64_t N = input.dim(0), Ci = input.dim(1), Hi = input.dim(2), Wi = input.dim(3);
    if (ws[0] != Ci) {
        throw DimensionError("conv_transpose2d: input axis 1 (channels=" + std::to_string(Ci) +
                             ") does not match weight axis 0 (" + std::to_string(ws[0]) + ")");
    }
    const std::int64_t Co = ws[1];
    const int K = static_cast<int>(ws[2]);
    if (bias.defined() && (bias.ndim() != 1 || bias.dim(0) != Co)) {
        throw DimensionError("conv_transpose2d: bias shape " + shape_to_string(bias.shape()) +
                             " does not match weight axis 1 (" + std::to_string(Co) + ")");
    }
    const std::int64_t Ho = (Hi - 1) * stride - 2 * padding + K;
    const std::int64_t Wo = (Wi - 1) * stride - 2 * padding + K;
    if (Hi == 0 || Wi == 0 || Ho <= 0 || Wo <= 0) {
        throw DomainError("conv_transpose2d: zero-sized output for input " + shape_to_string(input.shape()));
    }
    const std::int64_t CKK = Co * K * K;
    const std::int64_t Pi = Hi * Wi;
    const std::int64_t in_plane = Ci * Pi;
    const std::int64_t out_plane = Co * Ho * Wo;

    std::vector<double> out(static_cast<std::size_t>(N * out_plane), 0.0);
    std::vector<double> cols(static_cast<std::size_t>(CKK * Pi));
    ConstMatMap w(weight.data().data(), Ci, CKK);
    for (std::int64_t n = 0; n < N; ++n) {
        MatMap(cols.data(), CKK, Pi).noalias() = w.transpose() * ConstMatMap(input.data().data() + n * in_plane, Ci, Pi);
        double* o = out.data() + n * out_plane;
        col2im(cols.data(), Co, Ho, Wo, K, stride, padding, Hi, Wi, o);
        if (bias.defined()) {
            auto bs = bias.data();
            for (std::int64_t c = 0; c < Co; ++c)
                for (std::int64_t i = 0; i < Ho * Wo; ++i) o[c * Ho * Wo + i] += bs[c];
        }
    }

    std::vector<Tensor> inputs{input, weight};
    if (bias.defined()) inputs.push_back(bias);
    return Tensor::make_result(
        {N, Co, Ho, Wo}, std::move(out), std::move(inputs),
        [=](Node& self) {
            Node& in = *self.inputs[0];
            Node& wn = *self.inputs[1];
            Node* bn = self.inputs.size() > 2 ? self.inputs[2].get() : nullptr;
            std::vector<double> dcols(static_cast<std::size_t>(CKK * Pi));
            ConstMatMap w(wn.data.data(), Ci, CKK);
            double* dw = wn.requires_grad ? wn.ensure_grad().data() : nullptr;
            double* dx = in.requires_grad ? in.ensure_grad().data() : nullptr;
            double* db = (bn && bn->requires_grad) ? bn->ensure_grad().data() : nullptr;
            for (std::int64_t n = 0; n < N; ++n) {
                const double* dout = self.grad.data() + n * out_plane;
                if (db) {
                    for (std::int64_t c = 0; c < Co; ++c) {
                        double s = 0.0;
                        for (std::int64_t i = 0; i < Ho * Wo; ++i) s += dout[c * Ho * Wo + i];
                        db[c] += s;
                    }
                }
                im2col(dout, Co, Ho, Wo, K, stride, padding, Hi, Wi, dcols.data());
                ConstMatMap dc(dcols.data(), CKK, Pi);
                if (dx) MatMap(dx + n * in_plane, Ci, Pi).noalias() += w * dc;
                if (dw) {
                    MatMap(dw, Ci, CKK).noalias() +=
                        ConstMatMap(in.data.data() + n * in_plane, Ci, Pi) * dc.transpose();
                }
            }
        });
}

}  // namespace waveuie
