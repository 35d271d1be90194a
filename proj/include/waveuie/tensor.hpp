#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace waveuie {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;

    // Recorded only while grad mode is on and some input requires grad.
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward_fn;

    void accumulate_grad(std::span<const double> g);
    std::vector<double>& ensure_grad();
};

}  // namespace detail

/// N-dimensional array of doubles with an optional gradient buffer.
///
/// Tensors are cheap handles; copies share storage. Every operation in
/// ops.hpp that sees an input with requires_grad() set records a backward
/// closure on the result, forming a dynamic graph that backward() walks in
/// reverse topological order and then releases. Gradients on leaves
/// accumulate until zero_grad().
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(node_); }

    const Shape& shape() const;
    std::int64_t dim(std::size_t axis) const;
    std::size_t ndim() const { return shape().size(); }
    std::int64_t numel() const;

    std::span<const double> data() const;
    /// In-place access for leaves (optimizer updates, test fixtures).
    std::span<double> mutable_data();

    double item() const;
    double at(std::initializer_list<std::int64_t> index) const;

    bool requires_grad() const;
    void set_requires_grad(bool flag);

    bool has_grad() const;
    std::span<const double> grad() const;
    std::span<double> mutable_grad();
    void zero_grad();

    /// Same values, no history, no grad.
    Tensor detach() const;
    Tensor clone() const;

    /// Reverse-mode sweep from this scalar. Throws UsageError for non-scalars.
    void backward() const;

    /// Builds a result tensor. When grad mode is on and any input requires a
    /// gradient, `backward_fn` is recorded; it receives the result node whose
    /// `grad` holds d(loss)/d(result) and must accumulate into the inputs.
    static Tensor make_result(Shape shape, std::vector<double> data,
                              std::vector<Tensor> inputs,
                              std::function<void(detail::Node&)> backward_fn);

    const std::shared_ptr<detail::Node>& node() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    detail::Node& checked() const;

    std::shared_ptr<detail::Node> node_;
};

bool grad_mode_enabled();

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool fast_inference_enabled();

/// While alive, convolutions that record no history run their GEMM in
/// single precision (or, with enable=false, are forced back to double).
class FastInferenceGuard {
public:
    explicit FastInferenceGuard(bool enable = true);
    ~FastInferenceGuard();
    FastInferenceGuard(const FastInferenceGuard&) = delete;
    FastInferenceGuard& operator=(const FastInferenceGuard&) = delete;

private:
    bool previous_;
};

}  // namespace waveuie
