#include "waveuie/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "waveuie/errors.hpp"

namespace waveuie {

namespace {
thread_local bool g_grad_mode = true;
thread_local bool g_fast_inference = false;
}

std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (auto e : shape) {
        if (e < 0) throw DimensionError("negative extent in shape " + shape_to_string(shape));
        n *= e;
    }
    return n;
}

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace detail {

std::vector<double>& Node::ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
}

void Node::accumulate_grad(std::span<const double> g) {
    auto& dst = ensure_grad();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

}  // namespace detail

bool grad_mode_enabled() { return g_grad_mode; }

NoGradGuard::NoGradGuard() : previous_(g_grad_mode) { g_grad_mode = false; }
NoGradGuard::~NoGradGuard() { g_grad_mode = previous_; }

bool fast_inference_enabled() { return g_fast_inference; }

FastInferenceGuard::FastInferenceGuard(bool enable) : previous_(g_fast_inference) { g_fast_inference = enable; }
FastInferenceGuard::~FastInferenceGuard() { g_fast_inference = previous_; }

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    auto node = std::make_shared<detail::Node>();
    node->data.assign(static_cast<std::size_t>(shape_numel(shape)), value);
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    if (static_cast<std::int64_t>(data.size()) != shape_numel(shape)) {
        throw DimensionError("data length " + std::to_string(data.size()) + " does not match shape " +
                             shape_to_string(shape));
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from_data({}, {value}, requires_grad); }

detail::Node& Tensor::checked() const {
    if (!node_) throw UsageError("access to an undefined tensor");
    return *node_;
}

const Shape& Tensor::shape() const { return checked().shape; }

std::int64_t Tensor::dim(std::size_t axis) const {
    const auto& s = shape();
    if (axis >= s.size()) {
        throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + shape_to_string(s));
    }
    return s[axis];
}

std::int64_t Tensor::numel() const { return static_cast<std::int64_t>(checked().data.size()); }

std::span<const double> Tensor::data() const { return checked().data; }
std::span<double> Tensor::mutable_data() { return checked().data; }

double Tensor::item() const {
    const auto& n = checked();
    if (n.data.size() != 1) throw UsageError("item() on tensor of shape " + shape_to_string(n.shape));
    return n.data[0];
}

double Tensor::at(std::initializer_list<std::int64_t> index) const {
    const auto& n = checked();
    if (index.size() != n.shape.size()) throw DimensionError("index rank mismatch for " + shape_to_string(n.shape));
    std::int64_t flat = 0;
    std::size_t axis = 0;
    for (auto i : index) {
        if (i < 0 || i >= n.shape[axis]) throw DimensionError("index out of range on axis " + std::to_string(axis));
        flat = flat * n.shape[axis] + i;
        ++axis;
    }
    return n.data[static_cast<std::size_t>(flat)];
}

bool Tensor::requires_grad() const { return checked().requires_grad; }
void Tensor::set_requires_grad(bool flag) { checked().requires_grad = flag; }

bool Tensor::has_grad() const { return !checked().grad.empty(); }
std::span<const double> Tensor::grad() const { return checked().grad; }
std::span<double> Tensor::mutable_grad() { return checked().ensure_grad(); }
void Tensor::zero_grad() { checked().grad.clear(); }

Tensor Tensor::detach() const {
    const auto& n = checked();
    return from_data(n.shape, n.data, false);
}

Tensor Tensor::clone() const {
    const auto& n = checked();
    return from_data(n.shape, n.data, n.requires_grad);
}

Tensor Tensor::make_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                           std::function<void(detail::Node&)> backward_fn) {
    Tensor out = from_data(std::move(shape), std::move(data), false);
    if (!g_grad_mode) return out;
    const bool any = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor& t) { return t.defined() && t.requires_grad(); });
    if (!any) return out;
    auto& node = *out.node_;
    node.requires_grad = true;
    node.inputs.reserve(inputs.size());
    for (auto& t : inputs) node.inputs.push_back(t.node_);
    node.backward_fn = std::move(backward_fn);
    return out;
}

void Tensor::backward() const {
    auto& root = checked();
    if (root.data.size() != 1) {
        throw UsageError("backward() requires a scalar loss, got shape " + shape_to_string(root.shape));
    }
    if (!root.requires_grad) throw UsageError("backward() on a tensor that does not depend on any parameter");

    // Iterative post-order DFS gives a topological order (inputs first).
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> visited;
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            detail::Node* child = node->inputs[next++].get();
            if (child && child->requires_grad && !visited.count(child)) {
                visited.insert(child);
                stack.emplace_back(child, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root.ensure_grad()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* node = *it;
        if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
    }
    // Release the graph; leaves keep their accumulated gradients.
    for (detail::Node* node : order) {
        if (node->backward_fn) {
            node->backward_fn = nullptr;
            node->inputs.clear();
            node->grad.clear();
            node->grad.shrink_to_fit();
        }
    }
}

}  // namespace waveuie
