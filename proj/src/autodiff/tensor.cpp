#include "rgpd/autodiff/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace rgpd {

namespace {

std::atomic<std::uint64_t> next_node_id{1};
thread_local bool recording = true;

#ifdef NDEBUG
std::atomic<bool> debug_enabled{false};
#else
std::atomic<bool> debug_enabled{true};
#endif

std::shared_ptr<Node> new_node(Shape shape, std::vector<double> values, bool requires_grad) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->values = std::move(values);
    node->requires_grad = requires_grad;
    node->id = next_node_id.fetch_add(1, std::memory_order_relaxed);
    return node;
}

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::vector<double>& Node::ensure_grad() {
    if (grad.empty()) grad.assign(values.size(), 0.0);
    return grad;
}

Tensor::Tensor() : node_(new_node({1}, {0.0}, false)) {}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
    if (shape_numel(shape) != values.size()) {
        throw DimensionError("tensor shape " + shape_str(shape) + " holds " +
                             std::to_string(shape_numel(shape)) + " values, got " +
                             std::to_string(values.size()));
    }
    if (!all_finite(values)) throw NumericalError("non-finite value in tensor construction");
    node_ = new_node(std::move(shape), std::move(values), requires_grad);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    const auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({1}, {value}, requires_grad); }

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows, bool requires_grad) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> v;
    v.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionError("ragged matrix literal");
        v.insert(v.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(v), requires_grad);
}

Tensor Tensor::vector(std::initializer_list<double> values, bool requires_grad) {
    return Tensor({values.size()}, std::vector<double>(values), requires_grad);
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= rank()) throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
    return node_->shape[axis];
}

std::size_t Tensor::rows() const {
    if (rank() != 2) throw DimensionError("expected a matrix, got " + shape_str(shape()));
    return node_->shape[0];
}

std::size_t Tensor::cols() const {
    if (rank() != 2) throw DimensionError("expected a matrix, got " + shape_str(shape()));
    return node_->shape[1];
}

double Tensor::item() const {
    if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
    return node_->values[0];
}

double Tensor::at(std::size_t r, std::size_t c) const { return node_->values[r * cols() + c]; }

std::span<const double> Tensor::grad() const {
    if (node_->grad.empty()) throw std::logic_error("tensor has no gradient; run backward first");
    return node_->grad;
}

void Tensor::zero_grad() { node_->grad.clear(); }

std::span<double> Tensor::mutable_values() {
    if (!is_leaf()) throw std::logic_error("only leaf tensors may be mutated");
    return node_->values;
}

Tensor Tensor::clone(bool requires_grad) const {
    return Tensor(new_node(node_->shape, node_->values, requires_grad));
}

void Tensor::backward() const {
    if (numel() != 1) throw DimensionError("backward requires a scalar loss, got " + shape_str(shape()));

    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<Node*> stack{node_.get()};
    while (!stack.empty()) {
        Node* n = stack.back();
        stack.pop_back();
        if (!seen.insert(n).second) continue;
        order.push_back(n);
        for (const auto& in : n->record.inputs) {
            if (in->requires_grad) stack.push_back(in.get());
        }
    }
    // Inputs always carry smaller ids than their outputs, so descending id is
    // a reverse topological order.
    std::sort(order.begin(), order.end(), [](const Node* a, const Node* b) { return a->id > b->id; });

    for (Node* n : order) {
        if (n->record.backward) n->grad.clear();
    }
    node_->ensure_grad()[0] += 1.0;
    for (Node* n : order) {
        if (n->record.backward && !n->grad.empty()) n->record.backward(*n);
    }
}

Tensor make_op_result(std::string_view kind, Shape shape, std::vector<double> values,
                      std::vector<Tensor> inputs, std::function<void(const Node& out)> backward) {
    if (debug_checks() && !all_finite(values)) {
        throw NumericalError("non-finite output from op '" + std::string(kind) + "'");
    }
    const bool needs_grad =
        recording && std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
    auto node = new_node(std::move(shape), std::move(values), needs_grad);
    node->record.kind = kind;
    if (needs_grad) {
        node->record.inputs.reserve(inputs.size());
        for (auto& t : inputs) node->record.inputs.push_back(t.node_);
        node->record.backward = std::move(backward);
    }
    return Tensor(std::move(node));
}

NoGradGuard::NoGradGuard() : previous_(recording) { recording = false; }
NoGradGuard::~NoGradGuard() { recording = previous_; }

bool grad_enabled() { return recording; }

void set_debug_checks(bool on) { debug_enabled.store(on); }
bool debug_checks() { return debug_enabled.load(); }

}  // namespace rgpd
