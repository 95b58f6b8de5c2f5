#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rgpd {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

class DimensionError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

struct Node;

// One recorded operation. The backward rule reads the output gradient and
// accumulates into the inputs it captured.
struct OpRecord {
    std::string_view kind;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(const Node& out)> backward;
};

struct Node {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // empty until a backward pass reaches this node
    bool requires_grad = false;
    std::uint64_t id = 0;
    OpRecord record;

    std::vector<double>& ensure_grad();
};

// Dense row-major float64 tensor with optional gradient. Copies share the
// underlying node; use clone() for an independent leaf.
class Tensor {
   public:
    Tensor();
    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                         bool requires_grad = false);
    static Tensor vector(std::initializer_list<double> values, bool requires_grad = false);

    const Shape& shape() const { return node_->shape; }
    std::size_t dim(std::size_t axis) const;
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t numel() const { return node_->values.size(); }
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<const double> values() const { return node_->values; }
    double item() const;
    double operator[](std::size_t i) const { return node_->values[i]; }
    double at(std::size_t r, std::size_t c) const;

    bool requires_grad() const { return node_->requires_grad; }
    bool is_leaf() const { return !node_->record.backward; }
    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const double> grad() const;
    void zero_grad();

    // Leaf parameters only: in-place update by optimizers and checkpoint loads.
    std::span<double> mutable_values();

    // Reverse pass from this scalar. Leaf gradients accumulate across calls
    // until zero_grad(); intermediate gradients are recomputed each time.
    void backward() const;

    Tensor clone(bool requires_grad) const;
    Tensor detach() const { return clone(false); }

    std::uint64_t id() const { return node_->id; }
    const std::shared_ptr<Node>& node() const { return node_; }
    std::string_view op_kind() const { return node_->record.kind; }

   private:
    friend Tensor make_op_result(std::string_view, Shape, std::vector<double>,
                                 std::vector<Tensor>, std::function<void(const Node&)>);
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
    std::shared_ptr<Node> node_;
};

// Builds an op output. The backward closure is attached only when gradient
// recording is enabled and at least one input requires a gradient.
Tensor make_op_result(std::string_view kind, Shape shape, std::vector<double> values,
                      std::vector<Tensor> inputs, std::function<void(const Node& out)> backward);

// Disables op recording within a scope (evaluation).
class NoGradGuard {
   public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

   private:
    bool previous_;
};

bool grad_enabled();

// When on, every op output is scanned for NaN/Inf.
void set_debug_checks(bool on);
bool debug_checks();

}  // namespace rgpd
