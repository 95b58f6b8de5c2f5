#include "rgpd/autodiff/op_checks.hpp"

#include <random>

#include "rgpd/autodiff/gradcheck.hpp"
#include "rgpd/autodiff/ops.hpp"

namespace rgpd {

namespace {

struct Gen {
    explicit Gen(std::uint64_t seed) : rng(seed) {}

    std::size_t dim(std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    }

    Tensor uniform(Shape shape, double lo = -1.0, double hi = 1.0) {
        std::uniform_real_distribution<double> d(lo, hi);
        std::vector<double> v(shape_numel(shape));
        for (auto& x : v) x = d(rng);
        return Tensor(std::move(shape), std::move(v));
    }

    std::mt19937_64 rng;
};

using Unary = std::function<Tensor(const Tensor&)>;

GradProbe unary_probe(std::string name, Unary op, double lo = -2.0, double hi = 2.0) {
    return {name, [op, lo, hi](std::uint64_t seed) {
                Gen g(seed);
                auto x = g.uniform({g.dim(1, 4), g.dim(1, 5)}, lo, hi);
                return finite_diff_check(op, x);
            }};
}

// Checks gradients through both operands: the second is held as a leaf
// parameter while the first is perturbed directly, then roles swap.
GradProbe binary_probe(std::string name, std::function<std::pair<Tensor, Tensor>(Gen&)> make,
                       std::function<Tensor(const Tensor&, const Tensor&)> op) {
    return {name, [make, op](std::uint64_t seed) {
                Gen g(seed);
                auto [a, b] = make(g);
                const double ea = finite_diff_check([&](const Tensor& x) { return op(x, b); }, a);
                const double eb = finite_diff_check([&](const Tensor& x) { return op(a, x); }, b);
                return std::max(ea, eb);
            }};
}

}  // namespace

std::vector<GradProbe> autodiff_op_probes() {
    std::vector<GradProbe> probes;

    probes.push_back(binary_probe(
        "matmul",
        [](Gen& g) {
            const auto m = g.dim(1, 4), k = g.dim(1, 4), n = g.dim(1, 4);
            return std::pair{g.uniform({m, k}), g.uniform({k, n})};
        },
        [](const Tensor& a, const Tensor& b) { return matmul(a, b); }));
    probes.push_back(binary_probe(
        "block_matmul",
        [](Gen& g) {
            const auto m = g.dim(1, 4), k = g.dim(1, 4), f = g.dim(1, 3), blocks = g.dim(1, 3);
            return std::pair{g.uniform({m, k}), g.uniform({blocks * k, f})};
        },
        [](const Tensor& a, const Tensor& x) { return block_matmul(a, x); }));
    probes.push_back(unary_probe("transpose", [](const Tensor& x) { return transpose(x); }));

    auto same = [](Gen& g) {
        Shape s{g.dim(1, 4), g.dim(1, 5)};
        return std::pair{g.uniform(s), g.uniform(s)};
    };
    probes.push_back(binary_probe("add", same, [](const Tensor& a, const Tensor& b) { return add(a, b); }));
    probes.push_back(binary_probe("sub", same, [](const Tensor& a, const Tensor& b) { return sub(a, b); }));
    probes.push_back(binary_probe("mul", same, [](const Tensor& a, const Tensor& b) { return mul(a, b); }));
    probes.push_back(unary_probe("scale", [](const Tensor& x) { return scale(x, -1.7); }));
    probes.push_back(unary_probe("add_scalar", [](const Tensor& x) { return add_scalar(x, 0.3); }));

    auto with_row = [](Gen& g) {
        const auto r = g.dim(1, 4), c = g.dim(1, 5);
        return std::pair{g.uniform({r, c}), g.uniform({1, c})};
    };
    auto with_col = [](Gen& g) {
        const auto r = g.dim(1, 4), c = g.dim(1, 5);
        return std::pair{g.uniform({r, c}), g.uniform({r, 1})};
    };
    probes.push_back(binary_probe("add_row", with_row, [](const Tensor& a, const Tensor& b) { return add_row(a, b); }));
    probes.push_back(binary_probe("mul_row", with_row, [](const Tensor& a, const Tensor& b) { return mul_row(a, b); }));
    probes.push_back(binary_probe("mul_col", with_col, [](const Tensor& a, const Tensor& b) { return mul_col(a, b); }));

    probes.push_back(unary_probe("sum", [](const Tensor& x) { return sum(x); }));
    probes.push_back(unary_probe("mean", [](const Tensor& x) { return mean(x); }));
    probes.push_back(unary_probe("mean_rows", [](const Tensor& x) { return mean_rows(x); }));
    probes.push_back(unary_probe("mean_cols", [](const Tensor& x) { return mean_cols(x); }));

    probes.push_back(unary_probe("square", [](const Tensor& x) { return square(x); }));
    probes.push_back(unary_probe("relu", [](const Tensor& x) { return relu(x); }));
    probes.push_back(unary_probe("elu", [](const Tensor& x) { return elu(x); }));
    probes.push_back(unary_probe("leaky_relu", [](const Tensor& x) { return leaky_relu(x, 0.2); }));
    probes.push_back(unary_probe("sigmoid", [](const Tensor& x) { return sigmoid(x); }));
    probes.push_back(unary_probe("tanh", [](const Tensor& x) { return rgpd::tanh(x); }));
    probes.push_back(unary_probe("exp", [](const Tensor& x) { return rgpd::exp(x); }));
    probes.push_back(unary_probe("log", [](const Tensor& x) { return rgpd::log(x); }, 0.5, 2.0));
    probes.push_back(unary_probe("softplus", [](const Tensor& x) { return softplus(x); }));
    probes.push_back(unary_probe("clamp", [](const Tensor& x) { return clamp(x, -1.0, 1.0); }));
    probes.push_back(unary_probe("softmax_rows", [](const Tensor& x) { return softmax(x, 1); }));
    probes.push_back(unary_probe("softmax_cols", [](const Tensor& x) { return softmax(x, 0); }));

    probes.push_back({"masked_softmax_rows", [](std::uint64_t seed) {
                          Gen g(seed);
                          const auto n = g.dim(1, 5);
                          std::vector<double> mask(n * n);
                          std::bernoulli_distribution keep(0.5);
                          for (std::size_t i = 0; i < n; ++i)
                              for (std::size_t j = 0; j < n; ++j) mask[i * n + j] = (i == j || keep(g.rng)) ? 1.0 : 0.0;
                          auto x = g.uniform({n, n}, -2.0, 2.0);
                          return finite_diff_check([&](const Tensor& t) { return masked_softmax_rows(t, mask); }, x);
                      }});
    probes.push_back(binary_probe(
        "outer_add",
        [](Gen& g) { return std::pair{g.uniform({g.dim(1, 4), 1}), g.uniform({g.dim(1, 4), 1})}; },
        [](const Tensor& u, const Tensor& v) { return outer_add(u, v); }));

    probes.push_back(binary_probe(
        "concat_cols",
        [](Gen& g) {
            const auto r = g.dim(1, 4);
            return std::pair{g.uniform({r, g.dim(1, 3)}), g.uniform({r, g.dim(1, 3)})};
        },
        [](const Tensor& a, const Tensor& b) { return concat_cols({a, b}); }));
    probes.push_back(binary_probe(
        "concat_rows",
        [](Gen& g) {
            const auto c = g.dim(1, 4);
            return std::pair{g.uniform({g.dim(1, 3), c}), g.uniform({g.dim(1, 3), c})};
        },
        [](const Tensor& a, const Tensor& b) { return concat_rows({a, b}); }));
    probes.push_back({"slice_cols", [](std::uint64_t seed) {
                          Gen g(seed);
                          auto x = g.uniform({g.dim(1, 4), g.dim(2, 6)});
                          const auto b = g.dim(0, x.cols() - 2);
                          const auto e = g.dim(b + 1, x.cols());
                          return finite_diff_check([&](const Tensor& t) { return slice_cols(t, b, e); }, x);
                      }});
    probes.push_back({"slice_rows", [](std::uint64_t seed) {
                          Gen g(seed);
                          auto x = g.uniform({g.dim(2, 6), g.dim(1, 4)});
                          const auto b = g.dim(0, x.rows() - 2);
                          const auto e = g.dim(b + 1, x.rows());
                          return finite_diff_check([&](const Tensor& t) { return slice_rows(t, b, e); }, x);
                      }});
    probes.push_back(unary_probe("reshape", [](const Tensor& x) { return reshape(x, {x.numel()}); }));

    probes.push_back(binary_probe(
        "depthwise_conv1d",
        [](Gen& g) {
            const auto c = g.dim(1, 3);
            const auto k = 2 * g.dim(0, 2) + 1;
            return std::pair{g.uniform({c, g.dim(1, 7)}), g.uniform({c, k})};
        },
        [](const Tensor& x, const Tensor& k) { return depthwise_conv1d(x, k); }));
    probes.push_back({"dilated_depthwise_conv1d", [](std::uint64_t seed) {
                          Gen g(seed);
                          const auto c = g.dim(1, 3);
                          const auto k = 2 * g.dim(0, 2) + 1;
                          const auto d = g.dim(1, 3);
                          auto x = g.uniform({c, g.dim(1, 8)});
                          auto kern = g.uniform({c, k});
                          const double ex = finite_diff_check(
                              [&](const Tensor& t) { return dilated_depthwise_conv1d(t, kern, d); }, x);
                          const double ek = finite_diff_check(
                              [&](const Tensor& t) { return dilated_depthwise_conv1d(x, t, d); }, kern);
                          return std::max(ex, ek);
                      }});
    probes.push_back(binary_probe(
        "pointwise_conv",
        [](Gen& g) {
            const auto c = g.dim(1, 4);
            return std::pair{g.uniform({c, g.dim(1, 5)}), g.uniform({c, g.dim(1, 4)})};
        },
        [](const Tensor& x, const Tensor& k) { return pointwise_conv(x, k); }));
    return probes;
}

}  // namespace rgpd
