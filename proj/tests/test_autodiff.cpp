#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rgpd/autodiff/gradcheck.hpp"
#include "rgpd/autodiff/op_checks.hpp"
#include "rgpd/autodiff/ops.hpp"

using namespace rgpd;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(r * c);
    for (auto& x : v) x = d(rng);
    return Tensor({r, c}, std::move(v));
}

void expect_values(const Tensor& t, std::vector<double> expected, double tol = 0.0) {
    ASSERT_EQ(t.numel(), expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(t[i], expected[i], tol) << "index " << i;
}

// Gradient of x -> sum(2x) but with the backward rule claiming 3x.
Tensor broken_double(const Tensor& x) {
    std::vector<double> y(x.values().begin(), x.values().end());
    for (auto& v : y) v *= 2.0;
    return make_op_result("broken_double", x.shape(), std::move(y), {x}, [](const Node& out) {
        auto& g = out.record.inputs[0]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += 3.0 * out.grad[i];
    });
}

}  // namespace

TEST(Tensor, RejectsMismatchedShapeAndNonFinite) {
    EXPECT_THROW(Tensor({2, 2}, {1.0, 2.0, 3.0}), DimensionError);
    EXPECT_THROW(Tensor({1}, {std::nan("")}), NumericalError);
    EXPECT_THROW(Tensor({1}, {INFINITY}), NumericalError);
}

TEST(Tensor, DebugChecksFlagNonFiniteOpOutputs) {
    set_debug_checks(true);
    auto x = Tensor::vector({800.0});
    EXPECT_THROW(rgpd::exp(x), NumericalError);
}

TEST(Matmul, IdentityAndHandProduct) {
    auto eye = Tensor::matrix({{1, 0}, {0, 1}});
    auto m = Tensor::matrix({{1, 2}, {3, 4}});
    expect_values(matmul(eye, m), {1, 2, 3, 4});
    expect_values(matmul(Tensor::matrix({{1, 2}}), Tensor::matrix({{3}, {4}})), {11});
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
    try {
        matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
        FAIL() << "expected DimensionError";
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("[2x3] x [2x3]"), std::string::npos) << msg;
    }
}

TEST(Matmul, GradientMatchesFiniteDifference) {
    auto a = random_matrix(3, 3, 1);
    auto b = random_matrix(3, 3, 2);
    const double err = finite_diff_check([&](const Tensor& x) { return sum(matmul(x, b)); }, a);
    EXPECT_LT(err, 1e-6);
}

TEST(BlockMatmul, EqualsPerBlockMatmul) {
    auto a = random_matrix(4, 4, 3);
    auto x = random_matrix(12, 5, 4);
    auto y = block_matmul(a, x);
    ASSERT_EQ(y.shape(), (Shape{12, 5}));
    for (std::size_t b = 0; b < 3; ++b) {
        auto ref = matmul(a, slice_rows(x, 4 * b, 4 * b + 4));
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(y.at(4 * b + i, j), ref.at(i, j));
    }
    EXPECT_THROW(block_matmul(a, random_matrix(6, 2, 5)), DimensionError);
}

TEST(Softmax, ClosedForms) {
    expect_values(softmax(Tensor::vector({0.0, 0.0}), 0), {0.5, 0.5});
    expect_values(softmax(Tensor::vector({1000.0, 1000.0}), 0), {0.5, 0.5});
    expect_values(softmax(Tensor::vector({std::log(2.0), 0.0}), 0), {2.0 / 3.0, 1.0 / 3.0}, 1e-15);
}

TEST(Softmax, RowsAndColumnsSumToOne) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        auto x = random_matrix(4, 6, seed, -50.0, 50.0);
        for (std::size_t axis : {0u, 1u}) {
            auto y = softmax(x, axis);
            const std::size_t lines = axis == 1 ? 4 : 6;
            for (std::size_t l = 0; l < lines; ++l) {
                double s = 0.0;
                for (std::size_t i = 0; i < (axis == 1 ? 6u : 4u); ++i) s += axis == 1 ? y.at(l, i) : y.at(i, l);
                EXPECT_NEAR(s, 1.0, 1e-12);
            }
        }
    }
}

TEST(Softmax, InvalidAxis) { EXPECT_THROW(softmax(Tensor::zeros({2, 2}), 2), DimensionError); }

TEST(DepthwiseConv, DeltaKernelIsIdentity) {
    auto x = random_matrix(3, 7, 4);
    auto delta = Tensor::matrix({{0, 1, 0}, {0, 1, 0}, {0, 1, 0}});
    auto y = depthwise_conv1d(x, delta);
    for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(DepthwiseConv, HandConvolution) {
    auto x = Tensor::matrix({{1, 2, 3}, {1, 2, 3}});
    auto k = Tensor::matrix({{1, 1, 1}, {1, 1, 1}});
    expect_values(depthwise_conv1d(x, k), {3, 6, 5, 3, 6, 5});
}

TEST(DepthwiseConv, ChannelsAreIndependent) {
    auto x = random_matrix(2, 6, 5);
    auto k = random_matrix(2, 3, 6);
    auto base = depthwise_conv1d(x, k);
    std::vector<double> v(x.values().begin(), x.values().end());
    for (std::size_t t = 0; t < 6; ++t) v[t] += 0.37 * static_cast<double>(t + 1);
    auto perturbed = depthwise_conv1d(Tensor({2, 6}, v), k);
    for (std::size_t t = 0; t < 6; ++t) EXPECT_EQ(perturbed.at(1, t), base.at(1, t));
}

TEST(DepthwiseConv, EvenKernelRejected) {
    EXPECT_THROW(depthwise_conv1d(Tensor::zeros({1, 4}), Tensor::zeros({1, 2})), std::invalid_argument);
}

TEST(DilatedConv, DilationOneMatchesDepthwise) {
    auto x = random_matrix(3, 9, 7);
    auto k = random_matrix(3, 5, 8);
    auto a = dilated_depthwise_conv1d(x, k, 1);
    auto b = depthwise_conv1d(x, k);
    for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(DilatedConv, DeltaKernelIdentityForAnyDilation) {
    auto x = random_matrix(2, 10, 9);
    auto delta = Tensor::matrix({{0, 1, 0}, {0, 1, 0}});
    for (std::size_t d = 1; d <= 4; ++d) {
        auto y = dilated_depthwise_conv1d(x, delta, d);
        for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y[i], x[i]);
    }
}

TEST(DilatedConv, CausalHandExample) {
    auto x = Tensor::matrix({{1, 0, 0, 0, 2}});
    auto k = Tensor::matrix({{1, 1}});
    auto y = dilated_depthwise_conv1d(x, k, 2, Padding::causal);
    EXPECT_EQ(y.at(0, 4), 2.0);
    // y(i) = x(i) + x(i-2)
    expect_values(y, {1, 0, 1, 0, 2});
}

TEST(DilatedConv, ReceptiveField) {
    // A single impulse spreads over d*(k-1)+1 outputs.
    const std::size_t d = 3, k = 3;
    std::vector<double> v(15, 0.0);
    v[7] = 1.0;
    auto y = dilated_depthwise_conv1d(Tensor({1, 15}, v), Tensor::matrix({{1, 1, 1}}), d);
    std::size_t first = 15, last = 0;
    for (std::size_t i = 0; i < 15; ++i) {
        if (y[i] != 0.0) {
            first = std::min(first, i);
            last = std::max(last, i);
        }
    }
    EXPECT_EQ(last - first + 1, d * (k - 1) + 1);
}

TEST(DilatedConv, ZeroDilationRejected) {
    EXPECT_THROW(dilated_depthwise_conv1d(Tensor::zeros({1, 4}), Tensor::zeros({1, 3}), 0), std::invalid_argument);
}

TEST(PointwiseConv, IdentityAndChannelSum) {
    auto x = random_matrix(3, 5, 10);
    auto y = pointwise_conv(x, Tensor::matrix({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}));
    for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y[i], x[i]);

    auto two = Tensor::matrix({{1, 2, 3}, {10, 20, 30}});
    expect_values(pointwise_conv(two, Tensor::matrix({{1}, {1}})), {11, 22, 33});
}

TEST(PointwiseConv, MatchesLoopOracle) {
    auto x = random_matrix(4, 6, 11);
    auto k = random_matrix(4, 3, 12);
    auto y = pointwise_conv(x, k);
    ASSERT_EQ(y.shape(), (Shape{3, 6}));
    for (std::size_t co = 0; co < 3; ++co) {
        for (std::size_t t = 0; t < 6; ++t) {
            double acc = 0.0;
            for (std::size_t c = 0; c < 4; ++c) acc += x.at(c, t) * k.at(c, co);
            EXPECT_NEAR(y.at(co, t), acc, 1e-12);
        }
    }
    EXPECT_THROW(pointwise_conv(x, random_matrix(3, 3, 1)), DimensionError);
}

TEST(Backward, SumGivesOnes) {
    auto x = Tensor::zeros({2, 3}, true);
    sum(x).backward();
    for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, SumOfSquares) {
    auto x = Tensor::vector({1.0, 2.0}, true);
    sum(square(x)).backward();
    EXPECT_EQ(x.grad()[0], 2.0);
    EXPECT_EQ(x.grad()[1], 4.0);
}

TEST(Backward, RepeatedCallsAccumulateLeafGradients) {
    auto x = Tensor::vector({1.0, 2.0}, true);
    auto loss = sum(square(x));
    loss.backward();
    loss.backward();
    EXPECT_EQ(x.grad()[0], 4.0);
    x.zero_grad();
    EXPECT_FALSE(x.has_grad());
}

TEST(Backward, SharedSubexpressionSumsBothPaths) {
    // z = a*b + a  ->  dz/da = b + 1, dz/db = a
    auto a = Tensor::vector({3.0}, true);
    auto b = Tensor::vector({5.0}, true);
    auto z = sum(add(mul(a, b), a));
    z.backward();
    EXPECT_EQ(a.grad()[0], 6.0);
    EXPECT_EQ(b.grad()[0], 3.0);

    // Diamond: y = u + u where u = x^2
    auto x = Tensor::vector({1.5}, true);
    auto u = square(x);
    sum(add(u, u)).backward();
    EXPECT_EQ(x.grad()[0], 6.0);
}

TEST(Backward, NonScalarRejected) {
    auto x = Tensor::zeros({2}, true);
    EXPECT_THROW(square(x).backward(), DimensionError);
}

TEST(Backward, NoGradGuardSkipsRecording) {
    auto x = Tensor::vector({1.0}, true);
    NoGradGuard guard;
    auto y = square(x);
    EXPECT_FALSE(y.requires_grad());
    EXPECT_TRUE(y.is_leaf());
}

TEST(FiniteDiffCheck, IdentityIsExact) {
    auto x = random_matrix(2, 3, 13);
    EXPECT_LT(finite_diff_check([](const Tensor& t) { return t; }, x), 1e-9);
}

TEST(FiniteDiffCheck, SoftmaxAtRandomPoint) {
    auto x = random_matrix(3, 4, 14, -2.0, 2.0);
    EXPECT_LT(finite_diff_check([](const Tensor& t) { return softmax(t, 1); }, x), 1e-6);
}

TEST(FiniteDiffCheck, WrongBackwardRuleIsCaught) {
    auto x = random_matrix(2, 2, 15);
    EXPECT_GT(finite_diff_check(broken_double, x), 1e-2);
}

TEST(FiniteDiffCheck, NonFiniteFunctionReported) {
    auto x = Tensor::vector({1.0});
    set_debug_checks(false);
    EXPECT_THROW(finite_diff_check([](const Tensor& t) { return scale(rgpd::exp(scale(t, 1e6)), 1.0); }, x),
                 NumericalError);
    set_debug_checks(true);
}

TEST(OpProbes, EveryOpPassesOnOneHundredSeeds) {
    for (const auto& probe : autodiff_op_probes()) {
        double worst = 0.0;
        for (std::uint64_t seed = 0; seed < 100; ++seed) worst = std::max(worst, probe.run(seed));
        EXPECT_LT(worst, 1e-4) << probe.name;
    }
}
