#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "rgpd/autodiff/gradcheck.hpp"
#include "rgpd/autodiff/ops.hpp"
#include "rgpd/physics/physics.hpp"

using namespace rgpd;

namespace {

Tensor rows(std::initializer_list<std::initializer_list<double>> r, bool grad = false) { return Tensor::matrix(r, grad); }

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(r * c);
    for (auto& x : v) x = d(rng);
    return Tensor({r, c}, std::move(v));
}

Tensor reverse_rows(const Tensor& m) {
    std::vector<double> v;
    for (std::size_t i = m.rows(); i-- > 0;)
        for (std::size_t j = 0; j < m.cols(); ++j) v.push_back(m.at(i, j));
    return Tensor(m.shape(), v);
}

}  // namespace

TEST(Monotonicity, DecreasingSequenceHasNoPenalty) {
    EXPECT_EQ(monotonicity_loss(rows({{5, 4, 3, 2}})).loss.item(), 0.0);
    EXPECT_EQ(monotonicity_loss(rows({{7, 7, 7}})).loss.item(), 0.0);
}

TEST(Monotonicity, HandFixture) {
    auto r = monotonicity_loss(rows({{3, 1, 2}}));
    EXPECT_EQ(r.residual[0], -2.0);
    EXPECT_EQ(r.residual[1], 1.0);
    EXPECT_EQ(r.loss.item(), 0.5);
}

TEST(Monotonicity, NonIncreasingPropertyIsExactlyZero) {
    Rng rng(1);
    std::uniform_real_distribution<double> step(0.0, 3.0);
    std::bernoulli_distribution flat(0.3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v;
        for (int b = 0; b < 3; ++b) {
            double y = 100.0 * step(rng);
            for (int t = 0; t < 10; ++t) {
                v.push_back(y);
                if (!flat(rng)) y -= step(rng);
            }
        }
        EXPECT_EQ(monotonicity_loss(Tensor({3, 10}, v)).loss.item(), 0.0);
    }
    EXPECT_THROW(monotonicity_loss(rows({{1}})), std::invalid_argument);
}

TEST(Smoothness, HandFixtures) {
    auto r = smoothness_loss(rows({{0, 0, 1}}));
    EXPECT_EQ(r.residual[0], 1.0);
    EXPECT_EQ(r.loss.item(), 1.0);
    EXPECT_EQ(smoothness_loss(rows({{4, 2, 0}})).loss.item(), 0.0);
    EXPECT_THROW(smoothness_loss(rows({{1, 2}})), std::invalid_argument);
}

TEST(Smoothness, AffineSequencesHaveZeroLoss) {
    Rng rng(2);
    std::uniform_int_distribution<int> coef(-50, 50);
    for (int trial = 0; trial < 200; ++trial) {
        const double a = coef(rng), b = coef(rng);
        std::vector<double> v;
        for (int t = 0; t < 12; ++t) v.push_back(a * t + b);
        EXPECT_EQ(smoothness_loss(Tensor({1, 12}, v)).loss.item(), 0.0);
    }
    // Non-integer slopes leave only rounding error.
    std::uniform_real_distribution<double> real(-3.0, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
        const double a = real(rng), b = real(rng);
        std::vector<double> v;
        for (int t = 0; t < 12; ++t) v.push_back(a * t + b);
        EXPECT_LT(smoothness_loss(Tensor({1, 12}, v)).loss.item(), 1e-28);
    }
}

TEST(HpmConsistency, MatchingDynamicsGiveZero) {
    auto y = rows({{3, 1, 2, 2}});
    auto mono = monotonicity_loss(y);
    auto n_u = concat_cols({mono.residual, Tensor::matrix({{0.7}})});
    EXPECT_EQ(hpm_consistency_loss(mono.residual, n_u).loss.item(), 0.0);
}

TEST(HpmConsistency, ZeroDynamicsUnitDecay) {
    auto y = rows({{5, 4, 3, 2, 1}});
    auto r = hpm_consistency_loss(monotonicity_loss(y).residual, Tensor::zeros({1, 5}));
    for (double v : r.residual.values()) EXPECT_EQ(v, -1.0);
    EXPECT_EQ(r.loss.item(), 1.0);
    EXPECT_THROW(hpm_consistency_loss(monotonicity_loss(y).residual, Tensor::zeros({1, 4})), DimensionError);
}

TEST(HpmConsistency, GradientReachesPredictionsAndDynamics) {
    Rng rng(3);
    auto net = DynamicsNet::make(3, 8, 2, rng);
    auto features = random_matrix(6, 3, rng);
    auto t = Tensor({6, 1}, {0.0, 0.2, 0.4, 0.6, 0.8, 1.0});
    auto y = random_matrix(6, 1, rng).clone(true);
    auto loss = [&] {
        auto n_u = transpose(net.forward(features, y, t));
        return hpm_consistency_loss(monotonicity_loss(transpose(y)).residual, n_u).loss;
    };
    auto l = loss();
    l.backward();
    ParamList params;
    net.collect("dyn", params);
    double ygrad = 0.0, pgrad = 0.0;
    for (double g : y.grad()) ygrad += std::abs(g);
    for (auto& p : params)
        for (double g : p.tensor.grad()) pgrad += std::abs(g);
    EXPECT_GT(ygrad, 0.0);
    EXPECT_GT(pgrad, 0.0);
    y.zero_grad();
    for (auto& p : params) p.tensor.zero_grad();

    auto all = tensors_of(params);
    all.push_back(y);
    EXPECT_LT(finite_diff_check_params(loss, all), 1e-4);
}

TEST(BrokenLoss, HandFixtures) {
    std::vector<double> none{0.0, 0.0};
    EXPECT_EQ(broken_loss(rows({{3}, {4}}), none).item(), 0.0);
    std::vector<double> first{1.0, 0.0};
    EXPECT_EQ(broken_loss(rows({{2}, {7}}), first).item(), 2.0);
    std::vector<double> one{1.0};
    EXPECT_EQ(broken_loss(rows({{0}}), one).item(), 0.0);
    std::vector<double> bad{0.5};
    EXPECT_THROW(broken_loss(rows({{1}}), bad), std::invalid_argument);
}

TEST(BrokenLoss, GradientDescentDrivesPredictionToZero) {
    auto y = Tensor({1, 1}, {3.0}, true);
    std::vector<double> mask{1.0};
    double prev = std::abs(y[0]);
    for (int step = 0; step < 100; ++step) {
        y.zero_grad();
        broken_loss(y, mask).backward();
        y.mutable_values()[0] -= 0.05 * y.grad()[0];
        const double now = std::abs(y[0]);
        EXPECT_LT(now, prev);
        prev = now;
    }
    EXPECT_LT(prev, 3.0 * std::pow(0.9, 100) + 1e-12);
}

TEST(TotalPdeLoss, WeightedSum) {
    PhysicsTerms zero{Tensor::scalar(0), Tensor::scalar(0), Tensor::scalar(0), Tensor::scalar(0)};
    EXPECT_EQ(total_pde_loss(zero, {3, 2, 5, 7}).item(), 0.0);
    PhysicsTerms terms{Tensor::scalar(0.5), Tensor::scalar(1), Tensor::scalar(1), Tensor::scalar(2)};
    EXPECT_EQ(total_pde_loss(terms, {1, 1, 1, 1}).item(), 4.5);
    const PhysicsWeights w{0.1, 0.05, 2.0, 10.0};
    const PhysicsWeights w2{0.2, 0.1, 4.0, 20.0};
    EXPECT_EQ(total_pde_loss(terms, w2).item(), 2.0 * total_pde_loss(terms, w).item());
    EXPECT_THROW(total_pde_loss(terms, {1, -1, 1, 1}), std::invalid_argument);
}

TEST(TotalPdeLoss, LinearInEachWeight) {
    PhysicsTerms terms{Tensor::scalar(0.25), Tensor::scalar(1.5), Tensor::scalar(0.75), Tensor::scalar(2)};
    const PhysicsWeights base{1, 1, 1, 1};
    const double b = total_pde_loss(terms, base).item();
    const double term_values[4] = {0.25, 1.5, 0.75, 2};
    for (int k = 0; k < 4; ++k) {
        PhysicsWeights w = base;
        double* slot = k == 0 ? &w.w1 : k == 1 ? &w.w2 : k == 2 ? &w.w3 : &w.w4;
        *slot = 3.0;
        EXPECT_EQ(total_pde_loss(terms, w).item(), b + 2.0 * term_values[k]);
    }
}

TEST(PhysicsReport, TermsInvariantToBatchOrder) {
    Rng rng(4);
    auto y = random_matrix(4, 7, rng, 0, 5);
    auto n_u = random_matrix(4, 7, rng);
    std::vector<double> mask{1, 0, 0, 1};
    std::vector<double> mask_rev{1, 0, 0, 1};
    auto a = physics_report(y, n_u, mask, {});
    auto b = physics_report(reverse_rows(y), reverse_rows(n_u), mask_rev, {});
    EXPECT_NEAR(a.terms.monotonicity.item(), b.terms.monotonicity.item(), 1e-14);
    EXPECT_NEAR(a.terms.smoothness.item(), b.terms.smoothness.item(), 1e-14);
    EXPECT_NEAR(a.terms.consistency.item(), b.terms.consistency.item(), 1e-14);
    EXPECT_NEAR(a.terms.broken.item(), b.terms.broken.item(), 1e-14);
    EXPECT_GE(a.terms.monotonicity.item(), 0.0);
    EXPECT_EQ(a.total.item(), total_pde_loss(a.terms, {}).item());
}

TEST(DynamicsNet, ZeroOutputLayerGivesZero) {
    Rng rng(5);
    auto net = DynamicsNet::make(4, 16, 2, rng);
    net.zero_output_layer();
    auto out = net.forward(random_matrix(5, 4, rng), random_matrix(5, 1, rng), Tensor::full({5, 1}, 0.5));
    ASSERT_EQ(out.shape(), (Shape{5, 1}));
    for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(DynamicsNet, PerSampleIndependence) {
    Rng rng(6);
    auto net = DynamicsNet::make(3, 8, 2, rng);
    auto fa = random_matrix(4, 3, rng), fb = random_matrix(4, 3, rng);
    auto ya = random_matrix(4, 1, rng), yb = random_matrix(4, 1, rng);
    auto t = Tensor({4, 1}, {0.1, 0.2, 0.3, 0.4});
    auto a1 = net.forward(fa, ya, t);
    auto b1 = net.forward(fb, yb, t);
    auto b2 = net.forward(fb, yb, t);
    auto a2 = net.forward(fa, ya, t);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(a1[i], a2[i]);
        EXPECT_EQ(b1[i], b2[i]);
    }
}

TEST(DynamicsNet, RejectsUnnormalizedTimeInDebugMode) {
    Rng rng(7);
    auto net = DynamicsNet::make(2, 4, 2, rng);
    set_debug_checks(true);
    EXPECT_THROW(net.forward(Tensor::zeros({2, 2}), Tensor::zeros({2, 1}), Tensor({2, 1}, {0.5, 1.5})),
                 std::invalid_argument);
    EXPECT_THROW(net.forward(Tensor::zeros({2, 3}), Tensor::zeros({2, 1}), Tensor::zeros({2, 1})), DimensionError);
}

TEST(DynamicsNet, GradientsPassFiniteDifference) {
    Rng rng(8);
    auto net = DynamicsNet::make(3, 8, 2, rng);
    auto f = random_matrix(5, 3, rng);
    auto y = random_matrix(5, 1, rng);
    auto t = Tensor({5, 1}, {0.0, 0.25, 0.5, 0.75, 1.0});
    ParamList params;
    net.collect("dyn", params);
    EXPECT_LT(finite_diff_check_params([&] { return net.forward(f, y, t); }, tensors_of(params)), 1e-4);
    EXPECT_LT(finite_diff_check([&](const Tensor& x) { return net.forward(x, y, t); }, f), 1e-4);
}
