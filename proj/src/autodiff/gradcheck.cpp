#include "rgpd/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "rgpd/autodiff/ops.hpp"

namespace rgpd {

namespace {

Tensor reduce_to_scalar(const Tensor& y) {
    if (y.numel() == 1) return y;
    std::mt19937_64 rng(0x5eedULL + y.numel());
    std::uniform_real_distribution<double> dist(0.5, 1.5);
    std::vector<double> w(y.numel());
    for (auto& v : w) v = dist(rng);
    return sum(mul(y, Tensor(y.shape(), std::move(w))));
}

double checked_value(const Tensor& loss) {
    const double v = loss.item();
    if (!std::isfinite(v)) throw NumericalError("finite_diff_check: function value is not finite");
    return v;
}

// Central differences at eps ~1e-5 carry ~1e-11 rounding noise, so absolute
// disagreements below kNoiseFloor count as agreement (structurally zero
// gradients, e.g. softmax shift invariance, would otherwise score ~1).
constexpr double kNoiseFloor = 1e-9;

thread_local double fault_factor = 1.0;

double rel_error(double analytic, double numeric) {
    const double diff = std::abs(analytic - numeric);
    if (diff < kNoiseFloor) return 0.0;
    return diff / (std::abs(analytic) + std::abs(numeric) + 1e-12);
}

}  // namespace

ScopedGradientFault::ScopedGradientFault(double factor) : previous_(fault_factor) { fault_factor = factor; }
ScopedGradientFault::~ScopedGradientFault() { fault_factor = previous_; }

double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps) {
    Tensor probe = x.clone(true);
    Tensor loss = reduce_to_scalar(f(probe));
    checked_value(loss);
    loss.backward();
    std::vector<double> analytic(probe.numel(), 0.0);
    if (probe.has_grad()) std::copy(probe.grad().begin(), probe.grad().end(), analytic.begin());
    for (auto& a : analytic) a *= fault_factor;

    double worst = 0.0;
    std::vector<double> base(x.values().begin(), x.values().end());
    for (std::size_t i = 0; i < base.size(); ++i) {
        auto shifted = base;
        shifted[i] = base[i] + eps;
        const double up = checked_value(reduce_to_scalar(f(Tensor(x.shape(), shifted))));
        shifted[i] = base[i] - eps;
        const double down = checked_value(reduce_to_scalar(f(Tensor(x.shape(), shifted))));
        worst = std::max(worst, rel_error(analytic[i], (up - down) / (2.0 * eps)));
    }
    return worst;
}

double finite_diff_check_params(const std::function<Tensor()>& f, std::vector<Tensor> params, double eps) {
    for (auto& p : params) p.zero_grad();
    Tensor loss = reduce_to_scalar(f());
    checked_value(loss);
    loss.backward();

    double worst = 0.0;
    for (auto& p : params) {
        std::vector<double> analytic(p.numel(), 0.0);
        if (p.has_grad()) std::copy(p.grad().begin(), p.grad().end(), analytic.begin());
        for (auto& a : analytic) a *= fault_factor;
        auto vals = p.mutable_values();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double orig = vals[i];
            vals[i] = orig + eps;
            const double up = checked_value(reduce_to_scalar(f()));
            vals[i] = orig - eps;
            const double down = checked_value(reduce_to_scalar(f()));
            vals[i] = orig;
            worst = std::max(worst, rel_error(analytic[i], (up - down) / (2.0 * eps)));
        }
        p.zero_grad();
    }
    return worst;
}

}  // namespace rgpd
