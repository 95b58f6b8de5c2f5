#pragma once

#include <functional>
#include <vector>

#include "rgpd/autodiff/tensor.hpp"

namespace rgpd {

// Max over elements of |analytic - central| / (|analytic| + |central| + 1e-12).
// Elements whose absolute disagreement is below 1e-9 score 0.
// Non-scalar outputs are reduced to sum(f(x) * w) with fixed weights w drawn
// from [0.5, 1.5] so every output element contributes.
double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps = 1e-5);

// Same measure over a set of leaf parameters of a closure, perturbing the
// parameters in place. The closure must rebuild its graph on every call.
double finite_diff_check_params(const std::function<Tensor()>& f, std::vector<Tensor> params, double eps = 1e-5);

// While alive, every analytic gradient read by the checks on this thread is
// multiplied by `factor`: a stand-in for a broken backward rule.
class ScopedGradientFault {
   public:
    explicit ScopedGradientFault(double factor = 2.0);
    ~ScopedGradientFault();
    ScopedGradientFault(const ScopedGradientFault&) = delete;
    ScopedGradientFault& operator=(const ScopedGradientFault&) = delete;

   private:
    double previous_;
};

}  // namespace rgpd
