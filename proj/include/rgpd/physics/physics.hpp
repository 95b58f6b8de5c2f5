#pragma once

#include <span>
#include <vector>

#include "rgpd/nn/nn.hpp"

namespace rgpd {

struct PhysicsWeights {
    double w1 = 1.0;  // monotonicity
    double w2 = 1.0;  // smoothness
    double w3 = 1.0;  // learned-dynamics consistency
    double w4 = 1.0;  // failed-device constraint
};

struct ResidualTerm {
    Tensor residual;  // the difference tensor the loss is built from
    Tensor loss;      // scalar
};

// diff1 = y[t+1] - y[t] (B x T-1); loss = mean(max(0, diff1)^2).
ResidualTerm monotonicity_loss(const Tensor& predictions);
// diff2 = second difference (B x T-2); loss = mean(diff2^2).
ResidualTerm smoothness_loss(const Tensor& predictions);
// residual = diff1 - n_u[:, :T-1]; loss = mean(residual^2). n_u is B x T.
ResidualTerm hpm_consistency_loss(const Tensor& diff1, const Tensor& n_u);
// mean over the batch of mask * y_last^2; y_last is B x 1, mask entries in {0, 1}.
Tensor broken_loss(const Tensor& last_predictions, std::span<const double> broken_mask);

struct PhysicsTerms {
    Tensor monotonicity, smoothness, consistency, broken;
};

Tensor total_pde_loss(const PhysicsTerms& terms, const PhysicsWeights& weights);

struct PhysicsReport {
    Tensor diff1, diff2, residual;
    PhysicsTerms terms;
    Tensor total;
};

// All four residuals on one batch of sequence predictions (B x T, T >= 3).
PhysicsReport physics_report(const Tensor& predictions, const Tensor& n_u, std::span<const double> broken_mask,
                             const PhysicsWeights& weights);

// Learned dynamics: per step [features, y_t, t] -> scalar, tanh MLP.
struct DynamicsNet {
    Mlp mlp;

    static DynamicsNet make(std::size_t feature_dim, std::size_t width, std::size_t depth, Rng& rng);
    std::size_t feature_dim() const { return mlp.layers.front().weight.rows() - 2; }
    void zero_output_layer();
    void collect(const std::string& prefix, ParamList& out) const;

    // features: T x F, predictions and t_norm: T x 1 -> T x 1.
    Tensor forward(const Tensor& features, const Tensor& predictions, const Tensor& t_norm) const;
};

}  // namespace rgpd
