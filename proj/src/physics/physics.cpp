#include "rgpd/physics/physics.hpp"

#include <stdexcept>

#include "rgpd/autodiff/ops.hpp"

namespace rgpd {

ResidualTerm monotonicity_loss(const Tensor& predictions) {
    const std::size_t t = predictions.cols();
    if (t < 2) throw std::invalid_argument("monotonicity_loss needs at least 2 time steps");
    auto diff1 = sub(slice_cols(predictions, 1, t), slice_cols(predictions, 0, t - 1));
    return {diff1, mean(square(relu(diff1)))};
}

ResidualTerm smoothness_loss(const Tensor& predictions) {
    const std::size_t t = predictions.cols();
    if (t < 3) throw std::invalid_argument("smoothness_loss needs at least 3 time steps");
    auto step = sub(slice_cols(predictions, 1, t), slice_cols(predictions, 0, t - 1));
    auto diff2 = sub(slice_cols(step, 1, t - 1), slice_cols(step, 0, t - 2));
    return {diff2, mean(square(diff2))};
}

ResidualTerm hpm_consistency_loss(const Tensor& diff1, const Tensor& n_u) {
    if (n_u.rows() != diff1.rows() || n_u.cols() != diff1.cols() + 1) {
        throw DimensionError("hpm_consistency_loss: dynamics output " + shape_str(n_u.shape()) +
                             " does not align with diff1 " + shape_str(diff1.shape()));
    }
    auto residual = sub(diff1, slice_cols(n_u, 0, n_u.cols() - 1));
    return {residual, mean(square(residual))};
}

Tensor broken_loss(const Tensor& last_predictions, std::span<const double> broken_mask) {
    if (broken_mask.size() != last_predictions.numel()) {
        throw DimensionError("broken_loss: mask of " + std::to_string(broken_mask.size()) + " for predictions " +
                             shape_str(last_predictions.shape()));
    }
    for (double m : broken_mask) {
        if (m != 0.0 && m != 1.0) throw std::invalid_argument("broken_loss: mask must be binary");
    }
    Tensor mask(last_predictions.shape(), std::vector<double>(broken_mask.begin(), broken_mask.end()));
    return mean(mul(mask, square(last_predictions)));
}

Tensor total_pde_loss(const PhysicsTerms& terms, const PhysicsWeights& w) {
    if (w.w1 < 0.0 || w.w2 < 0.0 || w.w3 < 0.0 || w.w4 < 0.0) {
        throw std::invalid_argument("physics weights must be nonnegative");
    }
    return add(add(scale(terms.monotonicity, w.w1), scale(terms.smoothness, w.w2)),
               add(scale(terms.consistency, w.w3), scale(terms.broken, w.w4)));
}

PhysicsReport physics_report(const Tensor& predictions, const Tensor& n_u, std::span<const double> broken_mask,
                             const PhysicsWeights& weights) {
    auto mono = monotonicity_loss(predictions);
    auto smooth = smoothness_loss(predictions);
    auto hpm = hpm_consistency_loss(mono.residual, n_u);
    const std::size_t t = predictions.cols();
    auto broken = broken_loss(slice_cols(predictions, t - 1, t), broken_mask);
    PhysicsReport report{mono.residual, smooth.residual, hpm.residual, {mono.loss, smooth.loss, hpm.loss, broken}, {}};
    report.total = total_pde_loss(report.terms, weights);
    return report;
}

DynamicsNet DynamicsNet::make(std::size_t feature_dim, std::size_t width, std::size_t depth, Rng& rng) {
    std::vector<std::size_t> widths{feature_dim + 2};
    for (std::size_t i = 0; i < depth; ++i) widths.push_back(width);
    widths.push_back(1);
    return {Mlp::make(widths, Activation::tanh, rng)};
}

void DynamicsNet::zero_output_layer() {
    auto& last = mlp.layers.back();
    for (auto* t : {&last.weight, &last.bias}) {
        auto v = t->mutable_values();
        std::fill(v.begin(), v.end(), 0.0);
    }
}

void DynamicsNet::collect(const std::string& prefix, ParamList& out) const { mlp.collect(prefix, out); }

Tensor DynamicsNet::forward(const Tensor& features, const Tensor& predictions, const Tensor& t_norm) const {
    if (features.cols() != feature_dim() || predictions.rows() != features.rows() || t_norm.rows() != features.rows()) {
        throw DimensionError("dynamics: features " + shape_str(features.shape()) + ", predictions " +
                             shape_str(predictions.shape()) + ", time " + shape_str(t_norm.shape()) +
                             " for feature dim " + std::to_string(feature_dim()));
    }
    if (debug_checks()) {
        for (double t : t_norm.values())
            if (t < 0.0 || t > 1.0) throw std::invalid_argument("dynamics: time stamps must be normalized to [0,1]");
    }
    return mlp.forward(concat_cols({features, predictions, t_norm}));
}

}  // namespace rgpd
