#include "rgpd/nn/nn.hpp"

#include <cmath>

#include "rgpd/autodiff/ops.hpp"

namespace rgpd {

std::size_t param_count(const ParamList& params) {
    std::size_t n = 0;
    for (const auto& p : params) n += p.tensor.numel();
    return n;
}

std::vector<Tensor> tensors_of(const ParamList& params) {
    std::vector<Tensor> out;
    out.reserve(params.size());
    for (const auto& p : params) out.push_back(p.tensor);
    return out;
}

void copy_param_values(const ParamList& src, ParamList& dst) {
    if (src.size() != dst.size()) throw DimensionError("parameter list sizes differ");
    for (std::size_t i = 0; i < src.size(); ++i) {
        if (src[i].name != dst[i].name || src[i].tensor.shape() != dst[i].tensor.shape()) {
            throw DimensionError("parameter mismatch at " + src[i].name + " vs " + dst[i].name);
        }
        auto out = dst[i].tensor.mutable_values();
        auto in = src[i].tensor.values();
        std::copy(in.begin(), in.end(), out.begin());
    }
}

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> d(-bound, bound);
    std::vector<double> v(fan_in * fan_out);
    for (auto& x : v) x = d(rng);
    return Tensor({fan_in, fan_out}, std::move(v), true);
}

Tensor activate(const Tensor& x, Activation act) {
    switch (act) {
        case Activation::relu: return relu(x);
        case Activation::tanh: return rgpd::tanh(x);
        case Activation::elu: return elu(x);
        case Activation::none: break;
    }
    return x;
}

Linear Linear::xavier(std::size_t in, std::size_t out, Rng& rng) {
    return {xavier_uniform(in, out, rng), Tensor::zeros({1, out}, true)};
}

Tensor Linear::forward(const Tensor& x) const { return add_row(matmul(x, weight), bias); }

void Linear::collect(const std::string& prefix, ParamList& out) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
}

Mlp Mlp::make(const std::vector<std::size_t>& widths, Activation act, Rng& rng) {
    Mlp mlp;
    mlp.act = act;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) mlp.layers.push_back(Linear::xavier(widths[i], widths[i + 1], rng));
    return mlp;
}

Tensor Mlp::forward(const Tensor& x) const {
    Tensor h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        h = layers[i].forward(h);
        if (i + 1 < layers.size()) h = activate(h, act);
    }
    return h;
}

void Mlp::collect(const std::string& prefix, ParamList& out) const {
    for (std::size_t i = 0; i < layers.size(); ++i) layers[i].collect(prefix + "." + std::to_string(i), out);
}

Adam::Adam(std::vector<Tensor> params, AdamConfig config) : params_(std::move(params)), config_(config) {
    for (const auto& p : params_) {
        m_.emplace_back(p.numel(), 0.0);
        v_.emplace_back(p.numel(), 0.0);
    }
}

void Adam::step(double grad_scale) {
    double clip = 1.0;
    if (config_.clip_norm > 0.0) {
        double sq = 0.0;
        for (const auto& p : params_)
            if (p.has_grad())
                for (double g : p.grad()) sq += g * g * grad_scale * grad_scale;
        const double norm = std::sqrt(sq);
        if (norm > config_.clip_norm) clip = config_.clip_norm / norm;
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto& p = params_[k];
        if (!p.has_grad()) continue;
        auto g = p.grad();
        auto w = p.mutable_values();
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = g[i] * grad_scale * clip;
            m_[k][i] = config_.beta1 * m_[k][i] + (1.0 - config_.beta1) * gi;
            v_[k][i] = config_.beta2 * v_[k][i] + (1.0 - config_.beta2) * gi * gi;
            w[i] -= config_.lr * (m_[k][i] / bc1) / (std::sqrt(v_[k][i] / bc2) + config_.eps);
        }
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

}  // namespace rgpd
