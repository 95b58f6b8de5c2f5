#include "rgpd/tau/tau.hpp"

#include <cmath>
#include <stdexcept>

#include "rgpd/autodiff/ops.hpp"

namespace rgpd {

TAUParams TAUParams::make(std::size_t channels, std::size_t k1, std::size_t k2, std::size_t dilation, Rng& rng) {
    if (k1 % 2 == 0 || k2 % 2 == 0) throw std::invalid_argument("TAU kernel sizes must be odd");
    if (dilation < 1) throw std::invalid_argument("TAU dilation must be >= 1");
    TAUParams p;
    p.depthwise = xavier_uniform(channels, k1, rng);
    p.dilated = xavier_uniform(channels, k2, rng);
    p.pointwise = xavier_uniform(channels, channels, rng);
    p.fc_weight = xavier_uniform(channels, channels, rng);
    p.fc_bias = Tensor::zeros({channels, 1}, true);
    p.dilation = dilation;
    return p;
}

void TAUParams::collect(const std::string& prefix, ParamList& out) const {
    out.push_back({prefix + ".depthwise", depthwise});
    out.push_back({prefix + ".dilated", dilated});
    out.push_back({prefix + ".pointwise", pointwise});
    out.push_back({prefix + ".fc_weight", fc_weight});
    out.push_back({prefix + ".fc_bias", fc_bias});
}

Tensor static_attention(const Tensor& h, const TAUParams& params) {
    if (h.rows() != params.channels()) {
        throw DimensionError("static_attention: input " + shape_str(h.shape()) + " for " +
                             std::to_string(params.channels()) + " channels");
    }
    auto local = depthwise_conv1d(h, params.depthwise);
    auto wide = dilated_depthwise_conv1d(local, params.dilated, params.dilation);
    return pointwise_conv(wide, params.pointwise);
}

Tensor dynamic_attention(const Tensor& h, const TAUParams& params) {
    if (h.rows() != params.channels()) {
        throw DimensionError("dynamic_attention: input " + shape_str(h.shape()) + " for " +
                             std::to_string(params.channels()) + " channels");
    }
    auto pooled = mean_cols(h);
    return sigmoid(add(matmul(params.fc_weight, pooled), params.fc_bias));
}

Tensor fuse_attention(const Tensor& h, const Tensor& sa, const Tensor& da) {
    // The per-channel gate is broadcast along time, then multiplied elementwise with H.
    return mul(mul_col(sa, da), h);
}

Tensor tau_forward(const Tensor& h, const TAUParams& params) {
    return fuse_attention(h, static_attention(h, params), dynamic_attention(h, params));
}

MHSAParams MHSAParams::make(std::size_t model_dim, std::size_t num_heads, Rng& rng) {
    if (num_heads == 0 || model_dim % num_heads != 0) {
        throw std::invalid_argument("model dim " + std::to_string(model_dim) + " not divisible by " +
                                    std::to_string(num_heads) + " heads");
    }
    const std::size_t dk = model_dim / num_heads;
    MHSAParams p;
    for (std::size_t k = 0; k < num_heads; ++k) {
        p.query.push_back(xavier_uniform(model_dim, dk, rng));
        p.key.push_back(xavier_uniform(model_dim, dk, rng));
        p.value.push_back(xavier_uniform(model_dim, dk, rng));
    }
    p.output = xavier_uniform(model_dim, model_dim, rng);
    return p;
}

void MHSAParams::collect(const std::string& prefix, ParamList& out) const {
    for (std::size_t k = 0; k < heads(); ++k) {
        const auto h = prefix + ".head" + std::to_string(k);
        out.push_back({h + ".query", query[k]});
        out.push_back({h + ".key", key[k]});
        out.push_back({h + ".value", value[k]});
    }
    out.push_back({prefix + ".output", output});
}

MhsaOutput multi_head_self_attention_detailed(const Tensor& x, const MHSAParams& params) {
    if (x.cols() != params.output.rows()) {
        throw DimensionError("multi_head_self_attention: input " + shape_str(x.shape()) + " for model dim " +
                             std::to_string(params.output.rows()));
    }
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(params.key_dim()));
    MhsaOutput out;
    std::vector<Tensor> heads;
    for (std::size_t k = 0; k < params.heads(); ++k) {
        auto q = matmul(x, params.query[k]);
        auto kk = matmul(x, params.key[k]);
        auto v = matmul(x, params.value[k]);
        auto weights = softmax(scale(matmul(q, transpose(kk)), inv_sqrt_dk), 1);
        heads.push_back(matmul(weights, v));
        out.attention.push_back(weights);
    }
    out.output = matmul(heads.size() == 1 ? heads.front() : concat_cols(heads), params.output);
    return out;
}

Tensor multi_head_self_attention(const Tensor& x, const MHSAParams& params) {
    return multi_head_self_attention_detailed(x, params).output;
}

}  // namespace rgpd
