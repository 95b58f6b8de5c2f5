#pragma once

#include <vector>

#include "rgpd/nn/nn.hpp"

namespace rgpd {

// Temporal attention over a C x T feature map, adapted from the 2-D video
// formulation to 1-D sequences: spatial maps become temporal ones, operator
// order is unchanged.
struct TAUParams {
    Tensor depthwise;   // C x k1
    Tensor dilated;     // C x k2
    Tensor pointwise;   // C x C
    Tensor fc_weight;   // C x C, applied as W * pooled
    Tensor fc_bias;     // C x 1
    std::size_t dilation = 2;

    static TAUParams make(std::size_t channels, std::size_t k1, std::size_t k2, std::size_t dilation, Rng& rng);
    std::size_t channels() const { return pointwise.rows(); }
    void collect(const std::string& prefix, ParamList& out) const;
};

// pointwise(dilated_depthwise(depthwise(H))), same shape as H.
Tensor static_attention(const Tensor& h, const TAUParams& params);
// sigmoid(FC(mean over time of H)), C x 1 gate in (0, 1).
Tensor dynamic_attention(const Tensor& h, const TAUParams& params);
// out(c, t) = sa(c, t) * da(c) * h(c, t)
Tensor fuse_attention(const Tensor& h, const Tensor& sa, const Tensor& da);
Tensor tau_forward(const Tensor& h, const TAUParams& params);

struct MHSAParams {
    std::vector<Tensor> query, key, value;  // per head, D x d_k
    Tensor output;                          // D x D

    static MHSAParams make(std::size_t model_dim, std::size_t num_heads, Rng& rng);
    std::size_t heads() const { return query.size(); }
    std::size_t key_dim() const { return query.front().cols(); }
    void collect(const std::string& prefix, ParamList& out) const;
};

struct MhsaOutput {
    Tensor output;                  // T x D
    std::vector<Tensor> attention;  // per head, T x T, rows sum to 1
};

// Scaled dot-product attention per head, heads concatenated then projected.
MhsaOutput multi_head_self_attention_detailed(const Tensor& x, const MHSAParams& params);
Tensor multi_head_self_attention(const Tensor& x, const MHSAParams& params);

}  // namespace rgpd
