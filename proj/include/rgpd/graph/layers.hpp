#pragma once

#include <vector>

#include "rgpd/graph/graph.hpp"
#include "rgpd/nn/nn.hpp"

namespace rgpd {

// relu(A_norm * H * W). With activation off the layer is linear, which is how
// the recurrent gates use it.
Tensor gcn_layer(const Tensor& h, const NormalizedAdjacency& adj, const Tensor& weight, bool apply_relu = true);
Tensor gcn_layer(const Tensor& h, const Graph& graph, const Tensor& weight, bool apply_relu = true);

struct GatHead {
    Tensor weight;     // in_dim x head_dim
    Tensor attention;  // 2*head_dim x 1; first half scores the target, second the neighbor
};

struct GATParams {
    std::vector<GatHead> heads;
    double negative_slope = 0.2;

    static GATParams make(std::size_t in_dim, std::size_t out_dim, std::size_t num_heads, double slope, Rng& rng);
    std::size_t out_dim() const;
    void collect(const std::string& prefix, ParamList& out) const;
};

// Adjacency mask precomputed once per graph for attention layers.
struct AttentionMask {
    std::vector<double> mask;
    std::size_t num_nodes = 0;
    static AttentionMask of(const Graph& graph);
};

struct GatOutput {
    Tensor features;                 // N x out_dim after ELU
    std::vector<Tensor> attention;   // per head, N x N, row i over in-neighbors of i
};

// Multi-head graph attention with head outputs averaged before the ELU.
GatOutput gat_forward_detailed(const Tensor& h, const AttentionMask& mask, const GATParams& params);
Tensor gat_forward(const Tensor& h, const AttentionMask& mask, const GATParams& params);
Tensor gat_forward(const Tensor& h, const Graph& graph, const GATParams& params);

struct GCRNParams {
    Tensor w_z, u_z, b_z;
    Tensor w_r, u_r, b_r;
    Tensor w_h, u_h, b_h;

    static GCRNParams make(std::size_t in_dim, std::size_t hidden, Rng& rng);
    std::size_t hidden() const { return u_z.cols(); }
    void collect(const std::string& prefix, ParamList& out) const;
};

// One recurrent step where every input and hidden transform is a linear graph
// convolution:
//   z = sigmoid(G(x)W_z + G(h)U_z + b_z), r = sigmoid(G(x)W_r + G(h)U_r + b_r)
//   h~ = tanh(G(x)W_h + r * (G(h)U_h) + b_h), h' = (1 - z) * h + z * h~
// x and h_prev may stack the node rows of several graphs sharing `adj`.
Tensor gcrn_step(const Tensor& x, const Tensor& h_prev, const NormalizedAdjacency& adj, const GCRNParams& params);

// Runs gcrn_step over a sequence of N x F inputs; h0 defaults to zeros.
std::vector<Tensor> gcrn_unroll(const std::vector<Tensor>& inputs, const NormalizedAdjacency& adj,
                                const GCRNParams& params, const Tensor* h0 = nullptr);

}  // namespace rgpd
