#include "rgpd/graph/layers.hpp"

#include <stdexcept>

#include "rgpd/autodiff/ops.hpp"

namespace rgpd {

Tensor gcn_layer(const Tensor& h, const NormalizedAdjacency& adj, const Tensor& weight, bool apply_relu) {
    if (h.rows() != adj.matrix.rows()) {
        throw DimensionError("gcn_layer: features " + shape_str(h.shape()) + " for a graph of " +
                             std::to_string(adj.matrix.rows()) + " nodes");
    }
    auto out = matmul(adj.matrix, matmul(h, weight));
    return apply_relu ? relu(out) : out;
}

Tensor gcn_layer(const Tensor& h, const Graph& graph, const Tensor& weight, bool apply_relu) {
    return gcn_layer(h, NormalizedAdjacency::of(graph), weight, apply_relu);
}

GATParams GATParams::make(std::size_t in_dim, std::size_t out_dim, std::size_t num_heads, double slope, Rng& rng) {
    if (num_heads == 0) throw std::invalid_argument("GAT needs at least one head");
    GATParams p;
    p.negative_slope = slope;
    for (std::size_t k = 0; k < num_heads; ++k) {
        auto w = xavier_uniform(in_dim, out_dim, rng);
        auto a = xavier_uniform(2 * out_dim, 1, rng);
        p.heads.push_back({w, a});
    }
    return p;
}

std::size_t GATParams::out_dim() const { return heads.front().weight.cols(); }

void GATParams::collect(const std::string& prefix, ParamList& out) const {
    for (std::size_t k = 0; k < heads.size(); ++k) {
        out.push_back({prefix + ".head" + std::to_string(k) + ".weight", heads[k].weight});
        out.push_back({prefix + ".head" + std::to_string(k) + ".attention", heads[k].attention});
    }
}

AttentionMask AttentionMask::of(const Graph& graph) {
    for (std::size_t i = 0; i < graph.num_nodes(); ++i) {
        bool any = false;
        for (const auto& e : graph.edges()) any = any || e.target == i;
        if (!any) throw std::invalid_argument("graph attention: node " + std::to_string(i) + " has no in-neighbor");
    }
    return {graph.adjacency(), graph.num_nodes()};
}

GatOutput gat_forward_detailed(const Tensor& h, const AttentionMask& mask, const GATParams& params) {
    if (h.rows() != mask.num_nodes) {
        throw DimensionError("gat_forward: features " + shape_str(h.shape()) + " for a graph of " +
                             std::to_string(mask.num_nodes) + " nodes");
    }
    const std::size_t d = params.out_dim();
    GatOutput out;
    Tensor acc;
    for (std::size_t k = 0; k < params.heads.size(); ++k) {
        const auto& head = params.heads[k];
        auto wh = matmul(h, head.weight);
        auto target_score = matmul(wh, slice_rows(head.attention, 0, d));
        auto neighbor_score = matmul(wh, slice_rows(head.attention, d, 2 * d));
        auto logits = leaky_relu(outer_add(target_score, neighbor_score), params.negative_slope);
        auto alpha = masked_softmax_rows(logits, mask.mask);
        auto msg = matmul(alpha, wh);
        acc = k == 0 ? msg : add(acc, msg);
        out.attention.push_back(alpha);
    }
    if (params.heads.size() > 1) acc = scale(acc, 1.0 / static_cast<double>(params.heads.size()));
    out.features = elu(acc);
    return out;
}

Tensor gat_forward(const Tensor& h, const AttentionMask& mask, const GATParams& params) {
    return gat_forward_detailed(h, mask, params).features;
}

Tensor gat_forward(const Tensor& h, const Graph& graph, const GATParams& params) {
    return gat_forward(h, AttentionMask::of(graph), params);
}

GCRNParams GCRNParams::make(std::size_t in_dim, std::size_t hidden, Rng& rng) {
    GCRNParams p;
    p.w_z = xavier_uniform(in_dim, hidden, rng);
    p.u_z = xavier_uniform(hidden, hidden, rng);
    p.b_z = Tensor::zeros({1, hidden}, true);
    p.w_r = xavier_uniform(in_dim, hidden, rng);
    p.u_r = xavier_uniform(hidden, hidden, rng);
    p.b_r = Tensor::zeros({1, hidden}, true);
    p.w_h = xavier_uniform(in_dim, hidden, rng);
    p.u_h = xavier_uniform(hidden, hidden, rng);
    p.b_h = Tensor::zeros({1, hidden}, true);
    return p;
}

void GCRNParams::collect(const std::string& prefix, ParamList& out) const {
    out.push_back({prefix + ".w_z", w_z});
    out.push_back({prefix + ".u_z", u_z});
    out.push_back({prefix + ".b_z", b_z});
    out.push_back({prefix + ".w_r", w_r});
    out.push_back({prefix + ".u_r", u_r});
    out.push_back({prefix + ".b_r", b_r});
    out.push_back({prefix + ".w_h", w_h});
    out.push_back({prefix + ".u_h", u_h});
    out.push_back({prefix + ".b_h", b_h});
}

Tensor gcrn_step(const Tensor& x, const Tensor& h_prev, const NormalizedAdjacency& adj, const GCRNParams& params) {
    const std::size_t n = adj.matrix.rows();
    if (x.rows() % n != 0 || h_prev.rows() != x.rows() || x.cols() != params.w_z.rows() ||
        h_prev.cols() != params.hidden()) {
        throw DimensionError("gcrn_step: input " + shape_str(x.shape()) + ", state " + shape_str(h_prev.shape()) +
                             " incompatible with " + std::to_string(n) + " nodes, W " +
                             shape_str(params.w_z.shape()) + ", U " + shape_str(params.u_z.shape()));
    }
    auto propagate = [&](const Tensor& v) { return v.rows() == n ? matmul(adj.matrix, v) : block_matmul(adj.matrix, v); };
    // A(xW) == (Ax)W, so the propagated input and state are shared across gates.
    auto ax = propagate(x);
    auto ah = propagate(h_prev);
    auto z = sigmoid(add_row(add(matmul(ax, params.w_z), matmul(ah, params.u_z)), params.b_z));
    auto r = sigmoid(add_row(add(matmul(ax, params.w_r), matmul(ah, params.u_r)), params.b_r));
    auto candidate = rgpd::tanh(add_row(add(matmul(ax, params.w_h), mul(r, matmul(ah, params.u_h))), params.b_h));
    auto keep = add_scalar(scale(z, -1.0), 1.0);
    return add(mul(keep, h_prev), mul(z, candidate));
}

std::vector<Tensor> gcrn_unroll(const std::vector<Tensor>& inputs, const NormalizedAdjacency& adj,
                                const GCRNParams& params, const Tensor* h0) {
    if (inputs.empty()) throw std::invalid_argument("gcrn_unroll: empty sequence");
    Tensor h = h0 ? *h0 : Tensor::zeros({adj.matrix.rows(), params.hidden()});
    std::vector<Tensor> states;
    states.reserve(inputs.size());
    for (const auto& x : inputs) {
        h = gcrn_step(x, h, adj, params);
        states.push_back(h);
    }
    return states;
}

}  // namespace rgpd
