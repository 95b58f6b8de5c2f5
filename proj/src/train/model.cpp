#include "rgpd/train/model.hpp"

#include <stdexcept>

#include "rgpd/autodiff/ops.hpp"

namespace rgpd {

ModelState ModelState::make(const ModelConfig& c, Rng& rng) {
    if (c.input_dim == 0 || c.hidden == 0) throw std::invalid_argument("model dimensions must be positive");
    if (c.gcrn_refine_steps == 0) throw std::invalid_argument("GCRN needs at least one step");
    ModelState m;
    m.config = c;
    const std::size_t node_features = c.graph_mode == GraphMode::temporal ? c.input_dim : 1;
    m.gat = GATParams::make(node_features, c.hidden, c.gat_heads, c.gat_slope, rng);
    m.gcrn = GCRNParams::make(c.hidden, c.hidden, rng);
    if (c.use_tau) {
        m.tau = TAUParams::make(c.hidden, c.tau_kernel, c.tau_dilated_kernel, c.tau_dilation, rng);
    } else {
        m.mhsa = MHSAParams::make(c.hidden, c.mhsa_heads, rng);
    }
    m.dynamics = DynamicsNet::make(c.hidden, c.dynamics_width, c.dynamics_depth, rng);
    m.time_embed = Linear::xavier(1, c.time_embed, rng);
    m.head = Linear::xavier(c.hidden + c.time_embed, 1, rng);
    SACConfig sc = c.sac;
    sc.state_dim = c.hidden;
    sc.action_dim = c.per_channel_action ? c.hidden : 1;
    m.config.sac = sc;
    m.sac = SACPolicy::make(sc, rng);
    return m;
}

void ModelState::collect(ParamList& out) const {
    gat.collect("gat", out);
    gcrn.collect("gcrn", out);
    if (tau) tau->collect("tau", out);
    if (mhsa) mhsa->collect("mhsa", out);
    dynamics.collect("dynamics", out);
    time_embed.collect("time_embed", out);
    head.collect("head", out);
}

void ModelState::collect_sac(ParamList& out) const {
    sac.collect_actor(out);
    sac.collect_critics(out);
    sac.collect_targets(out);
}

ModelState ModelState::clone() const {
    Rng rng(0);
    ModelState m = make(config, rng);
    ParamList src, dst;
    collect(src);
    collect_sac(src);
    m.collect(dst);
    m.collect_sac(dst);
    copy_param_values(src, dst);
    m.channel_graph = channel_graph;
    return m;
}

const GraphCache::Entry& GraphCache::temporal(std::size_t length) {
    auto& slot = temporal_[length];
    if (!slot) {
        auto g = build_temporal_chain_graph(length);
        slot = std::make_unique<Entry>(Entry{g, NormalizedAdjacency::of(g), AttentionMask::of(g)});
    }
    return *slot;
}

const GraphCache::Entry& GraphCache::channel(const Graph& graph) {
    if (!channel_) channel_ = std::make_unique<Entry>(Entry{graph, NormalizedAdjacency::of(graph), AttentionMask::of(graph)});
    return *channel_;
}

BatchInput batch_from_windows(const std::vector<const SensorWindow*>& windows) {
    BatchInput b;
    for (const auto* w : windows) {
        b.x.emplace_back(Shape{w->length, w->channels}, w->x);
        b.t.emplace_back(Shape{w->length, 1}, w->t);
        b.broken.push_back(w->broken ? 1.0 : 0.0);
    }
    return b;
}

namespace {

Tensor stack_rows(const std::vector<Tensor>& parts) { return parts.size() == 1 ? parts.front() : concat_rows(parts); }

// Temporal mode: H_G for the whole batch as one (B*T) x hidden matrix. The GCRN
// refines from h = 0 over the chain graph shared by every window.
Tensor encode_temporal(const ModelState& m, const BatchInput& batch, std::size_t steps, GraphCache& graphs) {
    const auto& g = graphs.temporal(steps);
    std::vector<Tensor> gat_rows;
    for (const auto& x : batch.x) gat_rows.push_back(gat_forward(x, g.mask, m.gat));
    const Tensor x = stack_rows(gat_rows);
    Tensor h = Tensor::zeros({x.rows(), m.config.hidden});
    for (std::size_t k = 0; k < m.config.gcrn_refine_steps; ++k) h = gcrn_step(x, h, g.adjacency, m.gcrn);
    return h;
}

// Channel mode: per time step, D x hidden states of one window.
std::vector<Tensor> encode_channel(const ModelState& m, const Tensor& x, GraphCache& graphs) {
    if (!m.channel_graph) throw std::logic_error("channel graph mode without a channel graph");
    const auto& g = graphs.channel(*m.channel_graph);
    std::vector<Tensor> per_step;
    for (std::size_t t = 0; t < x.rows(); ++t) per_step.push_back(gat_forward(transpose(slice_rows(x, t, t + 1)), g.mask, m.gat));
    return gcrn_unroll(per_step, g.adjacency, m.gcrn);
}

}  // namespace

ForwardOutput forward_pass(const ModelState& m, const BatchInput& batch, GraphCache& graphs,
                           const ForwardOptions& options, Rng& rng) {
    const std::size_t b = batch.x.size();
    if (b == 0) throw std::invalid_argument("forward_pass: empty batch");
    if (batch.t.size() != b || batch.broken.size() != b) throw DimensionError("forward_pass: ragged batch");
    const std::size_t steps = batch.x.front().rows();
    for (std::size_t i = 0; i < b; ++i) {
        if (batch.x[i].rows() != steps || batch.t[i].rows() != steps) {
            throw DimensionError("forward_pass: windows in one batch must share a length");
        }
        if (batch.x[i].cols() != m.config.input_dim) {
            throw DimensionError("forward_pass: window has " + std::to_string(batch.x[i].cols()) +
                                 " channels, model expects " + std::to_string(m.config.input_dim));
        }
    }
    if (steps < 3) throw DimensionError("forward_pass: windows need at least 3 steps");

    const bool temporal = m.config.graph_mode == GraphMode::temporal;
    Tensor h_temporal;
    std::vector<std::vector<Tensor>> h_channel(temporal ? 0 : b);
    std::vector<Tensor> all_states;
    if (temporal) {
        h_temporal = encode_temporal(m, batch, steps, graphs);
        all_states.push_back(h_temporal);
    } else {
        for (std::size_t i = 0; i < b; ++i) {
            h_channel[i] = encode_channel(m, batch.x[i], graphs);
            all_states.insert(all_states.end(), h_channel[i].begin(), h_channel[i].end());
        }
    }

    ForwardOutput out;
    out.state = summarize_state(all_states);
    if (options.pinned_action) {
        out.action = *options.pinned_action;
    } else if (m.config.use_rl) {
        auto s = sample_action(m.sac, out.state.values(), rng, options.mode == Mode::eval);
        out.action = std::move(s.action);
        out.log_prob = s.log_prob;
    } else {
        out.action.assign(m.config.sac.action_dim, 0.0);
    }

    // Per window: H_G (1 + a) as hidden x T, then the attention block.
    std::vector<Tensor> h_rows;
    const Tensor modulated = temporal ? modulate(h_temporal, out.action) : Tensor();
    for (std::size_t i = 0; i < b; ++i) {
        Tensor h_ct;
        if (temporal) {
            h_ct = transpose(b == 1 ? modulated : slice_rows(modulated, i * steps, (i + 1) * steps));
        } else {
            std::vector<Tensor> pooled;
            for (const auto& h : h_channel[i]) pooled.push_back(mean_rows(modulate(h, out.action)));
            h_ct = transpose(concat_rows(pooled));
        }
        h_rows.push_back(m.tau ? transpose(tau_forward(h_ct, *m.tau)) : multi_head_self_attention(transpose(h_ct), *m.mhsa));
    }

    // Everything after the attention block is row-wise, so windows stay
    // stacked into one (B*T) x . matrix from here on.
    const Tensor h_t = stack_rows(h_rows);
    const Tensor t = stack_rows(batch.t);
    auto t_emb = rgpd::tanh(m.time_embed.forward(t));
    auto y_col = m.head.forward(concat_cols({h_t, t_emb}));
    out.y_seq = reshape(y_col, {b, steps});
    out.y_last = slice_cols(out.y_seq, steps - 1, steps);
    if (options.mode == Mode::train) {
        out.n_u = reshape(m.dynamics.forward(h_t, y_col, t), {b, steps});
        out.physics = physics_report(out.y_seq, out.n_u, batch.broken, options.weights);
    }
    return out;
}

}  // namespace rgpd
