#pragma once

#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "rgpd/data/data.hpp"
#include "rgpd/graph/layers.hpp"
#include "rgpd/physics/physics.hpp"
#include "rgpd/rl/sac.hpp"
#include "rgpd/tau/tau.hpp"

namespace rgpd {

// temporal: nodes are the time steps of a window, linked as a chain.
// channel: nodes are sensor channels, linked by training-set correlation.
enum class GraphMode { temporal, channel };

struct ModelConfig {
    std::size_t input_dim = 14;
    std::size_t hidden = 16;
    std::size_t gat_heads = 2;
    double gat_slope = 0.2;
    GraphMode graph_mode = GraphMode::temporal;
    std::size_t gcrn_refine_steps = 2;
    double correlation_threshold = 0.5;
    std::size_t tau_kernel = 3;
    std::size_t tau_dilated_kernel = 3;
    std::size_t tau_dilation = 2;
    std::size_t mhsa_heads = 2;
    std::size_t time_embed = 8;
    std::size_t dynamics_width = 64;
    std::size_t dynamics_depth = 2;
    bool use_tau = true;
    bool use_rl = true;
    bool per_channel_action = false;
    SACConfig sac;
};

struct ModelState {
    ModelConfig config;
    GATParams gat;
    GCRNParams gcrn;
    std::optional<TAUParams> tau;
    std::optional<MHSAParams> mhsa;
    DynamicsNet dynamics;
    Linear time_embed;
    Linear head;
    SACPolicy sac;
    std::optional<Graph> channel_graph;

    static ModelState make(const ModelConfig& config, Rng& rng);
    // Everything trained by the supervised + physics loss (the SAC policy is separate).
    void collect(ParamList& out) const;
    void collect_sac(ParamList& out) const;
    // Deep copy: fresh leaves with the same values.
    ModelState clone() const;
};

// Per-graph structures shared by every window of one shape.
class GraphCache {
   public:
    struct Entry {
        Graph graph;
        NormalizedAdjacency adjacency;
        AttentionMask mask;
    };
    const Entry& temporal(std::size_t length);
    const Entry& channel(const Graph& graph);

   private:
    std::map<std::size_t, std::unique_ptr<Entry>> temporal_;
    std::unique_ptr<Entry> channel_;
};

struct BatchInput {
    std::vector<Tensor> x;       // each T x D
    std::vector<Tensor> t;       // each T x 1, normalized time
    std::vector<double> broken;  // one 0/1 flag per window
};

BatchInput batch_from_windows(const std::vector<const SensorWindow*>& windows);

enum class Mode { train, eval };

struct ForwardOptions {
    Mode mode = Mode::train;
    PhysicsWeights weights;
    // Overrides the controller's action (used for equality audits).
    std::optional<std::vector<double>> pinned_action;
};

struct ForwardOutput {
    Tensor y_last;  // B x 1
    Tensor y_seq;   // B x T
    Tensor n_u;     // B x T
    std::optional<PhysicsReport> physics;
    Tensor state;  // 1 x hidden
    std::vector<double> action;
    double log_prob = 0.0;
};

// GAT -> GCRN -> H_G (1 + a) -> TAU (or MHSA) -> [H, time embedding] -> linear head.
ForwardOutput forward_pass(const ModelState& model, const BatchInput& batch, GraphCache& graphs,
                           const ForwardOptions& options, Rng& rng);

}  // namespace rgpd
