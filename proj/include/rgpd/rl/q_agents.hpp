#pragma once

#include <array>
#include <optional>
#include <ostream>
#include <vector>

#include "rgpd/nn/nn.hpp"
#include "rgpd/physics/physics.hpp"

namespace rgpd {

struct QAgentConfig {
    double alpha = 0.1;
    double gamma = 0.9;
    double epsilon = 0.3;
    double epsilon_decay = 0.95;
    double epsilon_floor = 0.02;
    std::size_t bins = 8;
    double state_low = 1e-6;
    double state_high = 1e2;
};

// Interior edges of `bins` log-spaced intervals over [low, high]; values below
// the first edge land in bin 0 and values above the last in bin `bins - 1`.
std::vector<double> log_spaced_edges(std::size_t bins, double low, double high);

std::size_t discretize_state(double x, const std::vector<double>& edges);

const std::vector<double>& monotonicity_actions();
const std::vector<double>& smoothness_actions();
const std::vector<double>& consistency_actions();
const std::vector<double>& broken_actions();

struct QAgent {
    std::vector<double> actions;
    std::vector<double> edges;
    std::vector<double> q;  // bins x actions, row major
    double alpha = 0.1;
    double gamma = 0.9;
    double epsilon = 0.3;
    double epsilon_decay = 0.95;
    double epsilon_floor = 0.02;

    static QAgent make(std::vector<double> actions, const QAgentConfig& config);

    std::size_t bins() const { return edges.size() + 1; }
    std::size_t num_actions() const { return actions.size(); }
    double& at(std::size_t s, std::size_t a) { return q[s * actions.size() + a]; }
    double at(std::size_t s, std::size_t a) const { return q[s * actions.size() + a]; }
    void decay_epsilon();
};

struct ActionChoice {
    std::size_t index;
    double weight;
};

ActionChoice select_action(const QAgent& agent, std::size_t state_bin, Rng& rng);
void q_update(QAgent& agent, std::size_t s, std::size_t a, double reward, std::size_t s_next);
double compute_reward(double prev_rmse, double valid_rmse);

// Residual means that feed the four agents, in w1..w4 order.
using PhysicsState = std::array<double, 4>;

struct WeightRecord {
    std::size_t round;
    PhysicsWeights weights;
    double reward;
    double rmse;
};

struct AgentBank {
    std::array<QAgent, 4> agents;
    std::array<std::size_t, 4> last_states{};
    std::array<std::size_t, 4> last_actions{};
    std::optional<double> prev_rmse;
    std::vector<WeightRecord> history;

    static AgentBank make(const QAgentConfig& config);
    PhysicsWeights current_weights() const;
};

PhysicsWeights step_bank(AgentBank& bank, const PhysicsState& state, double valid_rmse, Rng& rng);

void write_weight_history(std::ostream& out, const std::vector<WeightRecord>& history);

}  // namespace rgpd
