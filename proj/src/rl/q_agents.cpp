#include "rgpd/rl/q_agents.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rgpd {

std::vector<double> log_spaced_edges(std::size_t bins, double low, double high) {
    if (bins < 1) throw std::invalid_argument("need at least one state bin");
    if (!(low > 0.0) || !(high > low)) throw std::invalid_argument("log-spaced bins need 0 < low < high");
    const double lo = std::log10(low), hi = std::log10(high);
    std::vector<double> edges;
    for (std::size_t i = 1; i < bins; ++i) edges.push_back(std::pow(10.0, lo + (hi - lo) * double(i) / double(bins)));
    return edges;
}

std::size_t discretize_state(double x, const std::vector<double>& edges) {
    if (std::isnan(x)) throw std::invalid_argument("discretize_state: NaN state");
    if (x < 0.0) throw std::invalid_argument("discretize_state: negative state");
    return static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), x) - edges.begin());
}

const std::vector<double>& monotonicity_actions() {
    static const std::vector<double> a{0.1, 0.5, 1.0, 2.0, 5.0, 10.0};
    return a;
}
const std::vector<double>& smoothness_actions() {
    static const std::vector<double> a{0.01, 0.05, 0.1, 0.5, 1.0, 2.0};
    return a;
}
const std::vector<double>& consistency_actions() { return monotonicity_actions(); }
const std::vector<double>& broken_actions() { return monotonicity_actions(); }

QAgent QAgent::make(std::vector<double> actions, const QAgentConfig& config) {
    if (actions.empty()) throw std::invalid_argument("empty action space");
    if (config.epsilon < 0.0 || config.epsilon > 1.0 || config.epsilon_floor < 0.0 || config.epsilon_floor > 1.0) {
        throw std::invalid_argument("exploration rate must lie in [0,1]");
    }
    QAgent agent;
    agent.actions = std::move(actions);
    agent.edges = log_spaced_edges(config.bins, config.state_low, config.state_high);
    agent.q.assign(agent.bins() * agent.actions.size(), 0.0);
    agent.alpha = config.alpha;
    agent.gamma = config.gamma;
    agent.epsilon = config.epsilon;
    agent.epsilon_decay = config.epsilon_decay;
    agent.epsilon_floor = config.epsilon_floor;
    return agent;
}

void QAgent::decay_epsilon() { epsilon = std::max(epsilon_floor, std::min(epsilon, epsilon * epsilon_decay)); }

ActionChoice select_action(const QAgent& agent, std::size_t state_bin, Rng& rng) {
    if (state_bin >= agent.bins()) throw std::out_of_range("select_action: state bin out of range");
    std::size_t best = 0;
    if (agent.epsilon > 0.0 && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < agent.epsilon) {
        best = std::uniform_int_distribution<std::size_t>(0, agent.num_actions() - 1)(rng);
    } else {
        for (std::size_t a = 1; a < agent.num_actions(); ++a)
            if (agent.at(state_bin, a) > agent.at(state_bin, best)) best = a;
    }
    return {best, agent.actions[best]};
}

void q_update(QAgent& agent, std::size_t s, std::size_t a, double reward, std::size_t s_next) {
    if (s >= agent.bins() || s_next >= agent.bins() || a >= agent.num_actions()) {
        throw std::out_of_range("q_update: index out of range");
    }
    double next_max = agent.at(s_next, 0);
    for (std::size_t k = 1; k < agent.num_actions(); ++k) next_max = std::max(next_max, agent.at(s_next, k));
    double& q = agent.at(s, a);
    q += agent.alpha * (reward + agent.gamma * next_max - q);
}

double compute_reward(double prev_rmse, double valid_rmse) { return 10.0 * (prev_rmse - valid_rmse); }

AgentBank AgentBank::make(const QAgentConfig& config) {
    return {{QAgent::make(monotonicity_actions(), config), QAgent::make(smoothness_actions(), config),
             QAgent::make(consistency_actions(), config), QAgent::make(broken_actions(), config)},
            {},
            {},
            std::nullopt,
            {}};
}

PhysicsWeights AgentBank::current_weights() const {
    if (!prev_rmse) return {};
    return {agents[0].actions[last_actions[0]], agents[1].actions[last_actions[1]],
            agents[2].actions[last_actions[2]], agents[3].actions[last_actions[3]]};
}

PhysicsWeights step_bank(AgentBank& bank, const PhysicsState& state, double valid_rmse, Rng& rng) {
    if (!std::isfinite(valid_rmse) || valid_rmse < 0.0) throw std::invalid_argument("step_bank: invalid RMSE");
    double reward = 0.0;
    std::array<std::size_t, 4> bins{};
    for (std::size_t i = 0; i < 4; ++i) bins[i] = discretize_state(state[i], bank.agents[i].edges);
    if (bank.prev_rmse) {
        reward = compute_reward(*bank.prev_rmse, valid_rmse);
        for (std::size_t i = 0; i < 4; ++i)
            q_update(bank.agents[i], bank.last_states[i], bank.last_actions[i], reward, bins[i]);
    }
    for (std::size_t i = 0; i < 4; ++i) {
        bank.last_actions[i] = select_action(bank.agents[i], bins[i], rng).index;
        bank.agents[i].decay_epsilon();
    }
    bank.last_states = bins;
    bank.prev_rmse = valid_rmse;
    auto w = bank.current_weights();
    bank.history.push_back({bank.history.size(), w, reward, valid_rmse});
    return w;
}

void write_weight_history(std::ostream& out, const std::vector<WeightRecord>& history) {
    out << "round,w1,w2,w3,w4,reward,rmse\n";
    out.precision(17);
    for (const auto& r : history) {
        out << r.round << ',' << r.weights.w1 << ',' << r.weights.w2 << ',' << r.weights.w3 << ',' << r.weights.w4
            << ',' << r.reward << ',' << r.rmse << '\n';
    }
}

}  // namespace rgpd
