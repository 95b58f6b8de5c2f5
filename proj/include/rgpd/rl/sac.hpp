#pragma once

#include <deque>
#include <memory>
#include <ostream>
#include <span>
#include <vector>

#include "rgpd/nn/nn.hpp"

namespace rgpd {

struct SACConfig {
    std::size_t state_dim = 16;
    std::size_t action_dim = 1;  // 1 = one global scale, state_dim = per-channel scales
    std::size_t hidden = 32;
    double a_max = 0.5;
    double alpha_ent = 0.2;
    double gamma = 0.99;
    double soft_update = 0.005;
    double actor_lr = 3e-4;
    double critic_lr = 3e-4;
    std::size_t batch_size = 32;
    std::size_t capacity = 10000;
};

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;
// tanh saturates to exactly 1 in double precision; actions stay strictly inside a_max.
inline constexpr double kSquashLimit = 1.0 - 1e-12;

struct Transition {
    std::vector<double> state;
    std::vector<double> action;
    double reward = 0.0;
    std::vector<double> next_state;
    double done = 1.0;
};

class ReplayBuffer {
   public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Transition t);
    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Transition& operator[](std::size_t i) const { return items_[i]; }
    // Uniform draw of n distinct transitions.
    std::vector<Transition> sample(std::size_t n, Rng& rng) const;

   private:
    std::size_t capacity_;
    std::deque<Transition> items_;
};

struct Minibatch {
    Tensor states, actions, rewards, next_states, done;  // B x S, B x A, B x 1, B x S, B x 1
};

Minibatch stack_batch(const std::vector<Transition>& batch);

struct SquashedSample {
    Tensor action;    // B x A, a_max * tanh(u)
    Tensor log_prob;  // B x 1
};

struct SACPolicy {
    SACConfig config;
    Mlp actor;  // state -> [mean, log_std]
    Mlp q1, q2, q1_target, q2_target;
    std::shared_ptr<Adam> actor_opt, critic_opt;

    static SACPolicy make(const SACConfig& config, Rng& rng);

    void collect_actor(ParamList& out) const;
    void collect_critics(ParamList& out) const;
    void collect_targets(ParamList& out) const;

    Tensor mean(const Tensor& states) const;
    Tensor log_std(const Tensor& states) const;
    // Reparameterized sample from fixed standard-normal noise (B x A).
    SquashedSample sample(const Tensor& states, const Tensor& noise) const;
    Tensor critic(const Mlp& q, const Tensor& states, const Tensor& actions) const;
};

Tensor standard_normal(std::size_t rows, std::size_t cols, Rng& rng);

// Mean over every node and step of the hidden states (each N x H) -> 1 x H.
Tensor summarize_state(const std::vector<Tensor>& hidden);

struct ActionSample {
    std::vector<double> action;
    double log_prob;
};

ActionSample sample_action(const SACPolicy& policy, std::span<const double> state, Rng& rng, bool deterministic = false);

// H * (1 + action); a single action scales everything, otherwise one per column.
Tensor modulate(const Tensor& h, std::span<const double> action);

double compute_sac_reward(std::span<const double> y_pred, std::span<const double> y_true);

Tensor critic_loss(const SACPolicy& policy, const Minibatch& batch, const Tensor& next_noise);
Tensor actor_loss(const SACPolicy& policy, const Minibatch& batch, const Tensor& noise);

// Both return the loss value, or NaN when the buffer is smaller than a batch.
double critic_update(SACPolicy& policy, const ReplayBuffer& buffer, Rng& rng);
double actor_update(SACPolicy& policy, const ReplayBuffer& buffer, Rng& rng);
void soft_update_targets(SACPolicy& policy);

struct ActionRecord {
    std::size_t step;
    std::vector<double> action;
    double reward;
};

void write_action_trace(std::ostream& out, const std::vector<ActionRecord>& trace);

}  // namespace rgpd
