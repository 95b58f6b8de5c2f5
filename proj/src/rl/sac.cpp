#include "rgpd/rl/sac.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>
#include <stdexcept>

#include "rgpd/autodiff/ops.hpp"

namespace rgpd {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
    if (items_.size() == capacity_) items_.pop_front();
    items_.push_back(std::move(t));
}

std::vector<Transition> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
    if (n > items_.size()) throw std::invalid_argument("cannot sample more transitions than stored");
    std::vector<Transition> out;
    out.reserve(n);
    std::sample(items_.begin(), items_.end(), std::back_inserter(out), n, rng);
    std::shuffle(out.begin(), out.end(), rng);
    return out;
}

namespace {

Tensor stack(const std::vector<Transition>& batch, std::vector<double> Transition::*field) {
    const std::size_t cols = (batch.front().*field).size();
    std::vector<double> v;
    v.reserve(batch.size() * cols);
    for (const auto& t : batch) {
        if ((t.*field).size() != cols) throw DimensionError("ragged transition batch");
        v.insert(v.end(), (t.*field).begin(), (t.*field).end());
    }
    return Tensor({batch.size(), cols}, std::move(v));
}

Tensor row_sum(const Tensor& x) { return matmul(x, Tensor::full({x.cols(), 1}, 1.0)); }

Tensor min_of(const Tensor& a, const Tensor& b) { return sub(a, relu(sub(a, b))); }

Tensor to_row(std::span<const double> v) { return Tensor({1, v.size()}, std::vector<double>(v.begin(), v.end())); }

}  // namespace

Minibatch stack_batch(const std::vector<Transition>& batch) {
    if (batch.empty()) throw std::invalid_argument("empty minibatch");
    std::vector<double> r, d;
    for (const auto& t : batch) {
        r.push_back(t.reward);
        d.push_back(t.done);
    }
    const std::size_t b = batch.size();
    return {stack(batch, &Transition::state), stack(batch, &Transition::action), Tensor({b, 1}, r),
            stack(batch, &Transition::next_state), Tensor({b, 1}, d)};
}

SACPolicy SACPolicy::make(const SACConfig& c, Rng& rng) {
    if (!(c.a_max > 0.0 && c.a_max < 1.0)) throw std::invalid_argument("a_max must lie in (0, 1)");
    if (c.action_dim != 1 && c.action_dim != c.state_dim) {
        throw std::invalid_argument("action dim must be 1 or the state dim");
    }
    SACPolicy p;
    p.config = c;
    const std::size_t s = c.state_dim, a = c.action_dim, h = c.hidden;
    p.actor = Mlp::make({s, h, h, 2 * a}, Activation::relu, rng);
    p.q1 = Mlp::make({s + a, h, h, 1}, Activation::relu, rng);
    p.q2 = Mlp::make({s + a, h, h, 1}, Activation::relu, rng);
    p.q1_target = Mlp::make({s + a, h, h, 1}, Activation::relu, rng);
    p.q2_target = Mlp::make({s + a, h, h, 1}, Activation::relu, rng);
    ParamList critics, targets, actor;
    p.collect_critics(critics);
    p.collect_targets(targets);
    for (std::size_t i = 0; i < critics.size(); ++i) {
        auto in = critics[i].tensor.values();
        auto out = targets[i].tensor.mutable_values();
        std::copy(in.begin(), in.end(), out.begin());
    }
    p.collect_actor(actor);
    p.actor_opt = std::make_shared<Adam>(tensors_of(actor), AdamConfig{.lr = c.actor_lr});
    p.critic_opt = std::make_shared<Adam>(tensors_of(critics), AdamConfig{.lr = c.critic_lr});
    return p;
}

void SACPolicy::collect_actor(ParamList& out) const { actor.collect("sac.actor", out); }

void SACPolicy::collect_critics(ParamList& out) const {
    q1.collect("sac.q1", out);
    q2.collect("sac.q2", out);
}

void SACPolicy::collect_targets(ParamList& out) const {
    q1_target.collect("sac.q1_target", out);
    q2_target.collect("sac.q2_target", out);
}

Tensor SACPolicy::mean(const Tensor& states) const {
    return slice_cols(actor.forward(states), 0, config.action_dim);
}

Tensor SACPolicy::log_std(const Tensor& states) const {
    const std::size_t a = config.action_dim;
    return clamp(slice_cols(actor.forward(states), a, 2 * a), kLogStdMin, kLogStdMax);
}

SquashedSample SACPolicy::sample(const Tensor& states, const Tensor& noise) const {
    const std::size_t a = config.action_dim;
    auto out = actor.forward(states);
    auto mu = slice_cols(out, 0, a);
    auto ls = clamp(slice_cols(out, a, 2 * a), kLogStdMin, kLogStdMax);
    auto u = add(mu, mul(exp(ls), noise));
    auto action = scale(clamp(rgpd::tanh(u), -kSquashLimit, kSquashLimit), config.a_max);
    // log(1 - tanh(u)^2) = 2 (log 2 - u - softplus(-2u)) stays finite where tanh saturates.
    auto log_jac = scale(sub(add_scalar(scale(u, -1.0), std::numbers::ln2), softplus(scale(u, -2.0))), 2.0);
    std::vector<double> gauss(noise.numel());
    for (std::size_t i = 0; i < gauss.size(); ++i)
        gauss[i] = -0.5 * noise[i] * noise[i] - 0.5 * std::log(2.0 * std::numbers::pi) - std::log(config.a_max);
    auto per_dim = sub(sub(Tensor(noise.shape(), gauss), ls), log_jac);
    return {action, row_sum(per_dim)};
}

Tensor SACPolicy::critic(const Mlp& q, const Tensor& states, const Tensor& actions) const {
    return q.forward(concat_cols({states, actions}));
}

Tensor standard_normal(std::size_t rows, std::size_t cols, Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(rows * cols);
    for (auto& x : v) x = n(rng);
    return Tensor({rows, cols}, std::move(v));
}

Tensor summarize_state(const std::vector<Tensor>& hidden) {
    if (hidden.empty() || hidden.front().numel() == 0) throw std::invalid_argument("summarize_state: empty input");
    const std::size_t h = hidden.front().cols();
    std::vector<double> acc(h, 0.0);
    std::size_t count = 0;
    for (const auto& t : hidden) {
        if (t.cols() != h) throw DimensionError("summarize_state: inconsistent hidden size");
        for (std::size_t r = 0; r < t.rows(); ++r)
            for (std::size_t c = 0; c < h; ++c) acc[c] += t.at(r, c);
        count += t.rows();
    }
    for (auto& v : acc) v /= static_cast<double>(count);
    return Tensor({1, h}, std::move(acc));
}

ActionSample sample_action(const SACPolicy& policy, std::span<const double> state, Rng& rng, bool deterministic) {
    NoGradGuard guard;
    const auto s = to_row(state);
    if (deterministic) {
        auto mu = policy.mean(s);
        ActionSample out{{}, 0.0};
        for (double m : mu.values())
            out.action.push_back(policy.config.a_max * std::clamp(std::tanh(m), -kSquashLimit, kSquashLimit));
        return out;
    }
    auto sample = policy.sample(s, standard_normal(1, policy.config.action_dim, rng));
    auto a = sample.action.values();
    return {{a.begin(), a.end()}, sample.log_prob.item()};
}

Tensor modulate(const Tensor& h, std::span<const double> action) {
    if (action.size() == 1) return scale(h, 1.0 + action[0]);
    if (action.size() != h.cols()) {
        throw DimensionError("modulate: " + std::to_string(action.size()) + " actions for " + shape_str(h.shape()));
    }
    std::vector<double> f(action.begin(), action.end());
    for (auto& v : f) v += 1.0;
    const std::size_t n = f.size();
    return mul_row(h, Tensor({1, n}, std::move(f)));
}

double compute_sac_reward(std::span<const double> y_pred, std::span<const double> y_true) {
    if (y_pred.size() != y_true.size() || y_pred.empty()) {
        throw DimensionError("compute_sac_reward: length mismatch");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < y_pred.size(); ++i) s += (y_pred[i] - y_true[i]) * (y_pred[i] - y_true[i]);
    return -s / static_cast<double>(y_pred.size());
}

Tensor critic_loss(const SACPolicy& policy, const Minibatch& batch, const Tensor& next_noise) {
    Tensor target;
    {
        NoGradGuard guard;
        auto next = policy.sample(batch.next_states, next_noise);
        auto q_next = min_of(policy.critic(policy.q1_target, batch.next_states, next.action),
                             policy.critic(policy.q2_target, batch.next_states, next.action));
        auto soft_v = sub(q_next, scale(next.log_prob, policy.config.alpha_ent));
        auto not_done = add_scalar(scale(batch.done, -1.0), 1.0);
        target = add(batch.rewards, scale(mul(not_done, soft_v), policy.config.gamma)).detach();
    }
    auto e1 = sub(policy.critic(policy.q1, batch.states, batch.actions), target);
    auto e2 = sub(policy.critic(policy.q2, batch.states, batch.actions), target);
    return add(mean(square(e1)), mean(square(e2)));
}

Tensor actor_loss(const SACPolicy& policy, const Minibatch& batch, const Tensor& noise) {
    auto s = policy.sample(batch.states, noise);
    auto q = min_of(policy.critic(policy.q1, batch.states, s.action), policy.critic(policy.q2, batch.states, s.action));
    return mean(sub(scale(s.log_prob, policy.config.alpha_ent), q));
}

void soft_update_targets(SACPolicy& policy) {
    ParamList critics, targets;
    policy.collect_critics(critics);
    policy.collect_targets(targets);
    const double tau = policy.config.soft_update;
    for (std::size_t i = 0; i < critics.size(); ++i) {
        auto src = critics[i].tensor.values();
        auto dst = targets[i].tensor.mutable_values();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = tau * src[k] + (1.0 - tau) * dst[k];
    }
}

double critic_update(SACPolicy& policy, const ReplayBuffer& buffer, Rng& rng) {
    if (buffer.size() < policy.config.batch_size) {
        std::cerr << "warning: replay buffer holds " << buffer.size() << " < " << policy.config.batch_size
                  << " transitions, skipping critic update\n";
        return std::nan("");
    }
    auto batch = stack_batch(buffer.sample(policy.config.batch_size, rng));
    auto noise = standard_normal(batch.states.rows(), policy.config.action_dim, rng);
    policy.critic_opt->zero_grad();
    auto loss = critic_loss(policy, batch, noise);
    loss.backward();
    policy.critic_opt->step();
    policy.critic_opt->zero_grad();
    soft_update_targets(policy);
    return loss.item();
}

double actor_update(SACPolicy& policy, const ReplayBuffer& buffer, Rng& rng) {
    if (buffer.size() < policy.config.batch_size) {
        std::cerr << "warning: replay buffer holds " << buffer.size() << " < " << policy.config.batch_size
                  << " transitions, skipping actor update\n";
        return std::nan("");
    }
    auto batch = stack_batch(buffer.sample(policy.config.batch_size, rng));
    auto noise = standard_normal(batch.states.rows(), policy.config.action_dim, rng);
    policy.actor_opt->zero_grad();
    auto loss = actor_loss(policy, batch, noise);
    loss.backward();
    policy.actor_opt->step();
    policy.actor_opt->zero_grad();
    // The loss also reaches the critics; drop those gradients so the next critic step starts clean.
    policy.critic_opt->zero_grad();
    return loss.item();
}

void write_action_trace(std::ostream& out, const std::vector<ActionRecord>& trace) {
    out << "step,action,reward\n";
    out.precision(17);
    for (const auto& r : trace) {
        out << r.step << ',';
        for (std::size_t i = 0; i < r.action.size(); ++i) out << (i ? ";" : "") << r.action[i];
        out << ',' << r.reward << '\n';
    }
}

}  // namespace rgpd
