#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "rgpd/autodiff/gradcheck.hpp"
#include "rgpd/autodiff/ops.hpp"
#include "rgpd/rl/q_agents.hpp"
#include "rgpd/rl/sac.hpp"

using namespace rgpd;

namespace {

QAgent small_agent(std::vector<double> actions, double eps = 0.0) {
    QAgentConfig c;
    c.epsilon = eps;
    c.epsilon_floor = 0.0;
    return QAgent::make(std::move(actions), c);
}

bool member(double w, const std::vector<double>& set) { return std::find(set.begin(), set.end(), w) != set.end(); }

}  // namespace

TEST(Discretize, Bins) {
    const std::vector<double> edges{1e-4, 1e-2, 1.0};
    EXPECT_EQ(discretize_state(0.0, edges), 0u);
    EXPECT_EQ(discretize_state(0.5, edges), 2u);
    EXPECT_EQ(discretize_state(1e9, edges), 3u);
    EXPECT_THROW(discretize_state(std::nan(""), edges), std::invalid_argument);
}

TEST(Discretize, DefaultEdgesSpanDecades) {
    auto edges = log_spaced_edges(8, 1e-6, 1e2);
    ASSERT_EQ(edges.size(), 7u);
    for (std::size_t i = 0; i < 7; ++i) EXPECT_NEAR(std::log10(edges[i]), -5.0 + double(i), 1e-12);
    EXPECT_EQ(discretize_state(1e-9, edges), 0u);
    EXPECT_EQ(discretize_state(1e5, edges), 7u);
}

TEST(SelectAction, GreedyAndTieBreak) {
    auto a = small_agent({1, 2, 3});
    Rng rng(1);
    a.at(0, 0) = 0;
    a.at(0, 1) = 5;
    a.at(0, 2) = 1;
    EXPECT_EQ(select_action(a, 0, rng).index, 1u);
    EXPECT_EQ(select_action(a, 0, rng).weight, 2.0);
    EXPECT_EQ(select_action(a, 1, rng).index, 0u);
    EXPECT_THROW(select_action(a, 99, rng), std::out_of_range);
}

TEST(SelectAction, FullExplorationIsUniform) {
    auto a = small_agent(monotonicity_actions(), 1.0);
    a.at(0, 3) = 100.0;
    Rng rng(2);
    const int n = 10000;
    std::vector<int> counts(6, 0);
    for (int i = 0; i < n; ++i) ++counts[select_action(a, 0, rng).index];
    const double p = 1.0 / 6.0, sigma = std::sqrt(n * p * (1 - p));
    for (int c : counts) EXPECT_LT(std::abs(c - n * p), 3 * sigma);
}

TEST(QUpdate, HandFixtures) {
    auto a = small_agent({1, 2});
    a.alpha = 0.5;
    a.gamma = 0.9;
    q_update(a, 2, 1, 1.0, 3);
    EXPECT_EQ(a.at(2, 1), 0.5);
    int nonzero = 0;
    for (double v : a.q) nonzero += v != 0.0;
    EXPECT_EQ(nonzero, 1);

    auto frozen = a;
    frozen.alpha = 0.0;
    q_update(frozen, 2, 1, 7.0, 2);
    EXPECT_EQ(frozen.q, a.q);

    auto b = small_agent({1, 2});
    b.alpha = 1.0;
    b.gamma = 0.0;
    b.at(0, 0) = 2.0;
    q_update(b, 0, 0, 0.0, 0);
    EXPECT_EQ(b.at(0, 0), 0.0);
}

TEST(QUpdate, TouchesExactlyOneCell) {
    Rng rng(3);
    auto a = small_agent(monotonicity_actions());
    std::uniform_real_distribution<double> u(-1, 1);
    for (auto& v : a.q) v = u(rng);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t s = rng() % a.bins(), act = rng() % 6, s2 = rng() % a.bins();
        auto before = a.q;
        q_update(a, s, act, u(rng), s2);
        for (std::size_t i = 0; i < a.q.size(); ++i)
            if (i != s * 6 + act) {
                EXPECT_EQ(a.q[i], before[i]);
            }
    }
}

TEST(Reward, ScaledRmseDelta) {
    EXPECT_NEAR(compute_reward(0.5, 0.4), 1.0, 1e-15);
    EXPECT_EQ(compute_reward(0.3, 0.3), 0.0);
    EXPECT_NEAR(compute_reward(0.4, 0.5), -1.0, 1e-15);
}

TEST(Epsilon, DecaysToFloor) {
    QAgentConfig c;
    auto a = QAgent::make(monotonicity_actions(), c);
    double prev = a.epsilon;
    for (int i = 0; i < 200; ++i) {
        a.decay_epsilon();
        EXPECT_LE(a.epsilon, prev);
        EXPECT_GE(a.epsilon, c.epsilon_floor);
        prev = a.epsilon;
    }
    EXPECT_EQ(a.epsilon, c.epsilon_floor);
    c.epsilon = 1.5;
    EXPECT_THROW(QAgent::make(monotonicity_actions(), c), std::invalid_argument);
}

TEST(Bandit, GreedyPolicyFindsBestArm) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        QAgentConfig c;
        auto a = QAgent::make(monotonicity_actions(), c);
        const std::size_t best = seed % 6;
        std::normal_distribution<double> noise(0.0, 0.1);
        for (int step = 0; step < 500; ++step) {
            auto choice = select_action(a, 0, rng);
            const double r = (choice.index == best ? 1.0 : -1.0) + noise(rng);
            q_update(a, 0, choice.index, r, 0);
            a.decay_epsilon();
        }
        a.epsilon = 0.0;
        EXPECT_EQ(select_action(a, 0, rng).index, best) << "seed " << seed;
    }
}

TEST(AgentBank, FirstCallSelectsThenUpdates) {
    Rng rng(4);
    QAgentConfig c;
    c.epsilon = 0.0;
    c.epsilon_floor = 0.0;
    auto bank = AgentBank::make(c);
    const PhysicsState state{0.01, 1e-4, 0.5, 0.0};
    bank.agents[0].at(3, 2) = 1e-3;
    step_bank(bank, state, 0.5, rng);
    for (const auto& a : bank.agents) {
        int nonzero = 0;
        for (double v : a.q) nonzero += v != 0.0;
        EXPECT_LE(nonzero, 1);
    }
    auto s = bank.last_states;
    auto act = bank.last_actions;
    std::array<double, 4> before{};
    for (std::size_t i = 0; i < 4; ++i) before[i] = bank.agents[i].at(s[i], act[i]);
    step_bank(bank, state, 0.4, rng);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_GT(bank.agents[i].at(s[i], act[i]), before[i]);
    EXPECT_NEAR(bank.history.back().reward, 1.0, 1e-12);
}

TEST(AgentBank, WeightsAlwaysInActionSets) {
    Rng rng(5);
    auto bank = AgentBank::make({});
    std::uniform_real_distribution<double> lg(-8, 3);
    for (int round = 0; round < 300; ++round) {
        PhysicsState st{std::pow(10, lg(rng)), std::pow(10, lg(rng)), std::pow(10, lg(rng)), std::pow(10, lg(rng))};
        auto w = step_bank(bank, st, std::uniform_real_distribution<double>(0, 1)(rng), rng);
        EXPECT_TRUE(member(w.w1, monotonicity_actions()));
        EXPECT_TRUE(member(w.w2, smoothness_actions()));
        EXPECT_TRUE(member(w.w3, consistency_actions()));
        EXPECT_TRUE(member(w.w4, broken_actions()));
    }
    std::ostringstream csv;
    write_weight_history(csv, bank.history);
    const auto text = csv.str();
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 301);
}

TEST(AgentBank, GreedyFixpointIsStable) {
    Rng rng(6);
    QAgentConfig c;
    c.epsilon = 0.0;
    c.epsilon_floor = 0.0;
    c.alpha = 0.0;
    auto bank = AgentBank::make(c);
    for (auto& a : bank.agents) std::fill(a.q.begin(), a.q.end(), 0.0), a.at(2, 4) = 1.0;
    const PhysicsState st{1e-4, 1e-4, 1e-4, 1e-4};
    auto w1 = step_bank(bank, st, 0.3, rng);
    for (int i = 0; i < 5; ++i) {
        auto w = step_bank(bank, st, 0.3, rng);
        EXPECT_EQ(w.w1, w1.w1);
        EXPECT_EQ(w.w2, w1.w2);
        EXPECT_EQ(w.w3, w1.w3);
        EXPECT_EQ(w.w4, w1.w4);
    }
    EXPECT_EQ(w1.w1, 5.0);
    EXPECT_EQ(w1.w2, 1.0);
}

// ---- SAC ----

namespace {

SACConfig tiny_config(std::size_t state_dim = 3) {
    SACConfig c;
    c.state_dim = state_dim;
    c.hidden = 16;
    c.batch_size = 8;
    c.capacity = 64;
    return c;
}

void fill_buffer(ReplayBuffer& buf, std::size_t n, std::size_t s_dim, std::size_t a_dim, Rng& rng) {
    std::uniform_real_distribution<double> u(-1, 1);
    for (std::size_t i = 0; i < n; ++i) {
        Transition t;
        for (std::size_t k = 0; k < s_dim; ++k) t.state.push_back(u(rng));
        for (std::size_t k = 0; k < a_dim; ++k) t.action.push_back(0.5 * u(rng));
        t.reward = u(rng);
        t.next_state = t.state;
        t.done = 1.0;
        buf.push(t);
    }
}

std::vector<double> snapshot(const ParamList& p) {
    std::vector<double> v;
    for (const auto& x : p) v.insert(v.end(), x.tensor.values().begin(), x.tensor.values().end());
    return v;
}

}  // namespace

TEST(SummarizeState, Means) {
    auto c = Tensor::full({4, 3}, 2.5);
    auto s = summarize_state({c, c});
    for (double v : s.values()) EXPECT_EQ(v, 2.5);
    auto h = Tensor::matrix({{1, 4}, {3, 8}});
    auto hp = Tensor::matrix({{3, 8}, {1, 4}});
    auto a = summarize_state({h}), b = summarize_state({hp});
    EXPECT_EQ(a[0], 2.0);
    EXPECT_EQ(a[1], 6.0);
    EXPECT_EQ(a[0], b[0]);
    EXPECT_EQ(a[1], b[1]);
    EXPECT_THROW(summarize_state({}), std::invalid_argument);
}

TEST(SampleAction, BoundedAndFiniteLogProb) {
    Rng rng(7);
    auto c = tiny_config();
    auto p = SACPolicy::make(c, rng);
    // Push the pre-squash mean far out so samples crowd the boundary.
    auto& last = p.actor.layers.back();
    auto b = last.bias.mutable_values();
    b[0] = 30.0;
    b[1] = kLogStdMax;
    std::vector<double> s{0.1, -0.2, 0.3};
    for (int i = 0; i < 10000; ++i) {
        auto a = sample_action(p, s, rng);
        EXPECT_LT(std::abs(a.action[0]), c.a_max);
        ASSERT_TRUE(std::isfinite(a.log_prob));
    }
}

TEST(SampleAction, DeterministicAndTinyStd) {
    Rng rng(8);
    auto c = tiny_config();
    auto p = SACPolicy::make(c, rng);
    std::vector<double> s{0.4, 0.1, -0.7};
    auto det = sample_action(p, s, rng, true);
    const auto mu = p.mean(Tensor({1, 3}, s));
    EXPECT_EQ(det.action[0], c.a_max * std::tanh(mu[0]));
    p.actor.layers.back().bias.mutable_values()[0] = 1e3;
    EXPECT_LT(sample_action(p, s, rng, true).action[0], c.a_max);

    for (auto& l : p.actor.layers) {
        std::fill(l.weight.mutable_values().begin(), l.weight.mutable_values().end(), 0.0);
        std::fill(l.bias.mutable_values().begin(), l.bias.mutable_values().end(), 0.0);
    }
    p.actor.layers.back().bias.mutable_values()[1] = kLogStdMin;
    for (int i = 0; i < 100; ++i) EXPECT_LT(std::abs(sample_action(p, s, rng).action[0]), 0.05);
}

TEST(Modulate, ScalesExactly) {
    Rng rng(9);
    auto h = Tensor::matrix({{1.5, -2.0}, {0.25, 3.0}});
    std::vector<double> zero{0.0}, half{0.5}, neg{-0.4};
    auto same = modulate(h, zero);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(same[i], h[i]);
    auto up = modulate(h, half);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(up[i], 1.5 * h[i]);
    auto down = modulate(h, neg);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(std::signbit(down[i]), std::signbit(h[i]));
    std::vector<double> per{0.5, -0.5};
    auto pc = modulate(h, per);
    EXPECT_EQ(pc.at(0, 0), 2.25);
    EXPECT_EQ(pc.at(1, 1), 1.5);
    std::vector<double> bad{0.1, 0.2, 0.3};
    EXPECT_THROW(modulate(h, bad), DimensionError);
}

TEST(SacReward, NegativeMse) {
    std::vector<double> a{1.0}, z{0.0};
    EXPECT_EQ(compute_sac_reward(a, z), -1.0);
    EXPECT_EQ(compute_sac_reward(a, a), 0.0);
    std::vector<double> two{1.0, 2.0};
    EXPECT_THROW(compute_sac_reward(two, z), DimensionError);
    Rng rng(10);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int i = 0; i < 100; ++i) {
        std::vector<double> p{u(rng), u(rng)}, t{u(rng), u(rng)};
        EXPECT_LE(compute_sac_reward(p, t), 0.0);
    }
}

TEST(ReplayBuffer, FifoEvictionAndDistinctSamples) {
    ReplayBuffer buf(5);
    for (int i = 0; i < 12; ++i) buf.push({{double(i)}, {0.0}, 0.0, {double(i)}, 1.0});
    EXPECT_EQ(buf.size(), 5u);
    EXPECT_EQ(buf[0].state[0], 7.0);
    EXPECT_EQ(buf[4].state[0], 11.0);
    Rng rng(11);
    for (int t = 0; t < 50; ++t) {
        auto s = buf.sample(5, rng);
        std::set<double> seen;
        for (const auto& x : s) seen.insert(x.state[0]);
        EXPECT_EQ(seen.size(), 5u);
    }
    EXPECT_THROW(buf.sample(6, rng), std::invalid_argument);
}

TEST(Critic, BellmanTargets) {
    Rng rng(12);
    auto c = tiny_config();
    c.gamma = 0.0;
    auto p = SACPolicy::make(c, rng);
    ReplayBuffer buf(16);
    fill_buffer(buf, 8, 3, 1, rng);
    auto batch = stack_batch(buf.sample(8, rng));
    // gamma = 0: both critics regress onto r directly.
    auto loss = critic_loss(p, batch, standard_normal(8, 1, rng)).item();
    double expect = 0.0;
    auto q1 = p.critic(p.q1, batch.states, batch.actions), q2 = p.critic(p.q2, batch.states, batch.actions);
    for (std::size_t i = 0; i < 8; ++i)
        expect += (std::pow(q1[i] - batch.rewards[i], 2) + std::pow(q2[i] - batch.rewards[i], 2)) / 8.0;
    EXPECT_NEAR(loss, expect, 1e-12);

    // done = 1 kills the bootstrap whatever gamma is.
    p.config.gamma = 0.99;
    EXPECT_NEAR(critic_loss(p, batch, standard_normal(8, 1, rng)).item(), expect, 1e-12);
}

TEST(Critic, LossDecreasesOnFixedBatch) {
    Rng rng(13);
    auto c = tiny_config();
    c.batch_size = 16;
    c.critic_lr = 1e-3;
    auto p = SACPolicy::make(c, rng);
    ReplayBuffer buf(16);
    fill_buffer(buf, 16, 3, 1, rng);
    std::vector<double> losses;
    for (int i = 0; i < 200; ++i) losses.push_back(critic_update(p, buf, rng));
    double first = 0, last = 0;
    for (int i = 0; i < 20; ++i) first += losses[i], last += losses[180 + i];
    EXPECT_LT(last, 0.5 * first);
}

TEST(Critic, UndersizedBufferIsNoop) {
    Rng rng(14);
    auto p = SACPolicy::make(tiny_config(), rng);
    ReplayBuffer buf(16);
    fill_buffer(buf, 3, 3, 1, rng);
    ParamList cp;
    p.collect_critics(cp);
    auto before = snapshot(cp);
    EXPECT_TRUE(std::isnan(critic_update(p, buf, rng)));
    EXPECT_TRUE(std::isnan(actor_update(p, buf, rng)));
    EXPECT_EQ(snapshot(cp), before);
}

namespace {

double mean_action(const SACPolicy& p, const Tensor& states) {
    NoGradGuard g;
    auto mu = p.mean(states);
    double s = 0.0;
    for (double m : mu.values()) s += p.config.a_max * std::tanh(m);
    return s / double(mu.numel());
}

}  // namespace

TEST(Actor, MovesTowardCriticOptimum) {
    Rng rng(15);
    auto c = tiny_config();
    c.alpha_ent = 0.0;
    c.actor_lr = 3e-3;
    c.batch_size = 16;
    auto p = SACPolicy::make(c, rng);
    // Fit the critics to r = -(a - 0.3)^2 from uniform actions, then freeze them.
    ReplayBuffer buf(512);
    std::uniform_real_distribution<double> u(-1, 1), ua(-0.5, 0.5);
    for (int i = 0; i < 512; ++i) {
        Transition t{{u(rng), u(rng), u(rng)}, {ua(rng)}, 0.0, {}, 1.0};
        t.reward = -std::pow(t.action[0] - 0.3, 2);
        t.next_state = t.state;
        buf.push(t);
    }
    p.critic_opt->set_lr(3e-3);
    for (int i = 0; i < 1500; ++i) critic_update(p, buf, rng);
    auto states = stack_batch(buf.sample(64, rng)).states;
    const double before = mean_action(p, states);
    for (int i = 0; i < 300; ++i) actor_update(p, buf, rng);
    const double after = mean_action(p, states);
    EXPECT_LT(std::abs(after - 0.3), std::abs(before - 0.3));
    EXPECT_LT(std::abs(after - 0.3), 0.1);
}

TEST(Actor, LargeEntropyWeightGrowsStd) {
    Rng rng(16);
    auto c = tiny_config();
    c.alpha_ent = 100.0;
    c.actor_lr = 1e-3;
    auto p = SACPolicy::make(c, rng);
    p.actor.layers.back().bias.mutable_values()[1] = -2.0;
    ReplayBuffer buf(64);
    fill_buffer(buf, 64, 3, 1, rng);
    auto states = stack_batch(buf.sample(32, rng)).states;
    auto mean_log_std = [&] {
        NoGradGuard g;
        auto ls = p.log_std(states);
        double s = 0;
        for (double v : ls.values()) s += v;
        return s / double(ls.numel());
    };
    const double before = mean_log_std();
    for (int i = 0; i < 100; ++i) actor_update(p, buf, rng);
    EXPECT_GT(mean_log_std(), before + 0.05);
}

TEST(Actor, LeavesCriticsUntouched) {
    Rng rng(17);
    auto p = SACPolicy::make(tiny_config(), rng);
    ReplayBuffer buf(32);
    fill_buffer(buf, 32, 3, 1, rng);
    ParamList cp, tp, ap;
    p.collect_critics(cp);
    p.collect_targets(tp);
    p.collect_actor(ap);
    auto c0 = snapshot(cp), t0 = snapshot(tp), a0 = snapshot(ap);
    for (int i = 0; i < 5; ++i) actor_update(p, buf, rng);
    EXPECT_EQ(snapshot(cp), c0);
    EXPECT_EQ(snapshot(tp), t0);
    EXPECT_NE(snapshot(ap), a0);
    for (const auto& x : cp) {
        if (!x.tensor.has_grad()) continue;
        for (double g : x.tensor.grad()) EXPECT_EQ(g, 0.0);
    }
}

TEST(Sac, GradientsPassFiniteDifference) {
    Rng rng(18);
    auto c = tiny_config();
    c.action_dim = 3;
    auto p = SACPolicy::make(c, rng);
    ReplayBuffer buf(16);
    fill_buffer(buf, 8, 3, 3, rng);
    auto batch = stack_batch(buf.sample(8, rng));
    auto noise = standard_normal(8, 3, rng);
    ParamList ap, cp;
    p.collect_actor(ap);
    p.collect_critics(cp);
    EXPECT_LT(finite_diff_check_params([&] { return actor_loss(p, batch, noise); }, tensors_of(ap)), 1e-4);
    EXPECT_LT(finite_diff_check_params([&] { return critic_loss(p, batch, noise); }, tensors_of(cp)), 1e-4);
}
