#include "rgpd/gradcheck/suite.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <random>
#include <stdexcept>

#include "rgpd/autodiff/gradcheck.hpp"
#include "rgpd/autodiff/ops.hpp"
#include "rgpd/graph/layers.hpp"
#include "rgpd/physics/physics.hpp"
#include "rgpd/rl/sac.hpp"
#include "rgpd/tau/tau.hpp"

namespace rgpd {

namespace {

std::size_t dim(Rng& rng, std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); }

Tensor uniform(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(r * c);
    for (auto& x : v) x = d(rng);
    return Tensor({r, c}, std::move(v));
}

// A random connected undirected graph: a spanning chain plus extra edges, with self-loops.
Graph random_graph(Rng& rng, std::size_t n) {
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i) edges.push_back({i, i});
    for (std::size_t i = 1; i < n; ++i) {
        edges.push_back({i - 1, i});
        edges.push_back({i, i - 1});
    }
    std::bernoulli_distribution extra(0.3);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 2; j < n; ++j)
            if (extra(rng)) {
                edges.push_back({i, j});
                edges.push_back({j, i});
            }
    return Graph(n, std::move(edges));
}

// Input and parameter gradients of one closure, as the worse of the two.
double input_and_params(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, const ParamList& params) {
    const double ex = finite_diff_check(f, x);
    const double ep = finite_diff_check_params([&] { return f(x); }, tensors_of(params));
    return std::max(ex, ep);
}

// Freshly initialized biases are exactly zero, so a dead relu layer feeds the
// next one a pre-activation sitting on the kink. Random biases avoid that.
void randomize_biases(const SACPolicy& p, Rng& rng) {
    ParamList ps;
    p.collect_actor(ps);
    p.collect_critics(ps);
    std::uniform_real_distribution<double> d(-0.5, 0.5);
    for (auto& q : ps)
        if (q.name.ends_with("bias"))
            for (auto& v : q.tensor.mutable_values()) v = d(rng);
}

Minibatch random_minibatch(Rng& rng, std::size_t b, std::size_t s, std::size_t a, double a_max) {
    return {uniform(rng, b, s), uniform(rng, b, a, -a_max, a_max), uniform(rng, b, 1), uniform(rng, b, s),
            uniform(rng, b, 1, 0.0, 1.0)};
}

}  // namespace

std::vector<GradProbe> layer_probes() {
    std::vector<GradProbe> probes;
    probes.push_back({"layer.gcn", [](std::uint64_t seed) {
                          Rng rng(seed);
                          const auto n = dim(rng, 2, 6), f = dim(rng, 1, 4), o = dim(rng, 1, 4);
                          const auto adj = NormalizedAdjacency::of(random_graph(rng, n));
                          auto w = xavier_uniform(f, o, rng);
                          ParamList ps{{"w", w}};
                          return input_and_params([&](const Tensor& h) { return gcn_layer(h, adj, w, true); },
                                                  uniform(rng, n, f), ps);
                      }});
    probes.push_back({"layer.gat", [](std::uint64_t seed) {
                          Rng rng(seed);
                          const auto n = dim(rng, 2, 6), f = dim(rng, 1, 4), o = dim(rng, 1, 4), heads = dim(rng, 1, 3);
                          const auto mask = AttentionMask::of(random_graph(rng, n));
                          auto p = GATParams::make(f, o, heads, 0.2, rng);
                          ParamList ps;
                          p.collect("gat", ps);
                          return input_and_params([&](const Tensor& h) { return gat_forward(h, mask, p); },
                                                  uniform(rng, n, f), ps);
                      }});
    probes.push_back({"layer.gcrn_step", [](std::uint64_t seed) {
                          Rng rng(seed);
                          const auto n = dim(rng, 2, 5), f = dim(rng, 1, 4), h = dim(rng, 1, 4);
                          const auto adj = NormalizedAdjacency::of(random_graph(rng, n));
                          auto p = GCRNParams::make(f, h, rng);
                          ParamList ps;
                          p.collect("gcrn", ps);
                          auto x = uniform(rng, n, f);
                          auto h0 = uniform(rng, n, h);
                          const double ex = input_and_params([&](const Tensor& v) { return gcrn_step(v, h0, adj, p); }, x, ps);
                          const double eh = finite_diff_check([&](const Tensor& v) { return gcrn_step(x, v, adj, p); }, h0);
                          return std::max(ex, eh);
                      }});
    probes.push_back({"layer.tau", [](std::uint64_t seed) {
                          Rng rng(seed);
                          const auto c = dim(rng, 1, 4), t = dim(rng, 3, 8);
                          const auto k1 = 2 * dim(rng, 0, 2) + 1, k2 = 2 * dim(rng, 0, 1) + 1, dil = dim(rng, 1, 3);
                          auto p = TAUParams::make(c, k1, k2, dil, rng);
                          ParamList ps;
                          p.collect("tau", ps);
                          return input_and_params([&](const Tensor& h) { return tau_forward(h, p); }, uniform(rng, c, t), ps);
                      }});
    probes.push_back({"layer.mhsa", [](std::uint64_t seed) {
                          Rng rng(seed);
                          const auto heads = dim(rng, 1, 2), d = heads * dim(rng, 1, 3), t = dim(rng, 2, 6);
                          auto p = MHSAParams::make(d, heads, rng);
                          ParamList ps;
                          p.collect("mhsa", ps);
                          return input_and_params([&](const Tensor& x) { return multi_head_self_attention(x, p); },
                                                  uniform(rng, t, d), ps);
                      }});
    probes.push_back({"layer.dynamics", [](std::uint64_t seed) {
                          Rng rng(seed);
                          const auto f = dim(rng, 1, 4), t = dim(rng, 2, 6), width = dim(rng, 2, 8), depth = dim(rng, 1, 2);
                          auto net = DynamicsNet::make(f, width, depth, rng);
                          ParamList ps;
                          net.collect("dynamics", ps);
                          auto y = uniform(rng, t, 1);
                          auto tn = uniform(rng, t, 1, 0.0, 1.0);
                          const double ef = input_and_params([&](const Tensor& x) { return net.forward(x, y, tn); },
                                                             uniform(rng, t, f), ps);
                          auto feats = uniform(rng, t, f);
                          const double ey = finite_diff_check([&](const Tensor& v) { return net.forward(feats, v, tn); }, y);
                          return std::max(ef, ey);
                      }});
    probes.push_back({"layer.physics_loss", [](std::uint64_t seed) {
                          Rng rng(seed);
                          const auto b = dim(rng, 1, 4), t = dim(rng, 3, 8);
                          std::vector<double> broken(b);
                          std::bernoulli_distribution coin(0.5);
                          for (auto& v : broken) v = coin(rng) ? 1.0 : 0.0;
                          std::uniform_real_distribution<double> wd(0.1, 5.0);
                          const PhysicsWeights w{wd(rng), wd(rng), wd(rng), wd(rng)};
                          auto n_u = uniform(rng, b, t);
                          auto y = uniform(rng, b, t);
                          const double ey = finite_diff_check(
                              [&](const Tensor& v) { return physics_report(v, n_u, broken, w).total; }, y);
                          const double en = finite_diff_check(
                              [&](const Tensor& v) { return physics_report(y, v, broken, w).total; }, n_u);
                          return std::max(ey, en);
                      }});
    probes.push_back({"layer.sac_critic_loss", [](std::uint64_t seed) {
                          Rng rng(seed);
                          SACConfig c;
                          c.state_dim = dim(rng, 1, 4);
                          c.action_dim = dim(rng, 0, 1) ? c.state_dim : 1;
                          c.hidden = dim(rng, 2, 8);
                          auto p = SACPolicy::make(c, rng);
                          randomize_biases(p, rng);
                          const auto b = dim(rng, 1, 6);
                          auto batch = random_minibatch(rng, b, c.state_dim, c.action_dim, c.a_max);
                          auto noise = standard_normal(b, c.action_dim, rng);
                          ParamList ps;
                          p.collect_critics(ps);
                          return finite_diff_check_params([&] { return critic_loss(p, batch, noise); }, tensors_of(ps));
                      }});
    probes.push_back({"layer.sac_actor_loss", [](std::uint64_t seed) {
                          Rng rng(seed);
                          SACConfig c;
                          c.state_dim = dim(rng, 1, 4);
                          c.action_dim = dim(rng, 0, 1) ? c.state_dim : 1;
                          c.hidden = dim(rng, 2, 8);
                          auto p = SACPolicy::make(c, rng);
                          randomize_biases(p, rng);
                          const auto b = dim(rng, 1, 6);
                          auto batch = random_minibatch(rng, b, c.state_dim, c.action_dim, c.a_max);
                          auto noise = standard_normal(b, c.action_dim, rng);
                          ParamList ps;
                          p.collect_actor(ps);
                          const double err =
                              finite_diff_check_params([&] { return actor_loss(p, batch, noise); }, tensors_of(ps));
                          ParamList critics;
                          p.collect_critics(critics);
                          for (auto& q : critics) q.tensor.zero_grad();
                          return err;
                      }});
    return probes;
}

std::vector<GradProbe> all_probes() {
    auto probes = autodiff_op_probes();
    auto layers = layer_probes();
    probes.insert(probes.end(), layers.begin(), layers.end());
    return probes;
}

std::vector<ProbeResult> run_grad_suite(const GradSuiteOptions& o) {
    const auto probes = all_probes();
    if (o.inject_bug &&
        std::none_of(probes.begin(), probes.end(), [&](const GradProbe& p) { return p.name == *o.inject_bug; })) {
        throw std::invalid_argument("no gradient probe named '" + *o.inject_bug + "'");
    }
    std::vector<ProbeResult> results;
    for (const auto& probe : probes) {
        std::optional<ScopedGradientFault> fault;
        if (o.inject_bug && probe.name == *o.inject_bug) fault.emplace(2.0);
        ProbeResult r{probe.name, 0.0, o.seed, true};
        for (std::uint64_t s = o.seed; s < o.seed + o.seeds; ++s) {
            double e = std::numeric_limits<double>::infinity();
            try {
                e = probe.run(s);
            } catch (const std::exception&) {
                // a probe that cannot even evaluate counts as failing
            }
            if (std::isnan(e)) e = std::numeric_limits<double>::infinity();
            if (e > r.max_error) {
                r.max_error = e;
                r.worst_seed = s;
            }
        }
        r.passed = r.max_error < o.threshold;
        results.push_back(r);
    }
    return results;
}

void print_grad_table(std::ostream& out, const std::vector<ProbeResult>& results, double threshold) {
    std::size_t width = 4;
    for (const auto& r : results) width = std::max(width, r.name.size());
    out << std::left << std::setw(static_cast<int>(width)) << "op" << "  max_rel_err  worst_seed  status\n";
    for (const auto& r : results) {
        out << std::left << std::setw(static_cast<int>(width)) << r.name << "  " << std::scientific << std::setprecision(3)
            << std::setw(11) << r.max_error << "  " << std::setw(10) << r.worst_seed << "  " << (r.passed ? "ok" : "FAIL")
            << '\n';
    }
    out << std::defaultfloat;
    std::size_t failed = 0;
    for (const auto& r : results) failed += r.passed ? 0 : 1;
    out << results.size() << " probes, " << failed << " over " << threshold << '\n';
}

}  // namespace rgpd
