#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "rgpd/autodiff/gradcheck.hpp"
#include "rgpd/autodiff/ops.hpp"
#include "rgpd/graph/layers.hpp"

using namespace rgpd;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(r * c);
    for (auto& x : v) x = d(rng);
    return Tensor({r, c}, std::move(v));
}

Graph random_undirected_graph(std::size_t n, double p, Rng& rng) {
    std::bernoulli_distribution keep(p);
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i) {
        edges.push_back({i, i});
        for (std::size_t j = i + 1; j < n; ++j) {
            if (keep(rng)) {
                edges.push_back({i, j});
                edges.push_back({j, i});
            }
        }
    }
    return Graph(n, std::move(edges));
}

Graph permute_graph(const Graph& g, const std::vector<std::size_t>& perm) {
    std::vector<Edge> edges;
    for (const auto& e : g.edges()) edges.push_back({perm[e.source], perm[e.target]});
    return Graph(g.num_nodes(), std::move(edges));
}

// Row perm[i] of the result is row i of m.
Tensor permute_rows(const Tensor& m, const std::vector<std::size_t>& perm) {
    std::vector<double> v(m.numel());
    const auto c = m.cols();
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < c; ++j) v[perm[i] * c + j] = m.at(i, j);
    return Tensor(m.shape(), std::move(v));
}

double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Dense GRU step with the same gate structure, written as scalar loops.
std::vector<double> dense_gru_step(const Tensor& x, const Tensor& h, const GCRNParams& p) {
    const std::size_t f = x.cols(), hd = h.cols();
    auto lin = [&](const Tensor& w, const Tensor& in, std::size_t width, std::size_t j) {
        double s = 0.0;
        for (std::size_t k = 0; k < width; ++k) s += in[k] * w.at(k, j);
        return s;
    };
    std::vector<double> out(hd);
    std::vector<double> r(hd), z(hd);
    for (std::size_t j = 0; j < hd; ++j) {
        z[j] = sigmoid_ref(lin(p.w_z, x, f, j) + lin(p.u_z, h, hd, j) + p.b_z[j]);
        r[j] = sigmoid_ref(lin(p.w_r, x, f, j) + lin(p.u_r, h, hd, j) + p.b_r[j]);
    }
    for (std::size_t j = 0; j < hd; ++j) {
        const double cand = std::tanh(lin(p.w_h, x, f, j) + r[j] * lin(p.u_h, h, hd, j) + p.b_h[j]);
        out[j] = (1.0 - z[j]) * h[j] + z[j] * cand;
    }
    return out;
}

void fill(Tensor& t, double v) {
    auto m = t.mutable_values();
    std::fill(m.begin(), m.end(), v);
}

}  // namespace

TEST(TemporalChainGraph, SingleStepHasOnlySelfLoop) {
    auto g = build_temporal_chain_graph(1);
    EXPECT_EQ(g.num_nodes(), 1u);
    ASSERT_EQ(g.edges().size(), 1u);
    EXPECT_TRUE(g.has_edge(0, 0));
    EXPECT_TRUE(g.includes_self_loops());
}

TEST(TemporalChainGraph, ThreeStepsEdges) {
    auto g = build_temporal_chain_graph(3);
    EXPECT_EQ(g.edges().size(), 7u);
    for (auto [s, t] : std::vector<std::pair<int, int>>{{0, 1}, {1, 0}, {1, 2}, {2, 1}, {0, 0}, {1, 1}, {2, 2}})
        EXPECT_TRUE(g.has_edge(s, t));
    EXPECT_FALSE(g.has_edge(0, 2));
}

TEST(TemporalChainGraph, DegreesAtEndpointsAndInterior) {
    for (std::size_t t = 3; t < 12; ++t) {
        auto g = build_temporal_chain_graph(t);
        EXPECT_EQ(g.in_degree_without_self(0), 1u);
        EXPECT_EQ(g.in_degree_without_self(t - 1), 1u);
        for (std::size_t i = 1; i + 1 < t; ++i) EXPECT_EQ(g.in_degree_without_self(i), 2u);
    }
    EXPECT_THROW(build_temporal_chain_graph(0), std::invalid_argument);
}

TEST(GraphType, RejectsBadEdges) {
    EXPECT_THROW(Graph(2, {{0, 2}}), std::invalid_argument);
    EXPECT_THROW(Graph(2, {{0, 1}, {0, 1}}), std::invalid_argument);
    EXPECT_FALSE(Graph(2, {{0, 1}, {1, 0}}).includes_self_loops());
}

TEST(GraphType, EdgeListRoundTrip) {
    Rng rng(3);
    auto g = random_undirected_graph(6, 0.4, rng);
    auto text = g.to_edge_list();
    EXPECT_EQ(text.substr(0, 2), "6\n");
    auto back = Graph::from_edge_list(text);
    EXPECT_EQ(back.num_nodes(), g.num_nodes());
    EXPECT_EQ(back.edges(), g.edges());
    EXPECT_THROW(Graph::from_edge_list("3\n0 1\n2"), std::invalid_argument);
    EXPECT_THROW(Graph::from_edge_list("x"), std::invalid_argument);
    EXPECT_THROW(Graph::from_edge_list("2\n0 5\n"), std::invalid_argument);
}

TEST(CorrelationGraph, PerfectAndNegativeCorrelation) {
    // Columns: a, 2a+1, -a, constant
    std::vector<double> samples;
    for (double a : {1.0, 2.0, 4.0, 7.0}) {
        samples.insert(samples.end(), {a, 2 * a + 1, -a, 5.0});
    }
    auto g = build_channel_correlation_graph(samples, 4, 0.9);
    EXPECT_TRUE(g.has_edge(0, 1));
    EXPECT_TRUE(g.has_edge(1, 0));
    EXPECT_TRUE(g.has_edge(0, 2));
    EXPECT_TRUE(g.includes_self_loops());
    EXPECT_EQ(g.in_degree_without_self(3), 0u);
    EXPECT_FALSE(g.has_edge(3, 0));
}

TEST(CorrelationGraph, ZeroThresholdIsComplete) {
    Rng rng(4);
    auto m = random_matrix(20, 5, rng);
    auto g = build_channel_correlation_graph(m.values(), 5, 0.0);
    EXPECT_EQ(g.edges().size(), 25u);
    EXPECT_THROW(build_channel_correlation_graph({}, 5, 0.5), std::invalid_argument);
    EXPECT_THROW(build_channel_correlation_graph(m.values(), 5, 1.5), std::invalid_argument);
}

TEST(NormalizedAdjacency, TwoNodeChain) {
    auto adj = NormalizedAdjacency::of(build_temporal_chain_graph(2));
    for (double v : adj.matrix.values()) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(NormalizedAdjacency, SymmetricForUndirected) {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        auto g = random_undirected_graph(7, 0.3, rng);
        auto a = NormalizedAdjacency::of(g).matrix;
        for (std::size_t i = 0; i < 7; ++i)
            for (std::size_t j = 0; j < 7; ++j) EXPECT_EQ(a.at(i, j), a.at(j, i));
    }
    EXPECT_THROW(NormalizedAdjacency::of(Graph(2, {{0, 1}, {1, 0}})), std::invalid_argument);
}

TEST(GcnLayer, SingleNodeIdentity) {
    auto h = Tensor::matrix({{0.3, -0.7, 2.0}});
    auto w = Tensor::matrix({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
    auto y = gcn_layer(h, build_temporal_chain_graph(1), w, false);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(y[i], h[i]);
}

TEST(GcnLayer, MissingSelfLoopsRejected) {
    Graph g(2, {{0, 1}, {1, 0}});
    EXPECT_THROW(gcn_layer(Tensor::zeros({2, 1}), g, Tensor::zeros({1, 1})), std::invalid_argument);
}

TEST(GcnLayer, PermutationEquivariant) {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        auto g = random_undirected_graph(6, 0.4, rng);
        auto h = random_matrix(6, 3, rng);
        auto w = random_matrix(3, 4, rng);
        std::vector<std::size_t> perm(6);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        auto y = gcn_layer(h, g, w);
        auto yp = gcn_layer(permute_rows(h, perm), permute_graph(g, perm), w);
        auto expected = permute_rows(y, perm);
        for (std::size_t i = 0; i < y.numel(); ++i) EXPECT_NEAR(yp[i], expected[i], 1e-14);
    }
}

TEST(GatLayer, IdenticalFeaturesGiveUniformAttention) {
    Rng rng(7);
    auto g = random_undirected_graph(5, 0.5, rng);
    auto params = GATParams::make(3, 4, 2, 0.2, rng);
    auto h = Tensor::matrix({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}, {1, 2, 3}, {1, 2, 3}});
    auto out = gat_forward_detailed(h, AttentionMask::of(g), params);
    for (const auto& alpha : out.attention) {
        for (std::size_t i = 0; i < 5; ++i) {
            const double deg = static_cast<double>(g.in_degree_without_self(i) + 1);
            for (std::size_t j = 0; j < 5; ++j) {
                EXPECT_NEAR(alpha.at(i, j), g.has_edge(j, i) ? 1.0 / deg : 0.0, 1e-15);
            }
        }
    }
}

TEST(GatLayer, SingleNodeAttendsToItself) {
    Rng rng(8);
    auto params = GATParams::make(2, 3, 1, 0.2, rng);
    auto h = Tensor::matrix({{0.4, -1.1}});
    auto out = gat_forward_detailed(h, AttentionMask::of(build_temporal_chain_graph(1)), params);
    EXPECT_EQ(out.attention[0][0], 1.0);
    auto expected = elu(matmul(h, params.heads[0].weight));
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(out.features[i], expected[i]);
}

TEST(GatLayer, AttentionRowsSumToOne) {
    Rng rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + trial % 9;
        auto g = random_undirected_graph(n, 0.35, rng);
        auto params = GATParams::make(4, 5, 3, 0.2, rng);
        auto out = gat_forward_detailed(random_matrix(n, 4, rng, -3, 3), AttentionMask::of(g), params);
        for (const auto& alpha : out.attention) {
            for (std::size_t i = 0; i < n; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < n; ++j) s += alpha.at(i, j);
                EXPECT_NEAR(s, 1.0, 1e-12);
            }
        }
    }
}

TEST(GatLayer, PermutationEquivariant) {
    Rng rng(10);
    auto g = random_undirected_graph(6, 0.4, rng);
    auto params = GATParams::make(3, 4, 2, 0.2, rng);
    auto h = random_matrix(6, 3, rng);
    std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
    auto y = gat_forward(h, g, params);
    auto yp = gat_forward(permute_rows(h, perm), permute_graph(g, perm), params);
    auto expected = permute_rows(y, perm);
    for (std::size_t i = 0; i < y.numel(); ++i) EXPECT_NEAR(yp[i], expected[i], 1e-14);
}

TEST(GatLayer, IsolatedNodeRejected) {
    Graph g(2, {{0, 0}});
    EXPECT_THROW(AttentionMask::of(g), std::invalid_argument);
}

TEST(GcrnStep, ClosedUpdateGateKeepsState) {
    Rng rng(11);
    auto p = GCRNParams::make(3, 4, rng);
    fill(p.b_z, -1000.0);
    auto adj = NormalizedAdjacency::of(build_temporal_chain_graph(5));
    auto x = random_matrix(5, 3, rng);
    auto h = random_matrix(5, 4, rng);
    auto out = gcrn_step(x, h, adj, p);
    for (std::size_t i = 0; i < h.numel(); ++i) EXPECT_EQ(out[i], h[i]);
}

TEST(GcrnStep, OpenUpdateGateTakesCandidate) {
    Rng rng(12);
    auto p = GCRNParams::make(3, 4, rng);
    fill(p.b_z, 1000.0);
    auto adj = NormalizedAdjacency::of(build_temporal_chain_graph(4));
    auto x = random_matrix(4, 3, rng);
    auto h = random_matrix(4, 4, rng);
    auto out = gcrn_step(x, h, adj, p);
    auto ax = matmul(adj.matrix, x);
    auto ah = matmul(adj.matrix, h);
    auto r = sigmoid(add_row(add(matmul(ax, p.w_r), matmul(ah, p.u_r)), p.b_r));
    auto cand = rgpd::tanh(add_row(add(matmul(ax, p.w_h), mul(r, matmul(ah, p.u_h))), p.b_h));
    for (std::size_t i = 0; i < cand.numel(); ++i) EXPECT_EQ(out[i], cand[i]);
}

TEST(GcrnStep, SingleNodeMatchesDenseGru) {
    Rng rng(13);
    auto adj = NormalizedAdjacency::of(build_temporal_chain_graph(1));
    for (int trial = 0; trial < 20; ++trial) {
        auto p = GCRNParams::make(3, 5, rng);
        auto x = random_matrix(1, 3, rng, -2, 2);
        auto h = random_matrix(1, 5, rng);
        auto out = gcrn_step(x, h, adj, p);
        auto ref = dense_gru_step(x, h, p);
        for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(out[j], ref[j], 1e-12);
    }
}

TEST(GcrnStep, ShapeMismatchRejected) {
    Rng rng(14);
    auto p = GCRNParams::make(3, 4, rng);
    auto adj = NormalizedAdjacency::of(build_temporal_chain_graph(3));
    EXPECT_THROW(gcrn_step(Tensor::zeros({3, 2}), Tensor::zeros({3, 4}), adj, p), DimensionError);
    EXPECT_THROW(gcrn_step(Tensor::zeros({2, 3}), Tensor::zeros({2, 4}), adj, p), DimensionError);
}

TEST(GcrnStep, StackedGraphsMatchSeparateSteps) {
    Rng rng(16);
    auto p = GCRNParams::make(3, 4, rng);
    auto adj = NormalizedAdjacency::of(build_temporal_chain_graph(5));
    std::vector<Tensor> xs, hs;
    for (int b = 0; b < 3; ++b) {
        xs.push_back(random_matrix(5, 3, rng));
        hs.push_back(random_matrix(5, 4, rng));
    }
    auto stacked = gcrn_step(concat_rows(xs), concat_rows(hs), adj, p);
    for (std::size_t b = 0; b < 3; ++b) {
        auto ref = gcrn_step(xs[b], hs[b], adj, p);
        for (std::size_t i = 0; i < ref.numel(); ++i) EXPECT_EQ(stacked[b * ref.numel() + i], ref[i]);
    }
}

TEST(GcrnUnroll, SingleStepAndBoundsAndDeterminism) {
    Rng rng(15);
    auto p = GCRNParams::make(2, 3, rng);
    auto adj = NormalizedAdjacency::of(build_temporal_chain_graph(4));
    std::vector<Tensor> seq;
    for (int t = 0; t < 12; ++t) seq.push_back(random_matrix(4, 2, rng, -5, 5));

    auto one = gcrn_unroll({seq[0]}, adj, p);
    auto step = gcrn_step(seq[0], Tensor::zeros({4, 3}), adj, p);
    ASSERT_EQ(one.size(), 1u);
    for (std::size_t i = 0; i < step.numel(); ++i) EXPECT_EQ(one[0][i], step[i]);

    auto a = gcrn_unroll(seq, adj, p);
    auto b = gcrn_unroll(seq, adj, p);
    ASSERT_EQ(a.size(), 12u);
    for (std::size_t t = 0; t < a.size(); ++t) {
        for (std::size_t i = 0; i < a[t].numel(); ++i) {
            EXPECT_LE(std::abs(a[t][i]), 1.0);
            EXPECT_EQ(a[t][i], b[t][i]);
        }
    }
    EXPECT_THROW(gcrn_unroll({}, adj, p), std::invalid_argument);
}

TEST(GraphLayerGradients, PassFiniteDifferenceCheck) {
    Rng rng(16);
    auto g = random_undirected_graph(5, 0.5, rng);
    auto adj = NormalizedAdjacency::of(g);
    auto mask = AttentionMask::of(g);
    auto h = random_matrix(5, 3, rng);

    auto w = xavier_uniform(3, 4, rng);
    EXPECT_LT(finite_diff_check([&](const Tensor& x) { return gcn_layer(x, adj, w); }, h), 1e-4);
    EXPECT_LT(finite_diff_check_params([&] { return gcn_layer(h, adj, w); }, {w}), 1e-4);

    auto gat = GATParams::make(3, 4, 2, 0.2, rng);
    ParamList gp;
    gat.collect("gat", gp);
    EXPECT_LT(finite_diff_check([&](const Tensor& x) { return gat_forward(x, mask, gat); }, h), 1e-4);
    EXPECT_LT(finite_diff_check_params([&] { return gat_forward(h, mask, gat); }, tensors_of(gp)), 1e-4);

    auto gcrn = GCRNParams::make(3, 4, rng);
    ParamList cp;
    gcrn.collect("gcrn", cp);
    auto h0 = random_matrix(5, 4, rng);
    EXPECT_LT(finite_diff_check([&](const Tensor& x) { return gcrn_step(x, h0, adj, gcrn); }, h), 1e-4);
    EXPECT_LT(finite_diff_check([&](const Tensor& s) { return gcrn_step(h, s, adj, gcrn); }, h0), 1e-4);
    EXPECT_LT(finite_diff_check_params([&] { return gcrn_step(h, h0, adj, gcrn); }, tensors_of(cp)), 1e-4);
}
