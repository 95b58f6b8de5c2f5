#include "rgpd/graph/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace rgpd {

Graph::Graph(std::size_t num_nodes, std::vector<Edge> edges) : num_nodes_(num_nodes), edges_(std::move(edges)) {
    if (num_nodes_ == 0) throw std::invalid_argument("graph needs at least one node");
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& e : edges_) {
        if (e.source >= num_nodes_ || e.target >= num_nodes_) {
            throw std::invalid_argument("edge (" + std::to_string(e.source) + "," + std::to_string(e.target) +
                                        ") out of range for " + std::to_string(num_nodes_) + " nodes");
        }
        if (!seen.insert({e.source, e.target}).second) {
            throw std::invalid_argument("duplicate edge (" + std::to_string(e.source) + "," +
                                        std::to_string(e.target) + ")");
        }
    }
    self_loops_ = true;
    for (std::size_t i = 0; i < num_nodes_ && self_loops_; ++i) self_loops_ = seen.contains({i, i});
}

bool Graph::has_edge(std::size_t source, std::size_t target) const {
    return std::find(edges_.begin(), edges_.end(), Edge{source, target}) != edges_.end();
}

bool Graph::is_undirected() const {
    return std::all_of(edges_.begin(), edges_.end(), [this](const Edge& e) { return has_edge(e.target, e.source); });
}

std::size_t Graph::in_degree_without_self(std::size_t node) const {
    return static_cast<std::size_t>(std::count_if(
        edges_.begin(), edges_.end(), [node](const Edge& e) { return e.target == node && e.source != node; }));
}

Graph Graph::with_self_loops() const {
    auto edges = edges_;
    for (std::size_t i = 0; i < num_nodes_; ++i)
        if (!has_edge(i, i)) edges.push_back({i, i});
    return Graph(num_nodes_, std::move(edges));
}

std::vector<double> Graph::adjacency() const {
    std::vector<double> a(num_nodes_ * num_nodes_, 0.0);
    for (const auto& e : edges_) a[e.target * num_nodes_ + e.source] = 1.0;
    return a;
}

std::string Graph::to_edge_list() const {
    std::ostringstream os;
    os << num_nodes_ << '\n';
    for (const auto& e : edges_) os << e.source << ' ' << e.target << '\n';
    return os.str();
}

Graph Graph::from_edge_list(const std::string& text) {
    std::istringstream is(text);
    long long n = -1;
    if (!(is >> n) || n <= 0) throw std::invalid_argument("edge list: missing or invalid node count");
    std::vector<Edge> edges;
    long long s = 0, t = 0;
    while (is >> s) {
        if (!(is >> t)) throw std::invalid_argument("edge list: dangling source index");
        if (s < 0 || t < 0) throw std::invalid_argument("edge list: negative node index");
        edges.push_back({static_cast<std::size_t>(s), static_cast<std::size_t>(t)});
    }
    if (!is.eof()) throw std::invalid_argument("edge list: non-numeric token");
    return Graph(static_cast<std::size_t>(n), std::move(edges));
}

Graph build_temporal_chain_graph(std::size_t window_length) {
    if (window_length == 0) throw std::invalid_argument("temporal graph needs window_length >= 1");
    std::vector<Edge> edges;
    for (std::size_t t = 0; t + 1 < window_length; ++t) {
        edges.push_back({t, t + 1});
        edges.push_back({t + 1, t});
    }
    for (std::size_t t = 0; t < window_length; ++t) edges.push_back({t, t});
    return Graph(window_length, std::move(edges));
}

std::vector<double> channel_correlation(std::span<const double> samples, std::size_t num_channels) {
    if (num_channels == 0 || samples.empty()) throw std::invalid_argument("correlation of empty data");
    if (samples.size() % num_channels != 0) throw std::invalid_argument("sample matrix is ragged");
    const std::size_t n = samples.size() / num_channels;
    if (n < 2) throw std::invalid_argument("correlation needs at least 2 samples per channel");

    std::vector<double> mean(num_channels, 0.0);
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t c = 0; c < num_channels; ++c) mean[c] += samples[s * num_channels + c];
    for (auto& m : mean) m /= static_cast<double>(n);

    std::vector<double> cov(num_channels * num_channels, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t i = 0; i < num_channels; ++i) {
            const double di = samples[s * num_channels + i] - mean[i];
            for (std::size_t j = i; j < num_channels; ++j)
                cov[i * num_channels + j] += di * (samples[s * num_channels + j] - mean[j]);
        }
    }
    std::vector<double> corr(num_channels * num_channels, 0.0);
    for (std::size_t i = 0; i < num_channels; ++i) {
        corr[i * num_channels + i] = 1.0;
        for (std::size_t j = i + 1; j < num_channels; ++j) {
            const double vi = cov[i * num_channels + i], vj = cov[j * num_channels + j];
            double r = 0.0;
            if (vi > 1e-12 * n && vj > 1e-12 * n) r = std::clamp(cov[i * num_channels + j] / std::sqrt(vi * vj), -1.0, 1.0);
            corr[i * num_channels + j] = corr[j * num_channels + i] = r;
        }
    }
    return corr;
}

Graph build_channel_correlation_graph(std::span<const double> samples, std::size_t num_channels, double threshold) {
    if (threshold < 0.0 || threshold > 1.0) throw std::invalid_argument("correlation threshold must lie in [0,1]");
    const auto corr = channel_correlation(samples, num_channels);
    const std::size_t n = samples.size() / num_channels;
    std::vector<double> var(num_channels, 0.0);
    for (std::size_t c = 0; c < num_channels; ++c) {
        double m = 0.0;
        for (std::size_t s = 0; s < n; ++s) m += samples[s * num_channels + c];
        m /= static_cast<double>(n);
        for (std::size_t s = 0; s < n; ++s) var[c] += (samples[s * num_channels + c] - m) * (samples[s * num_channels + c] - m);
    }
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < num_channels; ++i) {
        for (std::size_t j = 0; j < num_channels; ++j) {
            if (i == j) continue;
            const bool constant = var[i] <= 1e-12 * n || var[j] <= 1e-12 * n;
            if (!constant && std::abs(corr[i * num_channels + j]) >= threshold) edges.push_back({i, j});
        }
    }
    for (std::size_t i = 0; i < num_channels; ++i) edges.push_back({i, i});
    return Graph(num_channels, std::move(edges));
}

NormalizedAdjacency NormalizedAdjacency::of(const Graph& graph) {
    if (!graph.includes_self_loops()) {
        throw std::invalid_argument("normalized adjacency requires self-loops on every node");
    }
    const std::size_t n = graph.num_nodes();
    auto a = graph.adjacency();
    std::vector<double> inv_sqrt(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double d = 0.0;
        for (std::size_t j = 0; j < n; ++j) d += a[i * n + j];
        inv_sqrt[i] = 1.0 / std::sqrt(d);
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a[i * n + j] *= inv_sqrt[i] * inv_sqrt[j];
    return {Tensor({n, n}, std::move(a))};
}

}  // namespace rgpd
