#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rgpd/autodiff/tensor.hpp"

namespace rgpd {

struct Edge {
    std::size_t source;
    std::size_t target;
    bool operator==(const Edge&) const = default;
};

// Directed edge list over num_nodes nodes. Undirected relations are stored
// as both directions.
class Graph {
   public:
    Graph(std::size_t num_nodes, std::vector<Edge> edges);

    std::size_t num_nodes() const { return num_nodes_; }
    const std::vector<Edge>& edges() const { return edges_; }
    bool includes_self_loops() const { return self_loops_; }
    bool has_edge(std::size_t source, std::size_t target) const;
    bool is_undirected() const;

    // Degree counting incoming edges, self-loop excluded.
    std::size_t in_degree_without_self(std::size_t node) const;

    Graph with_self_loops() const;

    // Dense NxN, entry (i, j) = 1 when the edge j -> i exists.
    std::vector<double> adjacency() const;

    // First line num_nodes, then "src dst" per edge.
    std::string to_edge_list() const;
    static Graph from_edge_list(const std::string& text);

   private:
    std::size_t num_nodes_;
    std::vector<Edge> edges_;
    bool self_loops_;
};

// Nodes are time steps 0..T-1 with undirected consecutive edges and self-loops.
Graph build_temporal_chain_graph(std::size_t window_length);

// Pearson correlation between columns of a samples x channels row-major matrix.
// Constant channels correlate 0 with everything except themselves.
std::vector<double> channel_correlation(std::span<const double> samples, std::size_t num_channels);

// Nodes are channels; edge (i, j), i != j, when |corr(i, j)| >= threshold.
Graph build_channel_correlation_graph(std::span<const double> samples, std::size_t num_channels, double threshold);

// D^-1/2 A D^-1/2 with d_i the row sum of A (self-loops included).
struct NormalizedAdjacency {
    Tensor matrix;
    static NormalizedAdjacency of(const Graph& graph);
};

}  // namespace rgpd
