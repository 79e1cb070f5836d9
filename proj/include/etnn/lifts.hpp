#ifndef ETNN_LIFTS_HPP
#define ETNN_LIFTS_HPP

#include "etnn/complex.hpp"
#include "etnn/invariants.hpp"
#include "etnn/neighborhoods.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace etnn {

/// Undirected geometric graph; `node_features` may have zero columns.
struct GeometricGraph {
    std::size_t num_nodes = 0;
    int spatial_dim = 0;
    Matrix positions;
    Matrix node_features;
    std::vector<std::pair<NodeId, NodeId>> edges;
    std::optional<Matrix> velocities;
};

/// Throws DimensionMismatch, OutOfRangeNode, InvalidArgument (self or duplicate edge).
void validate_graph(const GeometricGraph& g);

/// Pre-annotated higher-order structure (ring, functional group, ...).
struct AnnotatedCell {
    std::vector<NodeId> nodes;
    std::vector<double> features;
};

/// Optional inputs beyond the bare graph.
struct LiftAnnotations {
    std::vector<std::vector<double>> edge_features;  ///< aligned with graph edges, may be empty
    std::vector<std::vector<NodeId>> hyperedges;
    std::vector<AnnotatedCell> rings;
    std::vector<AnnotatedCell> functional_groups;
};

/// Which cell families a lift produces.
struct LiftRecipe {
    bool molecular = false;  ///< atom/bond tags and ring/group rank rules
    bool edges = false;
    int clique_dim = 0;  ///< 0: no clique cells above edges
    int cycle_len = 0;   ///< 0: no cycle cells
    bool hyperedges = false;
    bool rings = false;
    bool groups = false;
    std::optional<Rank> virtual_rank;  ///< nullopt: no virtual cell
    bool virtual_cell = false;

    std::string to_string() const;
};

/// `graph` or `molecular`, followed by `+`-joined parts: `edges`, `cliques:<d>`,
/// `cycles:<len>`, `hyperedges`, `rings`, `groups`, `virtual[:<rank>]`.
/// Example: `graph+edges`, `molecular+rings+groups+virtual:3`.
LiftRecipe parse_recipe(std::string_view text);

CombinatorialComplex apply_recipe(const GeometricGraph& g, const LiftAnnotations& annotations,
                                  const LiftRecipe& recipe);

/// Cells sharing a node-set are merged: tags are joined and features are
/// concatenated in a fixed tag order (node, atom, edge, bond, hyperedge,
/// functional_group, ring, clique, path, virtual, then unknown tags).
/// Conflicting ranks raise RankViolation.
std::vector<CellSpec> merge_cells(std::vector<CellSpec> cells);

CombinatorialComplex graph_lift(const GeometricGraph& g, bool include_edges);
CombinatorialComplex clique_lift(const GeometricGraph& g, int max_dim);
/// Induced cycles of length <= max_len (3..12) become rank-2 "ring" cells.
/// Throws CycleLimit beyond 100000 cycles.
CombinatorialComplex cycle_lift(const GeometricGraph& g, int max_len);
CombinatorialComplex hypergraph_lift(const GeometricGraph& g, const std::vector<std::vector<NodeId>>& hyperedges);
/// Atoms rank 0, bonds and two-atom groups rank 1, rings and larger groups rank 2.
CombinatorialComplex molecular_lift(const GeometricGraph& g, const LiftAnnotations& annotations);
/// Adds one all-node cell tagged "virtual". Throws RankViolation when
/// `rank` is below the complex dimension.
CombinatorialComplex add_virtual_cell(const CombinatorialComplex& cc, Rank rank);

std::vector<std::vector<NodeId>> induced_cycles(const GeometricGraph& g, int max_len);
std::vector<std::vector<NodeId>> cliques(const GeometricGraph& g, int max_size);
/// Simple paths on `length` nodes, each reported once.
std::vector<std::vector<NodeId>> simple_paths(const GeometricGraph& g, int length);

/// Pair of k-chain graphs. Interior nodes 1..k sit at (i, 0); node 0 at (0, 1);
/// node k+1 at (k+1, 1) in the first graph and (k+1, -1) in the second.
/// Node features are the constant 1.
std::pair<GeometricGraph, GeometricGraph> k_chain_graphs(int k, int spatial_dim = 2);
/// The same pair, graph-lifted with edges as rank-1 cells.
std::pair<CombinatorialComplex, CombinatorialComplex> k_chain_pair(int k, int spatial_dim = 2);

/// Variants: `graph` (edge adjacency only), `1a`, `2a`, `3a`, `3a-up` (3a cells,
/// adj_up only), `1b`, `2b`, `3b`, `4b`. a-variants expect a path graph whose
/// node ids follow the path. Throws UnsupportedVariant.
std::pair<CombinatorialComplex, NeighborhoodCollection> expressivity_lift(const GeometricGraph& g,
                                                                          std::string_view variant);

/// Rank-0 entry built from the graph's edges (both directions), labelled adj_up.
NeighborhoodEntry edge_adjacency(const CombinatorialComplex& cc, const GeometricGraph& g);

/// Cells as nodes, neighborhood pairs as directed edges (sender -> receiver).
/// Pairs present in several entries yield parallel edges.
struct HasseGraph {
    Matrix positions;               ///< one row per cell
    std::vector<CellPair> edges;    ///< (receiver, sender)
    std::vector<std::size_t> edge_entry;  ///< entry index of each edge
    std::vector<Rank> ranks;

    std::size_t num_nodes() const { return static_cast<std::size_t>(positions.rows()); }
};

/// Throws InvalidArgument unless aggregator is mean or sum.
HasseGraph hasse_graph(const CombinatorialComplex& cc, const NeighborhoodCollection& collection,
                       Aggregator aggregator = Aggregator::mean);

/// Weak connectivity (edge directions ignored).
bool is_connected(const HasseGraph& h);

/// Graph joining nodes at distance <= eps.
GeometricGraph epsilon_graph(const Matrix& positions, double eps);

}  // namespace etnn

#endif  // ETNN_LIFTS_HPP
