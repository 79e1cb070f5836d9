#ifndef ETNN_COMPLEX_HPP
#define ETNN_COMPLEX_HPP

#include "etnn/types.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace etnn {

/// A cell of a combinatorial complex: a non-empty node subset with a rank.
struct Cell {
    std::vector<NodeId> nodes;  ///< strictly increasing
    Rank rank = 0;
    std::vector<double> features;
    std::vector<std::string> tags;

    bool has_tag(std::string_view tag) const;
};

/// Input description of a cell; node order is free, it is canonicalized on build.
struct CellSpec {
    std::vector<NodeId> nodes;
    Rank rank = 0;
    std::vector<double> features = {};
    std::vector<std::string> tags = {};
};

struct BuildOptions {
    /// Pairwise order-preservation check, O(|X|^2) subset tests. Turning it off
    /// is unsafe: a complex violating rank monotonicity is accepted silently.
    bool validate_ranks = true;
};

/// Finite combinatorial complex with node positions (and optional velocities).
///
/// Immutable after construction. Every node is a rank-0 singleton cell, cell
/// node-sets are unique, and rank is order-preserving under inclusion.
class CombinatorialComplex {
public:
    std::size_t num_nodes() const noexcept { return num_nodes_; }
    int spatial_dim() const noexcept { return spatial_dim_; }
    std::size_t num_cells() const noexcept { return cells_.size(); }

    const Matrix& positions() const noexcept { return positions_; }
    const std::optional<Matrix>& velocities() const noexcept { return velocities_; }
    const std::vector<Cell>& cells() const noexcept { return cells_; }
    const Cell& cell(CellId id) const { return cells_.at(id); }

    /// Cell id of the node-set, if present. Input need not be sorted.
    std::optional<CellId> find(std::span<const NodeId> nodes) const;

    /// Id of the singleton cell {node}.
    CellId node_cell(NodeId node) const { return node_cell_.at(node); }

    /// Cells containing the given node (any rank), ascending ids.
    const std::vector<CellId>& cells_containing(NodeId node) const { return incident_.at(node); }

    /// Returns a copy with positions (and velocities, when given) replaced.
    CombinatorialComplex with_geometry(Matrix positions, std::optional<Matrix> velocities = std::nullopt) const;

    friend CombinatorialComplex build_complex(std::size_t, int, const Matrix&, std::vector<CellSpec>,
                                              std::optional<Matrix>, BuildOptions);

private:
    std::size_t num_nodes_ = 0;
    int spatial_dim_ = 0;
    Matrix positions_;
    std::optional<Matrix> velocities_;
    std::vector<Cell> cells_;
    std::map<std::vector<NodeId>, CellId> cell_index_;
    std::vector<CellId> node_cell_;
    std::vector<std::vector<CellId>> incident_;
};

/// Validates and assembles a complex. Missing singletons are appended with
/// empty features and the tag "node".
/// Throws DuplicateCell, RankViolation, DimensionMismatch, OutOfRangeNode.
CombinatorialComplex build_complex(std::size_t num_nodes, int spatial_dim, const Matrix& positions,
                                   std::vector<CellSpec> cells, std::optional<Matrix> velocities = std::nullopt,
                                   BuildOptions options = {});

/// Applies a node permutation: node i becomes perm[i]. Throws InvalidPermutation.
CombinatorialComplex relabel(const CombinatorialComplex& cc, std::span<const NodeId> perm);

/// Ids of rank-k cells in insertion order.
std::vector<CellId> cells_of_rank(const CombinatorialComplex& cc, Rank k);

/// Maximal rank among the cells.
Rank dimension(const CombinatorialComplex& cc);

/// Cell counts indexed by rank, length dimension+1.
std::vector<std::size_t> rank_counts(const CombinatorialComplex& cc);

/// True when a is a proper subset of b (both sorted).
bool is_proper_subset(std::span<const NodeId> a, std::span<const NodeId> b);

/// Recovers the cell specs (in cell order) a complex was built from.
std::vector<CellSpec> cell_specs(const CombinatorialComplex& cc);

}  // namespace etnn

#endif  // ETNN_COMPLEX_HPP
