#ifndef ETNN_NEIGHBORHOODS_HPP
#define ETNN_NEIGHBORHOODS_HPP

#include "etnn/complex.hpp"
#include "etnn/geometry.hpp"

#include <optional>
#include <string>
#include <vector>

namespace etnn {

enum class NeighborhoodKind {
    inc_up,
    inc_down,
    adj_up,
    adj_down,
    adj_max,
    spatial_adj,
    spatial_inc_up,
    spatial_inc_down,
};

std::string_view to_string(NeighborhoodKind kind) noexcept;

/// One neighborhood function. `hop` only matters for the incidence kinds;
/// `rank` restricts receivers to one rank (nullopt = all ranks).
struct NeighborhoodSpec {
    NeighborhoodKind kind = NeighborhoodKind::adj_up;
    int hop = 1;
    std::optional<Rank> rank;

    /// Canonical spec string, e.g. "inc_up:2@rank=0". hop is omitted when 1.
    std::string to_string() const;
    /// Label used to key messages: to_string() without the rank filter.
    std::string label() const;

    friend bool operator==(const NeighborhoodSpec&, const NeighborhoodSpec&) = default;
};

/// Parses `inc_up[:hop]`, `adj_max`, ... with optional `@rank=<k|all>`.
NeighborhoodSpec parse_neighborhood(std::string_view text);
/// Comma-separated list of neighborhood specs.
std::vector<NeighborhoodSpec> parse_neighborhood_list(std::string_view text);

/// Pairs of one neighborhood function between one receiver rank and one sender rank.
struct NeighborhoodEntry {
    std::string label;  ///< message key, usually spec.label()
    NeighborhoodSpec spec;
    Rank receiver_rank = 0;
    Rank sender_rank = 0;
    std::vector<CellPair> pairs;  ///< sorted by (receiver, sender), no duplicates, no self-pairs
};

struct NeighborhoodCollection {
    std::vector<NeighborhoodEntry> entries;

    std::size_t total_pairs() const;
};

/// Per-cell geometric footprint for spatial neighborhoods.
using Footprint = geometry::Shape;

/// Footprints indexed by cell id. Cells absent from `shapes` fall back to the
/// point set of their member-node positions.
struct SpatialRepresentation {
    std::vector<std::optional<Footprint>> shapes;
};

std::vector<NeighborhoodEntry> incidence(const CombinatorialComplex& cc, bool up, int hop = 1);
std::vector<NeighborhoodEntry> adjacency(const CombinatorialComplex& cc, bool up);
std::vector<NeighborhoodEntry> max_adjacency(const CombinatorialComplex& cc);
std::vector<NeighborhoodEntry> spatial_neighborhoods(const CombinatorialComplex& cc,
                                                     const SpatialRepresentation& representation,
                                                     NeighborhoodKind kind);

/// Materializes one spec (rank filter applied).
std::vector<NeighborhoodEntry> materialize(const CombinatorialComplex& cc, const NeighborhoodSpec& spec,
                                           const SpatialRepresentation* representation = nullptr);

/// Concatenates per-spec entries in spec order. Pairs shared between specs are
/// kept in each. Throws InvalidArgument for an empty spec list.
NeighborhoodCollection assemble(const CombinatorialComplex& cc, const std::vector<NeighborhoodSpec>& specs,
                                const SpatialRepresentation* representation = nullptr);

/// Drops pairs whose receiver or sender satisfies `drop`; empty entries are kept.
NeighborhoodCollection filter_cells(const NeighborhoodCollection& collection, const std::vector<bool>& drop);

}  // namespace etnn

#endif  // ETNN_NEIGHBORHOODS_HPP
