#include "etnn/complex.hpp"

#include "etnn/error.hpp"

#include <algorithm>
#include <numeric>

namespace etnn {

bool Cell::has_tag(std::string_view tag) const {
    return std::find(tags.begin(), tags.end(), tag) != tags.end();
}

bool is_proper_subset(std::span<const NodeId> a, std::span<const NodeId> b) {
    if (a.size() >= b.size()) return false;
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

std::optional<CellId> CombinatorialComplex::find(std::span<const NodeId> nodes) const {
    std::vector<NodeId> key(nodes.begin(), nodes.end());
    std::sort(key.begin(), key.end());
    key.erase(std::unique(key.begin(), key.end()), key.end());
    auto it = cell_index_.find(key);
    if (it == cell_index_.end()) return std::nullopt;
    return it->second;
}

CombinatorialComplex CombinatorialComplex::with_geometry(Matrix positions, std::optional<Matrix> velocities) const {
    if (positions.rows() != static_cast<Eigen::Index>(num_nodes_) || positions.cols() != spatial_dim_)
        throw error(errc::dimension_mismatch, "replacement positions have the wrong shape");
    if (velocities && (velocities->rows() != positions.rows() || velocities->cols() != positions.cols()))
        throw error(errc::dimension_mismatch, "replacement velocities have the wrong shape");
    CombinatorialComplex out = *this;
    out.positions_ = std::move(positions);
    if (velocities) out.velocities_ = std::move(velocities);
    return out;
}

namespace {

void check_geometry(std::size_t num_nodes, int spatial_dim, const Matrix& m, const char* what) {
    if (spatial_dim < 1) throw error(errc::dimension_mismatch, "spatial_dim must be positive");
    if (m.rows() != static_cast<Eigen::Index>(num_nodes) || m.cols() != spatial_dim)
        throw error(errc::dimension_mismatch, std::string(what) + " must be num_nodes x spatial_dim");
}

}  // namespace

CombinatorialComplex build_complex(std::size_t num_nodes, int spatial_dim, const Matrix& positions,
                                   std::vector<CellSpec> cells, std::optional<Matrix> velocities,
                                   BuildOptions options) {
    check_geometry(num_nodes, spatial_dim, positions, "positions");
    if (velocities) check_geometry(num_nodes, spatial_dim, *velocities, "velocities");

    CombinatorialComplex cc;
    cc.num_nodes_ = num_nodes;
    cc.spatial_dim_ = spatial_dim;
    cc.positions_ = positions;
    cc.velocities_ = std::move(velocities);
    cc.node_cell_.assign(num_nodes, CellId(-1));

    auto add = [&](CellSpec spec) {
        if (spec.nodes.empty()) throw error(errc::empty_cell, "cell with no nodes");
        std::sort(spec.nodes.begin(), spec.nodes.end());
        spec.nodes.erase(std::unique(spec.nodes.begin(), spec.nodes.end()), spec.nodes.end());
        if (spec.nodes.back() >= num_nodes)
            throw error(errc::out_of_range_node, "node " + std::to_string(spec.nodes.back()) + " >= num_nodes " +
                                                     std::to_string(num_nodes));
        if (spec.rank < 0) throw error(errc::rank_violation, "negative rank");
        if ((spec.nodes.size() == 1) != (spec.rank == 0))
            throw error(errc::rank_violation, "rank 0 is reserved for singleton cells");
        const auto id = static_cast<CellId>(cc.cells_.size());
        if (!cc.cell_index_.emplace(spec.nodes, id).second) {
            std::string list;
            for (auto n : spec.nodes) list += (list.empty() ? "" : ",") + std::to_string(n);
            throw error(errc::duplicate_cell, "node-set {" + list + "} given twice");
        }
        if (spec.nodes.size() == 1) cc.node_cell_[spec.nodes[0]] = id;
        cc.cells_.push_back(Cell{std::move(spec.nodes), spec.rank, std::move(spec.features), std::move(spec.tags)});
    };

    for (auto& spec : cells) add(std::move(spec));
    for (NodeId n = 0; n < num_nodes; ++n)
        if (cc.node_cell_[n] == CellId(-1)) add(CellSpec{{n}, 0, {}, {"node"}});

    cc.incident_.assign(num_nodes, {});
    for (CellId id = 0; id < cc.cells_.size(); ++id)
        for (auto n : cc.cells_[id].nodes) cc.incident_[n].push_back(id);

    if (options.validate_ranks) {
        // Any superset of x contains x's first node, so scanning that node's
        // incidence list covers every containment pair.
        for (CellId x = 0; x < cc.cells_.size(); ++x) {
            const Cell& cx = cc.cells_[x];
            for (CellId y : cc.incident_[cx.nodes.front()]) {
                const Cell& cy = cc.cells_[y];
                if (x == y || !is_proper_subset(cx.nodes, cy.nodes)) continue;
                if (cx.rank > cy.rank)
                    throw error(errc::rank_violation, "cell " + std::to_string(x) + " (rank " +
                                                          std::to_string(cx.rank) + ") is contained in cell " +
                                                          std::to_string(y) + " (rank " + std::to_string(cy.rank) +
                                                          ")");
            }
        }
    }
    return cc;
}

std::vector<CellSpec> cell_specs(const CombinatorialComplex& cc) {
    std::vector<CellSpec> out;
    out.reserve(cc.num_cells());
    for (const auto& c : cc.cells()) out.push_back(CellSpec{c.nodes, c.rank, c.features, c.tags});
    return out;
}

CombinatorialComplex relabel(const CombinatorialComplex& cc, std::span<const NodeId> perm) {
    const std::size_t n = cc.num_nodes();
    if (perm.size() != n) throw error(errc::invalid_permutation, "permutation length differs from num_nodes");
    std::vector<bool> seen(n, false);
    for (auto p : perm) {
        if (p >= n || seen[p]) throw error(errc::invalid_permutation, "not a bijection on [0, num_nodes)");
        seen[p] = true;
    }
    Matrix pos(cc.positions().rows(), cc.positions().cols());
    std::optional<Matrix> vel;
    if (cc.velocities()) vel = Matrix(pos.rows(), pos.cols());
    for (std::size_t i = 0; i < n; ++i) {
        pos.row(perm[i]) = cc.positions().row(i);
        if (vel) vel->row(perm[i]) = cc.velocities()->row(i);
    }
    auto specs = cell_specs(cc);
    for (auto& s : specs)
        for (auto& v : s.nodes) v = perm[v];
    return build_complex(n, cc.spatial_dim(), pos, std::move(specs), std::move(vel), BuildOptions{false});
}

std::vector<CellId> cells_of_rank(const CombinatorialComplex& cc, Rank k) {
    std::vector<CellId> out;
    for (CellId id = 0; id < cc.num_cells(); ++id)
        if (cc.cell(id).rank == k) out.push_back(id);
    return out;
}

Rank dimension(const CombinatorialComplex& cc) {
    Rank d = 0;
    for (const auto& c : cc.cells()) d = std::max(d, c.rank);
    return d;
}

std::vector<std::size_t> rank_counts(const CombinatorialComplex& cc) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(dimension(cc)) + 1, 0);
    for (const auto& c : cc.cells()) ++counts[static_cast<std::size_t>(c.rank)];
    return counts;
}

}  // namespace etnn
