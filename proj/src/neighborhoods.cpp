#include "etnn/neighborhoods.hpp"

#include "etnn/error.hpp"

#include <algorithm>
#include <charconv>
#include <map>

namespace etnn {

std::string_view to_string(NeighborhoodKind kind) noexcept {
    switch (kind) {
        case NeighborhoodKind::inc_up: return "inc_up";
        case NeighborhoodKind::inc_down: return "inc_down";
        case NeighborhoodKind::adj_up: return "adj_up";
        case NeighborhoodKind::adj_down: return "adj_down";
        case NeighborhoodKind::adj_max: return "adj_max";
        case NeighborhoodKind::spatial_adj: return "spatial_adj";
        case NeighborhoodKind::spatial_inc_up: return "spatial_inc_up";
        case NeighborhoodKind::spatial_inc_down: return "spatial_inc_down";
    }
    return "unknown";
}

namespace {

bool is_hop_kind(NeighborhoodKind k) { return k == NeighborhoodKind::inc_up || k == NeighborhoodKind::inc_down; }

int parse_int(std::string_view s, std::string_view what) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw error(errc::parse_error, "bad " + std::string(what) + " '" + std::string(s) + "'");
    return v;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

}  // namespace

std::string NeighborhoodSpec::label() const {
    std::string out(etnn::to_string(kind));
    if (is_hop_kind(kind) && hop != 1) out += ":" + std::to_string(hop);
    return out;
}

std::string NeighborhoodSpec::to_string() const {
    std::string out = label();
    if (rank) out += "@rank=" + std::to_string(*rank);
    return out;
}

NeighborhoodSpec parse_neighborhood(std::string_view text) {
    text = trim(text);
    NeighborhoodSpec spec;
    if (auto at = text.find('@'); at != std::string_view::npos) {
        auto filter = text.substr(at + 1);
        text = text.substr(0, at);
        if (filter.substr(0, 5) != "rank=") throw error(errc::parse_error, "expected @rank=<k|all>");
        filter.remove_prefix(5);
        if (filter != "all") {
            spec.rank = parse_int(filter, "rank");
            if (*spec.rank < 0) throw error(errc::parse_error, "rank filter must be non-negative");
        }
    }
    std::string_view name = text;
    if (auto colon = text.find(':'); colon != std::string_view::npos) {
        name = text.substr(0, colon);
        spec.hop = parse_int(text.substr(colon + 1), "hop");
        if (spec.hop < 1) throw error(errc::parse_error, "hop must be >= 1");
    }
    static constexpr NeighborhoodKind kinds[] = {
        NeighborhoodKind::inc_up,      NeighborhoodKind::inc_down,       NeighborhoodKind::adj_up,
        NeighborhoodKind::adj_down,    NeighborhoodKind::adj_max,        NeighborhoodKind::spatial_adj,
        NeighborhoodKind::spatial_inc_up, NeighborhoodKind::spatial_inc_down,
    };
    auto it = std::find_if(std::begin(kinds), std::end(kinds), [&](auto k) { return etnn::to_string(k) == name; });
    if (it == std::end(kinds)) throw error(errc::parse_error, "unknown neighborhood '" + std::string(name) + "'");
    spec.kind = *it;
    if (!is_hop_kind(spec.kind)) spec.hop = 1;
    return spec;
}

std::vector<NeighborhoodSpec> parse_neighborhood_list(std::string_view text) {
    std::vector<NeighborhoodSpec> out;
    while (!trim(text).empty()) {
        auto comma = text.find(',');
        out.push_back(parse_neighborhood(text.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        text.remove_prefix(comma + 1);
    }
    return out;
}

std::size_t NeighborhoodCollection::total_pairs() const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.pairs.size();
    return n;
}

namespace {

using EntryMap = std::map<std::pair<Rank, Rank>, std::vector<CellPair>>;

std::vector<NeighborhoodEntry> finish(EntryMap&& map, const NeighborhoodSpec& spec) {
    std::vector<NeighborhoodEntry> out;
    for (auto& [ranks, pairs] : map) {
        if (spec.rank && ranks.first != *spec.rank) continue;
        std::sort(pairs.begin(), pairs.end());
        pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
        if (pairs.empty()) continue;
        out.push_back(NeighborhoodEntry{spec.label(), spec, ranks.first, ranks.second, std::move(pairs)});
    }
    return out;
}

/// Cells strictly contained in cell z.
std::vector<CellId> proper_faces(const CombinatorialComplex& cc, CellId z) {
    const auto& nodes = cc.cell(z).nodes;
    std::vector<CellId> out;
    for (auto n : nodes)
        for (CellId c : cc.cells_containing(n))
            if (c != z && is_proper_subset(cc.cell(c).nodes, nodes)) out.push_back(c);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

/// Cells strictly containing cell x.
std::vector<CellId> proper_cofaces(const CombinatorialComplex& cc, CellId x) {
    const auto& nodes = cc.cell(x).nodes;
    std::vector<CellId> out;
    for (CellId c : cc.cells_containing(nodes.front()))
        if (c != x && is_proper_subset(nodes, cc.cell(c).nodes)) out.push_back(c);
    return out;
}

void all_ordered_pairs(const std::vector<CellId>& group, Rank r, EntryMap& map) {
    if (group.size() < 2) return;
    auto& pairs = map[{r, r}];
    for (CellId x : group)
        for (CellId y : group)
            if (x != y) pairs.emplace_back(x, y);
}

NeighborhoodSpec make_spec(NeighborhoodKind kind, int hop = 1) { return NeighborhoodSpec{kind, hop, std::nullopt}; }

}  // namespace

std::vector<NeighborhoodEntry> incidence(const CombinatorialComplex& cc, bool up, int hop) {
    if (hop < 1) throw error(errc::invalid_argument, "hop must be >= 1");
    EntryMap map;
    for (CellId x = 0; x < cc.num_cells(); ++x) {
        const Rank r = cc.cell(x).rank;
        const Rank target = up ? r + hop : r - hop;
        if (target < 0) continue;
        for (CellId y : up ? proper_cofaces(cc, x) : proper_faces(cc, x))
            if (cc.cell(y).rank == target) map[{r, target}].emplace_back(x, y);
    }
    return finish(std::move(map), make_spec(up ? NeighborhoodKind::inc_up : NeighborhoodKind::inc_down, hop));
}

std::vector<NeighborhoodEntry> adjacency(const CombinatorialComplex& cc, bool up) {
    EntryMap map;
    for (CellId z = 0; z < cc.num_cells(); ++z) {
        const Rank rz = cc.cell(z).rank;
        const Rank r = up ? rz - 1 : rz + 1;
        if (r < 0) continue;
        std::vector<CellId> group;
        for (CellId c : up ? proper_faces(cc, z) : proper_cofaces(cc, z))
            if (cc.cell(c).rank == r) group.push_back(c);
        all_ordered_pairs(group, r, map);
    }
    return finish(std::move(map), make_spec(up ? NeighborhoodKind::adj_up : NeighborhoodKind::adj_down));
}

std::vector<NeighborhoodEntry> max_adjacency(const CombinatorialComplex& cc) {
    const Rank top = dimension(cc);
    EntryMap map;
    for (CellId z = 0; z < cc.num_cells(); ++z) {
        if (cc.cell(z).rank != top) continue;
        std::map<Rank, std::vector<CellId>> by_rank;
        for (CellId c : proper_faces(cc, z)) by_rank[cc.cell(c).rank].push_back(c);
        for (const auto& [r, group] : by_rank) all_ordered_pairs(group, r, map);
    }
    return finish(std::move(map), make_spec(NeighborhoodKind::adj_max));
}

std::vector<NeighborhoodEntry> spatial_neighborhoods(const CombinatorialComplex& cc,
                                                     const SpatialRepresentation& representation,
                                                     NeighborhoodKind kind) {
    int offset = 0;
    switch (kind) {
        case NeighborhoodKind::spatial_adj: offset = 0; break;
        case NeighborhoodKind::spatial_inc_up: offset = 1; break;
        case NeighborhoodKind::spatial_inc_down: offset = -1; break;
        default: throw error(errc::invalid_argument, "not a spatial neighborhood kind");
    }
    std::vector<Footprint> shapes;
    shapes.reserve(cc.num_cells());
    for (CellId id = 0; id < cc.num_cells(); ++id) {
        if (id < representation.shapes.size() && representation.shapes[id]) {
            shapes.push_back(*representation.shapes[id]);
            continue;
        }
        const auto& nodes = cc.cell(id).nodes;
        Matrix pts(static_cast<Eigen::Index>(nodes.size()), cc.spatial_dim());
        for (std::size_t i = 0; i < nodes.size(); ++i) pts.row(static_cast<Eigen::Index>(i)) = cc.positions().row(nodes[i]);
        shapes.push_back(geometry::PointSet{std::move(pts)});
    }
    EntryMap map;
    for (CellId x = 0; x < cc.num_cells(); ++x) {
        const Rank r = cc.cell(x).rank;
        for (CellId y = 0; y < cc.num_cells(); ++y) {
            if (x == y || cc.cell(y).rank != r + offset) continue;
            // Symmetric relation for adjacency: evaluate each unordered pair once.
            if (offset == 0 && y < x) continue;
            if (!geometry::intersects(shapes[x], shapes[y])) continue;
            map[{r, r + offset}].emplace_back(x, y);
            if (offset == 0) map[{r, r}].emplace_back(y, x);
        }
    }
    return finish(std::move(map), make_spec(kind));
}

std::vector<NeighborhoodEntry> materialize(const CombinatorialComplex& cc, const NeighborhoodSpec& spec,
                                           const SpatialRepresentation* representation) {
    std::vector<NeighborhoodEntry> raw;
    static const SpatialRepresentation empty_representation{};
    switch (spec.kind) {
        case NeighborhoodKind::inc_up: raw = incidence(cc, true, spec.hop); break;
        case NeighborhoodKind::inc_down: raw = incidence(cc, false, spec.hop); break;
        case NeighborhoodKind::adj_up: raw = adjacency(cc, true); break;
        case NeighborhoodKind::adj_down: raw = adjacency(cc, false); break;
        case NeighborhoodKind::adj_max: raw = max_adjacency(cc); break;
        default:
            raw = spatial_neighborhoods(cc, representation ? *representation : empty_representation, spec.kind);
            break;
    }
    std::vector<NeighborhoodEntry> out;
    for (auto& e : raw) {
        if (spec.rank && e.receiver_rank != *spec.rank) continue;
        e.spec = spec;
        e.label = spec.label();
        out.push_back(std::move(e));
    }
    return out;
}

NeighborhoodCollection assemble(const CombinatorialComplex& cc, const std::vector<NeighborhoodSpec>& specs,
                                const SpatialRepresentation* representation) {
    if (specs.empty()) throw error(errc::invalid_argument, "at least one neighborhood spec is required");
    NeighborhoodCollection out;
    for (const auto& spec : specs) {
        auto entries = materialize(cc, spec, representation);
        for (auto& e : entries) out.entries.push_back(std::move(e));
    }
    return out;
}

NeighborhoodCollection filter_cells(const NeighborhoodCollection& collection, const std::vector<bool>& drop) {
    NeighborhoodCollection out = collection;
    for (auto& e : out.entries) {
        std::erase_if(e.pairs, [&](const CellPair& p) { return drop.at(p.first) || drop.at(p.second); });
    }
    return out;
}

}  // namespace etnn
