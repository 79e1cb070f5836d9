#include "etnn/lifts.hpp"

#include "etnn/error.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <map>
#include <numeric>
#include <set>

namespace etnn {

namespace {

constexpr std::size_t kMaxCycles = 100000;

std::vector<std::vector<NodeId>> adjacency_lists(const GeometricGraph& g) {
    std::vector<std::vector<NodeId>> adj(g.num_nodes);
    for (auto [u, v] : g.edges) {
        adj[u].push_back(v);
        adj[v].push_back(u);
    }
    for (auto& a : adj) std::sort(a.begin(), a.end());
    return adj;
}

bool adjacent(const std::vector<std::vector<NodeId>>& adj, NodeId u, NodeId v) {
    return std::binary_search(adj[u].begin(), adj[u].end(), v);
}

std::vector<double> node_row(const GeometricGraph& g, NodeId n) {
    if (g.node_features.cols() == 0) return {};
    const auto row = g.node_features.row(n);
    return {row.begin(), row.end()};
}

std::vector<CellSpec> node_cells(const GeometricGraph& g, const char* tag) {
    std::vector<CellSpec> out;
    out.reserve(g.num_nodes);
    for (NodeId n = 0; n < g.num_nodes; ++n) out.push_back(CellSpec{{n}, 0, node_row(g, n), {tag}});
    return out;
}

void add_edge_cells(const GeometricGraph& g, const LiftAnnotations* ann, const char* tag, std::vector<CellSpec>& out) {
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        std::vector<double> f;
        if (ann && e < ann->edge_features.size()) f = ann->edge_features[e];
        out.push_back(CellSpec{{g.edges[e].first, g.edges[e].second}, 1, std::move(f), {tag}});
    }
}

CombinatorialComplex build_from(const GeometricGraph& g, std::vector<CellSpec> specs) {
    validate_graph(g);
    return build_complex(g.num_nodes, g.spatial_dim, g.positions, merge_cells(std::move(specs)), g.velocities);
}

int parse_count(std::string_view s, std::string_view what) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw error(errc::parse_error, "bad " + std::string(what) + " '" + std::string(s) + "'");
    return v;
}

std::size_t tag_order(const std::string& tag) {
    static const std::vector<std::string> order = {"node", "atom",  "edge", "bond",    "hyperedge",
                                                   "functional_group", "ring", "clique", "path", "virtual"};
    auto it = std::find(order.begin(), order.end(), tag);
    return static_cast<std::size_t>(it - order.begin());
}

}  // namespace

void validate_graph(const GeometricGraph& g) {
    const auto n = static_cast<Eigen::Index>(g.num_nodes);
    if (g.spatial_dim < 1 || g.positions.rows() != n || g.positions.cols() != g.spatial_dim)
        throw error(errc::dimension_mismatch, "graph positions must be num_nodes x spatial_dim");
    if (g.node_features.cols() > 0 && g.node_features.rows() != n)
        throw error(errc::dimension_mismatch, "node_features must have one row per node");
    std::set<std::pair<NodeId, NodeId>> seen;
    for (auto [u, v] : g.edges) {
        if (u >= g.num_nodes || v >= g.num_nodes) throw error(errc::out_of_range_node, "edge references a missing node");
        if (u == v) throw error(errc::invalid_argument, "self edge at node " + std::to_string(u));
        if (!seen.emplace(std::min(u, v), std::max(u, v)).second)
            throw error(errc::invalid_argument,
                        "duplicate edge " + std::to_string(u) + "-" + std::to_string(v));
    }
}

std::vector<CellSpec> merge_cells(std::vector<CellSpec> cells) {
    std::map<std::vector<NodeId>, std::size_t> index;
    std::vector<std::vector<std::pair<std::string, std::vector<double>>>> parts;
    std::vector<CellSpec> out;
    for (auto& c : cells) {
        std::sort(c.nodes.begin(), c.nodes.end());
        c.nodes.erase(std::unique(c.nodes.begin(), c.nodes.end()), c.nodes.end());
        auto [it, fresh] = index.emplace(c.nodes, out.size());
        const std::string tag = c.tags.empty() ? std::string{} : c.tags.front();
        if (fresh) {
            parts.push_back({{tag, std::move(c.features)}});
            for (std::size_t t = 1; t < c.tags.size(); ++t) parts.back().emplace_back(c.tags[t], std::vector<double>{});
            out.push_back(CellSpec{std::move(c.nodes), c.rank, {}, {}});
            continue;
        }
        CellSpec& prev = out[it->second];
        if (prev.rank != c.rank)
            throw error(errc::rank_violation, "node-set annotated with ranks " + std::to_string(prev.rank) + " and " +
                                                  std::to_string(c.rank));
        parts[it->second].emplace_back(tag, std::move(c.features));
        for (std::size_t t = 1; t < c.tags.size(); ++t) parts[it->second].emplace_back(c.tags[t], std::vector<double>{});
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto& p = parts[i];
        std::stable_sort(p.begin(), p.end(), [](const auto& a, const auto& b) {
            return tag_order(a.first) < tag_order(b.first);
        });
        for (auto& [tag, f] : p) {
            if (!tag.empty() && std::find(out[i].tags.begin(), out[i].tags.end(), tag) == out[i].tags.end())
                out[i].tags.push_back(tag);
            out[i].features.insert(out[i].features.end(), f.begin(), f.end());
        }
    }
    return out;
}

std::string LiftRecipe::to_string() const {
    std::string out = molecular ? "molecular" : "graph";
    if (edges) out += "+edges";
    if (clique_dim > 0) out += "+cliques:" + std::to_string(clique_dim);
    if (cycle_len > 0) out += "+cycles:" + std::to_string(cycle_len);
    if (hyperedges) out += "+hyperedges";
    if (rings) out += "+rings";
    if (groups) out += "+groups";
    if (virtual_cell) out += virtual_rank ? "+virtual:" + std::to_string(*virtual_rank) : "+virtual";
    return out;
}

LiftRecipe parse_recipe(std::string_view text) {
    LiftRecipe r;
    std::vector<std::string_view> parts;
    while (true) {
        const auto plus = text.find('+');
        parts.push_back(text.substr(0, plus));
        if (plus == std::string_view::npos) break;
        text.remove_prefix(plus + 1);
    }
    if (parts[0] == "molecular") r.molecular = true;
    else if (parts[0] != "graph") throw error(errc::parse_error, "recipe must start with graph or molecular");
    for (std::size_t i = 1; i < parts.size(); ++i) {
        const auto colon = parts[i].find(':');
        const auto head = parts[i].substr(0, colon);
        const auto arg = colon == std::string_view::npos ? std::string_view{} : parts[i].substr(colon + 1);
        if (head == "edges") r.edges = true;
        else if (head == "cliques") r.clique_dim = arg.empty() ? 2 : parse_count(arg, "clique dimension");
        else if (head == "cycles") r.cycle_len = arg.empty() ? 6 : parse_count(arg, "cycle length");
        else if (head == "hyperedges") r.hyperedges = true;
        else if (head == "rings") r.rings = true;
        else if (head == "groups") r.groups = true;
        else if (head == "virtual") {
            r.virtual_cell = true;
            if (!arg.empty()) r.virtual_rank = parse_count(arg, "virtual rank");
        } else {
            throw error(errc::parse_error, "unknown recipe part '" + std::string(parts[i]) + "'");
        }
    }
    if (r.clique_dim < 0 || r.cycle_len < 0) throw error(errc::parse_error, "negative recipe parameter");
    return r;
}

std::vector<std::vector<NodeId>> cliques(const GeometricGraph& g, int max_size) {
    const auto adj = adjacency_lists(g);
    std::vector<std::vector<NodeId>> out;
    std::vector<NodeId> current;
    std::function<void(const std::vector<NodeId>&)> grow = [&](const std::vector<NodeId>& candidates) {
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            const NodeId v = candidates[i];
            current.push_back(v);
            out.push_back(current);
            if (static_cast<int>(current.size()) < max_size) {
                std::vector<NodeId> next;
                for (std::size_t j = i + 1; j < candidates.size(); ++j)
                    if (adjacent(adj, v, candidates[j])) next.push_back(candidates[j]);
                grow(next);
            }
            current.pop_back();
        }
    };
    std::vector<NodeId> all(g.num_nodes);
    std::iota(all.begin(), all.end(), NodeId{0});
    if (max_size >= 1) grow(all);
    return out;
}

std::vector<std::vector<NodeId>> induced_cycles(const GeometricGraph& g, int max_len) {
    if (max_len < 3 || max_len > 12) throw error(errc::invalid_argument, "cycle length bound must be in [3, 12]");
    const auto adj = adjacency_lists(g);
    std::vector<std::vector<NodeId>> out;
    std::vector<NodeId> path;
    std::vector<bool> on_path(g.num_nodes, false);
    // Paths start at their smallest node s; a cycle closes when the last node
    // touches s. Every extension must be chordless with respect to the path.
    std::function<void()> extend = [&]() {
        const NodeId s = path.front(), tail = path.back();
        for (NodeId v : adj[tail]) {
            if (v <= s || on_path[v]) continue;
            bool chord = false;
            for (std::size_t i = 1; i + 1 < path.size(); ++i)
                if (adjacent(adj, v, path[i])) chord = true;
            if (chord) continue;
            if (path.size() >= 2 && adjacent(adj, v, s)) {
                if (path[1] < v) {
                    auto cycle = path;
                    cycle.push_back(v);
                    out.push_back(std::move(cycle));
                    if (out.size() > kMaxCycles) throw error(errc::cycle_limit, "more than 100000 induced cycles");
                }
                continue;
            }
            if (static_cast<int>(path.size()) + 1 >= max_len) continue;
            path.push_back(v);
            on_path[v] = true;
            extend();
            on_path[v] = false;
            path.pop_back();
        }
    };
    for (NodeId s = 0; s < g.num_nodes; ++s) {
        path = {s};
        on_path[s] = true;
        extend();
        on_path[s] = false;
    }
    return out;
}

std::vector<std::vector<NodeId>> simple_paths(const GeometricGraph& g, int length) {
    const auto adj = adjacency_lists(g);
    std::vector<std::vector<NodeId>> out;
    std::vector<NodeId> path;
    std::vector<bool> on_path(g.num_nodes, false);
    std::function<void()> extend = [&]() {
        if (static_cast<int>(path.size()) == length) {
            if (path.front() < path.back() || length == 1) out.push_back(path);
            return;
        }
        for (NodeId v : adj[path.back()]) {
            if (on_path[v]) continue;
            path.push_back(v);
            on_path[v] = true;
            extend();
            on_path[v] = false;
            path.pop_back();
        }
    };
    for (NodeId s = 0; s < g.num_nodes && length >= 1; ++s) {
        path = {s};
        on_path[s] = true;
        extend();
        on_path[s] = false;
    }
    return out;
}

CombinatorialComplex apply_recipe(const GeometricGraph& g, const LiftAnnotations& ann, const LiftRecipe& recipe) {
    validate_graph(g);
    auto specs = node_cells(g, recipe.molecular ? "atom" : "node");
    if (recipe.edges || recipe.molecular || recipe.clique_dim > 0 || recipe.cycle_len > 0)
        add_edge_cells(g, &ann, recipe.molecular ? "bond" : "edge", specs);
    if (recipe.clique_dim > 0)
        for (auto& c : cliques(g, recipe.clique_dim + 1))
            if (c.size() >= 3) specs.push_back(CellSpec{c, static_cast<Rank>(c.size()) - 1, {}, {"clique"}});
    if (recipe.cycle_len > 0)
        for (auto& c : induced_cycles(g, recipe.cycle_len)) specs.push_back(CellSpec{c, 2, {}, {"ring"}});
    if (recipe.hyperedges)
        for (const auto& h : ann.hyperedges) {
            if (h.empty()) throw error(errc::empty_cell, "empty hyperedge");
            std::set<NodeId> distinct(h.begin(), h.end());
            specs.push_back(CellSpec{h, distinct.size() == 1 ? 0 : 1, {}, {"hyperedge"}});
        }
    if (recipe.rings)
        for (const auto& r : ann.rings) specs.push_back(CellSpec{r.nodes, 2, r.features, {"ring"}});
    if (recipe.groups)
        for (const auto& f : ann.functional_groups) {
            std::set<NodeId> distinct(f.nodes.begin(), f.nodes.end());
            const Rank rank = distinct.size() <= 1 ? 0 : (distinct.size() == 2 ? 1 : 2);
            specs.push_back(CellSpec{f.nodes, rank, f.features, {"functional_group"}});
        }
    auto cc = build_from(g, std::move(specs));
    if (recipe.virtual_cell) cc = add_virtual_cell(cc, recipe.virtual_rank.value_or(dimension(cc) + 1));
    return cc;
}

CombinatorialComplex graph_lift(const GeometricGraph& g, bool include_edges) {
    auto specs = node_cells(g, "node");
    if (include_edges) add_edge_cells(g, nullptr, "edge", specs);
    return build_from(g, std::move(specs));
}

CombinatorialComplex clique_lift(const GeometricGraph& g, int max_dim) {
    if (max_dim < 1) throw error(errc::invalid_argument, "clique dimension must be >= 1");
    auto specs = node_cells(g, "node");
    for (auto& c : cliques(g, max_dim + 1))
        if (c.size() >= 2)
            specs.push_back(CellSpec{c, static_cast<Rank>(c.size()) - 1, {}, {c.size() == 2 ? "edge" : "clique"}});
    return build_from(g, std::move(specs));
}

CombinatorialComplex cycle_lift(const GeometricGraph& g, int max_len) {
    LiftRecipe r;
    r.edges = true;
    r.cycle_len = max_len;
    return apply_recipe(g, {}, r);
}

CombinatorialComplex hypergraph_lift(const GeometricGraph& g, const std::vector<std::vector<NodeId>>& hyperedges) {
    LiftRecipe r;
    r.hyperedges = true;
    LiftAnnotations ann;
    ann.hyperedges = hyperedges;
    return apply_recipe(g, ann, r);
}

CombinatorialComplex molecular_lift(const GeometricGraph& g, const LiftAnnotations& annotations) {
    LiftRecipe r;
    r.molecular = r.edges = r.rings = r.groups = true;
    return apply_recipe(g, annotations, r);
}

CombinatorialComplex add_virtual_cell(const CombinatorialComplex& cc, Rank rank) {
    if (rank < dimension(cc))
        throw error(errc::rank_violation, "virtual cell rank " + std::to_string(rank) + " is below dimension " +
                                              std::to_string(dimension(cc)));
    auto specs = cell_specs(cc);
    std::vector<NodeId> all(cc.num_nodes());
    std::iota(all.begin(), all.end(), NodeId{0});
    specs.push_back(CellSpec{std::move(all), rank, {}, {"virtual"}});
    return build_complex(cc.num_nodes(), cc.spatial_dim(), cc.positions(), std::move(specs), cc.velocities());
}

std::pair<GeometricGraph, GeometricGraph> k_chain_graphs(int k, int spatial_dim) {
    if (k < 1) throw error(errc::invalid_argument, "k must be >= 1");
    if (spatial_dim < 2) throw error(errc::dimension_mismatch, "k-chains need at least two dimensions");
    GeometricGraph a;
    a.num_nodes = static_cast<std::size_t>(k) + 2;
    a.spatial_dim = spatial_dim;
    a.positions = Matrix::Zero(k + 2, spatial_dim);
    a.positions(0, 1) = 1.0;
    for (int i = 1; i <= k + 1; ++i) a.positions(i, 0) = i;
    a.positions(k + 1, 1) = 1.0;
    a.node_features = Matrix::Ones(k + 2, 1);
    for (NodeId i = 0; i + 1 < a.num_nodes; ++i) a.edges.emplace_back(i, i + 1);
    GeometricGraph b = a;
    b.positions(k + 1, 1) = -1.0;
    return {a, b};
}

std::pair<CombinatorialComplex, CombinatorialComplex> k_chain_pair(int k, int spatial_dim) {
    auto [a, b] = k_chain_graphs(k, spatial_dim);
    return {graph_lift(a, true), graph_lift(b, true)};
}

NeighborhoodEntry edge_adjacency(const CombinatorialComplex& cc, const GeometricGraph& g) {
    NeighborhoodEntry e;
    e.spec = NeighborhoodSpec{NeighborhoodKind::adj_up, 1, 0};
    e.label = e.spec.label();
    for (auto [u, v] : g.edges) {
        e.pairs.emplace_back(cc.node_cell(u), cc.node_cell(v));
        e.pairs.emplace_back(cc.node_cell(v), cc.node_cell(u));
    }
    std::sort(e.pairs.begin(), e.pairs.end());
    e.pairs.erase(std::unique(e.pairs.begin(), e.pairs.end()), e.pairs.end());
    return e;
}

std::pair<CombinatorialComplex, NeighborhoodCollection> expressivity_lift(const GeometricGraph& g,
                                                                          std::string_view variant) {
    validate_graph(g);
    const auto n = static_cast<NodeId>(g.num_nodes);
    auto specs = node_cells(g, "node");
    auto range = [](NodeId lo, NodeId hi) {
        std::vector<NodeId> out;
        for (NodeId i = lo; i < hi; ++i) out.push_back(i);
        return out;
    };
    const bool a_variant = variant == "graph" || variant == "1a" || variant == "2a" || variant == "3a" ||
                           variant == "3a-up";
    if (variant == "1a") {
        specs.push_back(CellSpec{range(0, n), 1, {}, {"cell"}});
    } else if (variant == "2a") {
        if (n < 5) throw error(errc::unsupported_variant, "lift 2a needs at least 5 nodes");
        specs.push_back(CellSpec{range(0, 4), 1, {}, {"cell"}});
        specs.push_back(CellSpec{range(n - 4, n), 1, {}, {"cell"}});
    } else if (variant == "3a" || variant == "3a-up") {
        if (n < 5) throw error(errc::unsupported_variant, "lift 3a needs at least 5 nodes");
        std::vector<NodeId> big = range(2, n - 1);
        big.insert(big.begin(), 0);
        specs.push_back(CellSpec{big, 1, {}, {"cell"}});
        specs.push_back(CellSpec{{1, n - 1}, 1, {}, {"cell"}});
    } else if (variant == "1b") {
        add_edge_cells(g, nullptr, "edge", specs);
    } else if (variant == "2b") {
        specs.push_back(CellSpec{range(0, n), 1, {}, {"cell"}});
    } else if (variant == "3b") {
        add_edge_cells(g, nullptr, "edge", specs);
        specs.push_back(CellSpec{range(0, n), 2, {}, {"cell"}});
    } else if (variant == "4b") {
        add_edge_cells(g, nullptr, "edge", specs);
        for (auto& p : simple_paths(g, 3)) specs.push_back(CellSpec{p, 2, {}, {"path"}});
    } else if (variant != "graph") {
        throw error(errc::unsupported_variant, "unknown lift variant '" + std::string(variant) + "'");
    }
    auto cc = build_from(g, std::move(specs));
    NeighborhoodCollection coll;
    if (variant == "3a-up") {
        coll = assemble(cc, {NeighborhoodSpec{NeighborhoodKind::adj_up}});
    } else if (a_variant) {
        coll.entries.push_back(edge_adjacency(cc, g));
        if (variant != "graph")
            for (auto kind : {NeighborhoodKind::inc_up, NeighborhoodKind::inc_down})
                for (auto& e : materialize(cc, NeighborhoodSpec{kind})) coll.entries.push_back(std::move(e));
    } else {
        coll = assemble(cc, {NeighborhoodSpec{NeighborhoodKind::inc_up}, NeighborhoodSpec{NeighborhoodKind::inc_down},
                             NeighborhoodSpec{NeighborhoodKind::adj_up}, NeighborhoodSpec{NeighborhoodKind::adj_down}});
    }
    return {std::move(cc), std::move(coll)};
}

HasseGraph hasse_graph(const CombinatorialComplex& cc, const NeighborhoodCollection& collection,
                       Aggregator aggregator) {
    if (aggregator != Aggregator::mean && aggregator != Aggregator::sum)
        throw error(errc::invalid_argument, "cell positions need a linear aggregator (mean or sum)");
    HasseGraph h;
    h.positions = Matrix::Zero(static_cast<Eigen::Index>(cc.num_cells()), cc.spatial_dim());
    for (CellId id = 0; id < cc.num_cells(); ++id) {
        const auto& nodes = cc.cell(id).nodes;
        for (auto n : nodes) h.positions.row(id) += cc.positions().row(n);
        if (aggregator == Aggregator::mean) h.positions.row(id) /= static_cast<double>(nodes.size());
        h.ranks.push_back(cc.cell(id).rank);
    }
    for (std::size_t e = 0; e < collection.entries.size(); ++e)
        for (const auto& p : collection.entries[e].pairs) {
            h.edges.push_back(p);
            h.edge_entry.push_back(e);
        }
    return h;
}

bool is_connected(const HasseGraph& h) {
    const std::size_t n = h.num_nodes();
    if (n <= 1) return true;
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    std::function<std::size_t(std::size_t)> root = [&](std::size_t x) {
        return parent[x] == x ? x : parent[x] = root(parent[x]);
    };
    std::size_t components = n;
    for (auto [r, s] : h.edges) {
        const auto a = root(r), b = root(s);
        if (a != b) parent[a] = b, --components;
    }
    return components == 1;
}

GeometricGraph epsilon_graph(const Matrix& positions, double eps) {
    GeometricGraph g;
    g.num_nodes = static_cast<std::size_t>(positions.rows());
    g.spatial_dim = static_cast<int>(positions.cols());
    g.positions = positions;
    for (Eigen::Index i = 0; i < positions.rows(); ++i)
        for (Eigen::Index j = i + 1; j < positions.rows(); ++j)
            if ((positions.row(i) - positions.row(j)).norm() <= eps)
                g.edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
    return g;
}

}  // namespace etnn
