#include "etnn/error.hpp"
#include "etnn/geometry.hpp"
#include "etnn/lifts.hpp"
#include "etnn/neighborhoods.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace etnn;
using oracle::PairSet;

namespace {

// Cells 0..2: {0},{1},{2} (a, b, c); 3: {0,1}; 4: {1,2}; 5: {0,1,2}.
CombinatorialComplex abc() {
    Matrix p(3, 2);
    p << 0, 0, 1, 0, 0, 1;
    return build_complex(3, 2, p, {{{0}, 0}, {{1}, 0}, {{2}, 0}, {{0, 1}, 1}, {{1, 2}, 1}, {{0, 1, 2}, 2}});
}

// Four nodes, two edges and a triangle; no cell holds every node.
CombinatorialComplex open_complex() {
    Matrix p(4, 2);
    p << 0, 0, 1, 0, 0, 1, 2, 2;
    return build_complex(4, 2, p, {{{0, 1}, 1}, {{1, 2}, 1}, {{0, 1, 2}, 2}, {{2, 3}, 1}});
}

PairSet pairs_of(const CombinatorialComplex& cc, const std::vector<NeighborhoodEntry>& e) {
    return oracle::entry_pairs(cc, e);
}

PairSet senders_of(const PairSet& s, CellId receiver) {
    PairSet out;
    for (const auto& p : s)
        if (p.first == receiver) out.insert(p);
    return out;
}

const NeighborhoodKind kCombinatorial[] = {NeighborhoodKind::inc_up, NeighborhoodKind::inc_down,
                                           NeighborhoodKind::adj_up, NeighborhoodKind::adj_down,
                                           NeighborhoodKind::adj_max};

}  // namespace

TEST(Neighborhoods, IncidenceExamples) {
    const auto cc = abc();
    const auto up1 = pairs_of(cc, incidence(cc, true, 1));
    EXPECT_EQ(senders_of(up1, 0), (PairSet{{0, 3}}));
    const auto up2 = pairs_of(cc, incidence(cc, true, 2));
    EXPECT_EQ(senders_of(up2, 0), (PairSet{{0, 5}}));
    for (CellId n = 0; n < 3; ++n) EXPECT_TRUE(senders_of(pairs_of(cc, incidence(cc, false, 1)), n).empty());
    EXPECT_THROW(incidence(cc, true, 0), error);
}

TEST(Neighborhoods, AdjacencyExamples) {
    const auto cc = abc();
    const auto up = pairs_of(cc, adjacency(cc, true));
    const auto down = pairs_of(cc, adjacency(cc, false));
    EXPECT_TRUE(up.count({3, 4}) && up.count({4, 3}));
    EXPECT_TRUE(down.count({3, 4}) && down.count({4, 3}));
    EXPECT_TRUE(up.count({0, 1}) && up.count({1, 0}));
    EXPECT_FALSE(up.count({0, 2}));
    // A rank holding one cell has no adjacency.
    for (const auto& p : up) EXPECT_NE(cc.cell(p.first).rank, 2);
}

TEST(Neighborhoods, GraphAdjacencyIsEdgeAdjacency) {
    GeometricGraph g;
    g.num_nodes = 5;
    g.spatial_dim = 2;
    g.positions = Matrix::Random(5, 2);
    g.edges = {{0, 1}, {1, 2}, {2, 3}, {1, 4}};
    const auto cc = graph_lift(g, true);
    PairSet expected;
    for (auto [a, b] : g.edges) {
        expected.insert({cc.node_cell(a), cc.node_cell(b)});
        expected.insert({cc.node_cell(b), cc.node_cell(a)});
    }
    PairSet rank0;
    for (const auto& p : pairs_of(cc, adjacency(cc, true)))
        if (cc.cell(p.first).rank == 0) rank0.insert(p);
    EXPECT_EQ(rank0, expected);
}

TEST(Neighborhoods, MaxAdjacencyWithVirtualCell) {
    const auto cc = add_virtual_cell(open_complex(), 3);
    const auto pairs = pairs_of(cc, max_adjacency(cc));
    PairSet expected;
    for (CellId x = 0; x < cc.num_cells(); ++x)
        for (CellId y = 0; y < cc.num_cells(); ++y)
            if (x != y && cc.cell(x).rank == cc.cell(y).rank && cc.cell(x).rank < 3) expected.insert({x, y});
    EXPECT_EQ(pairs, expected);
}

TEST(Neighborhoods, MaxAdjacencyWithoutCoveringCell) {
    Matrix p = Matrix::Zero(4, 2);
    const auto cc = build_complex(4, 2, p, {{{0, 1}, 1}, {{2, 3}, 1}});
    const auto pairs = pairs_of(cc, max_adjacency(cc));
    EXPECT_TRUE(pairs.count({cc.node_cell(0), cc.node_cell(1)}));
    EXPECT_FALSE(pairs.count({cc.node_cell(1), cc.node_cell(2)}));
    for (const auto& q : pairs) EXPECT_NE(q.first, q.second);
}

TEST(Neighborhoods, SpatialPolygonAndPolyline) {
    // Node 0..3 form a square, 4..5 a segment crossing it, 6..7 a disjoint square.
    Matrix p(10, 2);
    p << 0, 0, 1, 0, 1, 1, 0, 1, -1, 0.5, 2, 0.5, 3, 0, 4, 0, 4, 1, 3, 1;
    const auto cc = build_complex(10, 2, p, {{{0, 1, 2, 3}, 1}, {{4, 5}, 1}, {{6, 7, 8, 9}, 1}});
    SpatialRepresentation rep;
    rep.shapes.resize(cc.num_cells());
    auto square = [&](std::initializer_list<NodeId> ids) {
        Matrix v(4, 2);
        int i = 0;
        for (NodeId n : ids) v.row(i++) = p.row(n);
        return geometry::Polygon{v};
    };
    rep.shapes[0] = square({0, 1, 2, 3});
    rep.shapes[1] = geometry::Polyline{(Matrix(2, 2) << -1, 0.5, 2, 0.5).finished()};
    rep.shapes[2] = square({6, 7, 8, 9});
    const auto adj = pairs_of(cc, spatial_neighborhoods(cc, rep, NeighborhoodKind::spatial_adj));
    EXPECT_TRUE(adj.count({0, 1}) && adj.count({1, 0}));
    EXPECT_FALSE(adj.count({0, 2}));
    EXPECT_FALSE(adj.count({1, 2}));

    // Dense sampling of the segment against an even-odd ray test.
    const Matrix& sq = std::get<geometry::Polygon>(*rep.shapes[0]).vertices;
    auto inside_square = [&](double x, double y) {
        bool in = false;
        for (Eigen::Index i = 0, j = sq.rows() - 1; i < sq.rows(); j = i++)
            if ((sq(i, 1) > y) != (sq(j, 1) > y) &&
                x < (sq(j, 0) - sq(i, 0)) * (y - sq(i, 1)) / (sq(j, 1) - sq(i, 1)) + sq(i, 0))
                in = !in;
        return in;
    };
    bool sampled_hit = false;
    for (int s = 0; s <= 1000; ++s) sampled_hit = sampled_hit || inside_square(-1 + 3.0 * s / 1000, 0.5);
    EXPECT_TRUE(sampled_hit);
}

TEST(Neighborhoods, SpatialPointOnVertexIsIncident) {
    Matrix p(4, 2);
    p << 0, 0, 1, 0, 1, 1, 2, 2;
    const auto cc = build_complex(4, 2, p, {{{0, 1}, 1}});
    SpatialRepresentation rep;
    rep.shapes.resize(cc.num_cells());
    rep.shapes[0] = geometry::Polygon{(Matrix(4, 2) << 0, 0, 1, 0, 1, 1, 0, 1).finished()};
    const auto up = pairs_of(cc, spatial_neighborhoods(cc, rep, NeighborhoodKind::spatial_inc_up));
    EXPECT_TRUE(up.count({cc.node_cell(2), 0}));
    EXPECT_FALSE(up.count({cc.node_cell(3), 0}));
    const auto down = pairs_of(cc, spatial_neighborhoods(cc, rep, NeighborhoodKind::spatial_inc_down));
    EXPECT_TRUE(down.count({0, cc.node_cell(2)}));
}

TEST(Neighborhoods, SpatialErrors) {
    const auto cc3 = build_complex(3, 3, Matrix::Zero(3, 3), {{{0, 1}, 1}});
    SpatialRepresentation rep;
    rep.shapes.resize(cc3.num_cells());
    rep.shapes[0] = geometry::Polygon{(Matrix(3, 3) << 0, 0, 0, 1, 0, 0, 0, 1, 0).finished()};
    try {
        spatial_neighborhoods(cc3, rep, NeighborhoodKind::spatial_inc_down);
        ADD_FAILURE();
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::unsupported_geometry);
    }
    const auto cc2 = build_complex(3, 2, Matrix::Zero(3, 2), {{{0, 1}, 1}});
    rep.shapes.assign(cc2.num_cells(), std::nullopt);
    rep.shapes[0] = geometry::Polygon{Matrix(0, 2)};
    try {
        spatial_neighborhoods(cc2, rep, NeighborhoodKind::spatial_inc_down);
        ADD_FAILURE();
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::degenerate_footprint);
    }
}

TEST(Neighborhoods, AssembleKeepsListOrderAndDuplicates) {
    const auto cc = add_virtual_cell(open_complex(), 3);
    const auto coll = assemble(cc, parse_neighborhood_list("adj_up,inc_up,adj_max"));
    std::vector<std::string> labels;
    for (const auto& e : coll.entries)
        if (labels.empty() || labels.back() != e.label) labels.push_back(e.label);
    EXPECT_EQ(labels, (std::vector<std::string>{"adj_up", "inc_up", "adj_max"}));
    bool shared = false;
    for (const auto& a : coll.entries)
        for (const auto& b : coll.entries)
            if (a.label == "adj_up" && b.label == "adj_max")
                for (const auto& p : a.pairs)
                    shared = shared || std::find(b.pairs.begin(), b.pairs.end(), p) != b.pairs.end();
    EXPECT_TRUE(shared);
    EXPECT_THROW(assemble(cc, {}), error);
}

TEST(Neighborhoods, RankFilter) {
    const auto cc = abc();
    const auto coll = assemble(cc, {parse_neighborhood("adj_up@rank=0")});
    ASSERT_FALSE(coll.entries.empty());
    for (const auto& e : coll.entries) EXPECT_EQ(e.receiver_rank, 0);
}

TEST(Neighborhoods, TextGrammar) {
    const auto s = parse_neighborhood("inc_up:2@rank=0");
    EXPECT_EQ(s.kind, NeighborhoodKind::inc_up);
    EXPECT_EQ(s.hop, 2);
    EXPECT_EQ(s.rank, 0);
    EXPECT_EQ(s.to_string(), "inc_up:2@rank=0");
    EXPECT_EQ(s.label(), "inc_up:2");
    EXPECT_FALSE(parse_neighborhood("adj_max@rank=all").rank);
    EXPECT_EQ(parse_neighborhood(" spatial_inc_down ").kind, NeighborhoodKind::spatial_inc_down);
    for (const char* bad : {"adjacent", "inc_up:0", "inc_up:x", "adj_up@rank=-1", "adj_up@ranks=1"})
        EXPECT_THROW(parse_neighborhood(bad), error) << bad;
    EXPECT_EQ(parse_neighborhood_list("adj_up, inc_down:2").size(), 2u);
}

TEST(NeighborhoodProperty, OracleOnRandomComplexes) {
    std::mt19937_64 rng(21);
    for (int t = 0; t < 60; ++t) {
        const auto cc = oracle::random_oracle_complex(rng, 50);
        for (auto kind : kCombinatorial)
            for (int hop : {1, 2, 3}) {
                if (hop > 1 && kind != NeighborhoodKind::inc_up && kind != NeighborhoodKind::inc_down) continue;
                bool ok = false;
                const auto got = oracle::entry_pairs(cc, materialize(cc, {kind, hop, std::nullopt}), &ok);
                EXPECT_TRUE(ok);
                EXPECT_EQ(got, oracle::oracle_pairs(cc, kind, hop)) << to_string(kind) << " hop " << hop;
            }
        for (auto kind : {NeighborhoodKind::spatial_adj, NeighborhoodKind::spatial_inc_up,
                          NeighborhoodKind::spatial_inc_down})
            EXPECT_EQ(oracle::entry_pairs(cc, materialize(cc, {kind, 1, std::nullopt})),
                      oracle::oracle_pairs(cc, kind));
    }
}

TEST(NeighborhoodProperty, DualityAndSymmetry) {
    std::mt19937_64 rng(22);
    for (int t = 0; t < 40; ++t) {
        const auto cc = oracle::random_oracle_complex(rng, 40);
        for (int hop : {1, 2}) {
            const auto up = pairs_of(cc, incidence(cc, true, hop));
            PairSet flipped;
            for (const auto& [x, y] : pairs_of(cc, incidence(cc, false, hop))) flipped.insert({y, x});
            EXPECT_EQ(up, flipped);
        }
        for (const auto& entries : {adjacency(cc, true), adjacency(cc, false), max_adjacency(cc)}) {
            const auto s = pairs_of(cc, entries);
            for (const auto& [x, y] : s) EXPECT_TRUE(s.count({y, x}));
        }
    }
}
