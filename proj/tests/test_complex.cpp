#include "etnn/complex.hpp"
#include "etnn/error.hpp"
#include "etnn/io.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace etnn;

namespace {

Matrix triangle_positions() {
    Matrix p(3, 2);
    p << 0, 0, 1, 0, 0, 1;
    return p;
}

CombinatorialComplex six_cell() {
    return build_complex(3, 2, triangle_positions(), {{{0, 1}, 1}, {{1, 2}, 1}, {{0, 1, 2}, 2}});
}

template <class F>
errc code_of(F f) {
    try {
        f();
    } catch (const error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an etnn::error";
    return errc::invalid_argument;
}

}  // namespace

TEST(Complex, BuildInsertsMissingSingletons) {
    const auto cc = six_cell();
    EXPECT_EQ(cc.num_cells(), 6u);
    for (NodeId n = 0; n < 3; ++n) {
        const auto& c = cc.cell(cc.node_cell(n));
        EXPECT_EQ(c.rank, 0);
        EXPECT_EQ(c.nodes, std::vector<NodeId>{n});
        EXPECT_TRUE(c.has_tag("node"));
        EXPECT_TRUE(c.features.empty());
    }
    EXPECT_EQ(*cc.find(std::vector<NodeId>{2, 1, 0}), 2u);
}

TEST(Complex, SingleNode) {
    const auto cc = build_complex(1, 3, Matrix::Zero(1, 3), {});
    EXPECT_EQ(cc.num_cells(), 1u);
    EXPECT_EQ(cc.cell(0).rank, 0);
    EXPECT_EQ(dimension(cc), 0);
}

TEST(Complex, BuildErrors) {
    const Matrix p = triangle_positions();
    EXPECT_EQ(code_of([&] { build_complex(3, 2, p, {{{0, 1}, 2}, {{0, 1, 2}, 1}}); }), errc::rank_violation);
    EXPECT_EQ(code_of([&] { build_complex(3, 2, p, {{{0, 1}, 1}, {{1, 0}, 1}}); }), errc::duplicate_cell);
    EXPECT_EQ(code_of([&] { build_complex(3, 3, p, {}); }), errc::dimension_mismatch);
    EXPECT_EQ(code_of([&] { build_complex(3, 2, p, {{{0, 3}, 1}}); }), errc::out_of_range_node);
    EXPECT_EQ(code_of([&] { build_complex(3, 2, p, {{{0, 1}, 0}}); }), errc::rank_violation);
    EXPECT_EQ(code_of([&] { build_complex(3, 2, p, {{{}, 1}}); }), errc::empty_cell);
    EXPECT_EQ(code_of([&] { build_complex(3, 2, p, {}, Matrix::Zero(2, 2)); }), errc::dimension_mismatch);
}

TEST(Complex, RankValidationCanBeSkipped) {
    const auto cc =
        build_complex(3, 2, triangle_positions(), {{{0, 1}, 2}, {{0, 1, 2}, 1}}, std::nullopt, BuildOptions{false});
    EXPECT_EQ(cc.num_cells(), 5u);
}

TEST(Complex, RelabelIdentity) {
    const auto cc = six_cell();
    const std::vector<NodeId> id{0, 1, 2};
    const auto r = relabel(cc, id);
    ASSERT_EQ(r.num_cells(), cc.num_cells());
    for (CellId i = 0; i < cc.num_cells(); ++i) {
        EXPECT_EQ(r.cell(i).nodes, cc.cell(i).nodes);
        EXPECT_EQ(r.cell(i).rank, cc.cell(i).rank);
    }
    EXPECT_EQ(r.positions(), cc.positions());
}

TEST(Complex, RelabelSwap) {
    Matrix p = triangle_positions();
    const auto cc = build_complex(3, 2, p, {{{0, 2}, 1, {7.0}, {"edge"}}});
    const std::vector<NodeId> swap{1, 0, 2};
    const auto r = relabel(cc, swap);
    const auto id = r.find(std::vector<NodeId>{1, 2});
    ASSERT_TRUE(id);
    EXPECT_EQ(r.cell(*id).rank, 1);
    EXPECT_EQ(r.cell(*id).features, std::vector<double>{7.0});
    EXPECT_TRUE(r.cell(*id).has_tag("edge"));
    EXPECT_EQ(r.positions().row(1), p.row(0));
    EXPECT_EQ(r.positions().row(0), p.row(1));
}

TEST(Complex, RelabelRejectsNonBijection) {
    const auto cc = six_cell();
    const std::vector<NodeId> repeated{0, 0, 2}, short_perm{0, 1}, out_of_range{0, 1, 3};
    EXPECT_EQ(code_of([&] { relabel(cc, repeated); }), errc::invalid_permutation);
    EXPECT_EQ(code_of([&] { relabel(cc, short_perm); }), errc::invalid_permutation);
    EXPECT_EQ(code_of([&] { relabel(cc, out_of_range); }), errc::invalid_permutation);
}

TEST(Complex, CellsOfRank) {
    const auto cc = six_cell();
    EXPECT_EQ(cells_of_rank(cc, 1), (std::vector<CellId>{0, 1}));
    EXPECT_TRUE(cells_of_rank(cc, 5).empty());
    EXPECT_EQ(cells_of_rank(cc, 0).size(), cc.num_nodes());
    EXPECT_EQ(rank_counts(cc), (std::vector<std::size_t>{3, 2, 1}));
}

TEST(Complex, Dimension) {
    EXPECT_EQ(dimension(six_cell()), 2);
    const auto virt = build_complex(3, 2, triangle_positions(), {{{0, 1}, 1}, {{0, 1, 2}, 3, {}, {"virtual"}}});
    EXPECT_EQ(dimension(virt), 3);
}

TEST(Complex, WithGeometry) {
    const auto cc = six_cell();
    const auto moved = cc.with_geometry(Matrix::Ones(3, 2));
    EXPECT_EQ(moved.positions(), Matrix::Ones(3, 2));
    EXPECT_EQ(moved.num_cells(), cc.num_cells());
    EXPECT_THROW(cc.with_geometry(Matrix::Ones(2, 2)), error);
}

TEST(ComplexProperty, RelabelCommutesWithBuild) {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 50; ++t) {
        const auto cc = oracle::random_oracle_complex(rng, 30);
        std::vector<NodeId> perm(cc.num_nodes());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);

        // Build from permuted inputs directly.
        auto specs = cell_specs(cc);
        for (auto& s : specs)
            for (auto& v : s.nodes) v = perm[v];
        Matrix pos(cc.positions().rows(), cc.positions().cols());
        for (std::size_t i = 0; i < perm.size(); ++i) pos.row(perm[i]) = cc.positions().row(i);
        const auto direct = build_complex(cc.num_nodes(), cc.spatial_dim(), pos, specs);
        const auto relabelled = relabel(cc, perm);

        ASSERT_EQ(direct.num_cells(), relabelled.num_cells());
        EXPECT_EQ(direct.positions(), relabelled.positions());
        for (CellId i = 0; i < direct.num_cells(); ++i) {
            EXPECT_EQ(direct.cell(i).nodes, relabelled.cell(i).nodes);
            EXPECT_EQ(direct.cell(i).rank, relabelled.cell(i).rank);
        }
    }
}

TEST(ComplexProperty, RankMonotoneOnAllContainments) {
    std::mt19937_64 rng(12);
    for (int t = 0; t < 40; ++t) {
        const auto cc = oracle::random_oracle_complex(rng, 200);
        for (const auto& x : cc.cells())
            for (const auto& y : cc.cells())
                if (oracle::subset_of(x.nodes, y.nodes)) EXPECT_LE(x.rank, y.rank);
    }
}

TEST(ComplexProperty, JsonRoundTripIsIdentity) {
    std::mt19937_64 rng(13);
    for (int t = 0; t < 30; ++t) {
        auto base = oracle::random_oracle_complex(rng, 25, 3);
        auto specs = cell_specs(base);
        std::uniform_real_distribution<double> u(-1, 1);
        for (auto& s : specs) {
            s.features = {u(rng), u(rng)};
            s.tags = {"t" + std::to_string(s.rank)};
        }
        const Matrix vel = oracle::random_points(rng, static_cast<Eigen::Index>(base.num_nodes()), 3);
        const auto cc = build_complex(base.num_nodes(), 3, oracle::random_points(rng, vel.rows(), 3), specs, vel);
        const Target target{TargetLevel::node, std::vector<double>(cc.num_nodes(), 0.5)};
        const auto text = to_json(cc, target).dump();
        const auto doc = parse_complex(text);
        ASSERT_EQ(doc.complex.num_cells(), cc.num_cells());
        EXPECT_EQ(doc.complex.positions(), cc.positions());
        EXPECT_EQ(*doc.complex.velocities(), *cc.velocities());
        for (CellId i = 0; i < cc.num_cells(); ++i) {
            EXPECT_EQ(doc.complex.cell(i).nodes, cc.cell(i).nodes);
            EXPECT_EQ(doc.complex.cell(i).rank, cc.cell(i).rank);
            EXPECT_EQ(doc.complex.cell(i).features, cc.cell(i).features);
            EXPECT_EQ(doc.complex.cell(i).tags, cc.cell(i).tags);
        }
        ASSERT_TRUE(doc.target);
        EXPECT_EQ(doc.target->values, target.values);
        EXPECT_EQ(to_json(doc.complex, doc.target).dump(), text);
    }
}
