#include "etnn/bench.hpp"
#include "etnn/error.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace etnn;
using namespace etnn::bench;

TEST(Bench, RandomComplexIsValid) {
    std::mt19937_64 rng(80);
    RandomComplexOptions o;
    o.velocities = true;
    for (int t = 0; t < 30; ++t) {
        const auto cc = random_complex(rng, o);
        EXPECT_GE(cc.num_nodes(), o.min_nodes);
        EXPECT_LE(cc.num_nodes(), o.max_nodes);
        EXPECT_LE(cc.num_cells(), o.max_cells);
        EXPECT_LE(dimension(cc), o.max_rank);
        EXPECT_TRUE(cc.velocities());
        for (const auto& c : cc.cells()) EXPECT_EQ(c.features.size(), 2u);
        for (const auto& x : cc.cells())
            for (const auto& y : cc.cells())
                if (oracle::subset_of(x.nodes, y.nodes)) EXPECT_LE(x.rank, y.rank);
    }
}

TEST(Bench, RandomOrthogonal) {
    std::mt19937_64 rng(81);
    for (int sign : {1, -1}) {
        const Matrix q = random_orthogonal(rng, 3, sign);
        EXPECT_TRUE((q * q.transpose()).isIdentity(1e-12));
        EXPECT_NEAR(q.determinant(), sign, 1e-12);
    }
}

TEST(Bench, RelativeError) {
    const Matrix b = (Matrix(1, 2) << 3, 4).finished();
    EXPECT_NEAR(relative_error(b * 1.1, b), 0.1, 1e-15);
    EXPECT_EQ(relative_error(b, b), 0.0);
}

TEST(Bench, LogLogSlope) {
    EXPECT_NEAR(loglog_slope({1, 2, 4, 8}, {3, 12, 48, 192}), 2.0, 1e-12);
    EXPECT_NEAR(loglog_slope({10, 100}, {5, 50}), 1.0, 1e-12);
    ScalingReport single{"sparse", {ScalingRow{100, 10, 0.1, 0.1, 3}}};
    EXPECT_TRUE(std::isnan(single.slope()));
}

TEST(Bench, SmallEquivarianceRun) {
    EquivarianceOptions o;
    o.trials = 6;
    o.hidden = 8;
    const auto r = equivariance_suite(o);
    EXPECT_EQ(r.trials, 6);
    EXPECT_TRUE(r.ok()) << (r.failures.empty() ? "" : r.failures[0]);
    o.negative_control = true;
    EXPECT_FALSE(equivariance_suite(o).ok());
}

TEST(Bench, SmallHasseRun) {
    HasseOptions o;
    o.trials = 5;
    EXPECT_TRUE(hasse_equivalence(o).ok(1e-9));
    o.negative_control = true;
    EXPECT_FALSE(hasse_equivalence(o).ok(1e-9));
}

TEST(Bench, SmallGradientRun) {
    GradientOptions o;
    o.trials = 2;
    const auto r = gradient_suite(o);
    EXPECT_EQ(r.trials, 2);
    EXPECT_GT(r.coordinates, 0u);
    EXPECT_LE(r.max_rel_error, 1e-4);
}

TEST(Bench, KchainTaskShapes) {
    const auto t = kchain_task(4, "1a", 1, 8, 0);
    EXPECT_EQ(t.a.num_nodes(), t.b.num_nodes());
    EXPECT_EQ(t.config.num_layers, 1);
    EXPECT_EQ(t.config.hidden, 8);
    const double acc = kchain_accuracy(t, 2, 1e-3, 0);
    EXPECT_TRUE(acc == 0.0 || acc == 0.5 || acc == 1.0);
}

TEST(Bench, ExpressivityReportAggregates) {
    ExpressivityReport r;
    r.cells.push_back({"1a", 1, 32, {1.0, 0.5}});
    r.cells.push_back({"1a", 1, 64, {1.0, 1.0}});
    EXPECT_DOUBLE_EQ(r.find("1a", 1, 32)->mean(), 0.75);
    // Sample standard deviation (n - 1 denominator).
    EXPECT_DOUBLE_EQ(r.find("1a", 1, 32)->stddev(), std::sqrt(0.125));
    EXPECT_DOUBLE_EQ(r.mean_accuracy("1a", 1), 0.875);
    EXPECT_EQ(r.find("graph", 1, 32), nullptr);
    EXPECT_NE(r.to_csv().find("1a"), std::string::npos);
}

TEST(Bench, ScalingFamilies) {
    const auto ring = ring_lattice(300, 2, 0);
    EXPECT_NEAR(static_cast<double>(ring.num_cells()), 300.0, 10.0);
    const auto dense = dense_virtual(20, 0);
    EXPECT_EQ(dense.num_cells(), 21u);
    const auto r = runtime_scaling("sparse", {100, 200}, 1, 0.0);
    ASSERT_EQ(r.rows.size(), 2u);
    EXPECT_GT(r.rows[1].pairs, r.rows[0].pairs);
    EXPECT_TRUE(std::isfinite(r.slope()));
    EXPECT_THROW(runtime_scaling("medium", {100}, 1, 0.0), error);
}

TEST(Bench, SyntheticMolecules) {
    const auto a = synthetic_molecules(10, 4), b = synthetic_molecules(10, 4);
    ASSERT_EQ(a.size(), 10u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].target, b[i].target);
        EXPECT_EQ(a[i].complex.positions(), b[i].complex.positions());
        EXPECT_TRUE(std::isfinite(a[i].target));
        EXPECT_EQ(dimension(a[i].complex), 2);
    }
}
