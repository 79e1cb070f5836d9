#include "etnn/error.hpp"
#include "etnn/io.hpp"
#include "etnn/lifts.hpp"
#include "etnn/model.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace etnn;

namespace {

struct Built {
    CombinatorialComplex cc;
    NeighborhoodCollection nc;
    EtnnModel model;
};

Built build(CombinatorialComplex cc, EtnnConfig config) {
    auto nc = assemble(cc, config.neighborhoods);
    const auto schema = infer_schema(config, {Sample{&cc, &nc}});
    auto model = init_model(config, schema);
    return {std::move(cc), std::move(nc), std::move(model)};
}

EtnnConfig base_config(const std::string& nbhd, Mode mode = Mode::invariant) {
    EtnnConfig c;
    c.hidden = 8;
    c.num_layers = 2;
    c.neighborhoods = parse_neighborhood_list(nbhd);
    c.invariants = parse_invariants("centroid:mean,hausdorff");
    c.mode = mode;
    c.seed = 3;
    return c;
}

/// Complex with one feature on every cell.
CombinatorialComplex featured(CombinatorialComplex base, std::mt19937_64& rng, bool velocities = false) {
    auto specs = cell_specs(base);
    std::uniform_real_distribution<double> u(-1, 1);
    for (auto& s : specs) s.features = {u(rng)};
    const auto n = static_cast<Eigen::Index>(base.num_nodes());
    const Matrix pos = oracle::random_points(rng, n, base.spatial_dim());
    if (!velocities) return build_complex(base.num_nodes(), base.spatial_dim(), pos, specs);
    return build_complex(base.num_nodes(), base.spatial_dim(), pos, specs,
                         oracle::random_points(rng, n, base.spatial_dim()));
}

void set_constant_output(EtnnModel& m, const std::string& prefix, double value) {
    auto& w = m.store[m.store.index(prefix + ".w1")].value;
    auto& b = m.store[m.store.index(prefix + ".b1")].value;
    w.setZero();
    b.setConstant(value);
}

/// Triangle with edges {0,1}, {1,2} and the 2-cell; node features only.
CombinatorialComplex two_edges() {
    Matrix p(3, 2);
    p << 0, 0, 1, 0, 0, 1;
    return build_complex(3, 2, p, {{{0}, 0, {1.0}}, {{1}, 0, {0.5}}, {{2}, 0, {-1.0}}, {{0, 1}, 1, {1.0}},
                                   {{1, 2}, 1, {2.0}}, {{0, 1, 2}, 2, {0.5}}});
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

TEST(Model, GraphOnlyHasOneKey) {
    GeometricGraph g;
    g.num_nodes = 4;
    g.spatial_dim = 2;
    g.positions = Matrix::Random(4, 2);
    g.node_features = Matrix::Ones(4, 1);
    g.edges = {{0, 1}, {1, 2}, {2, 3}};
    auto cc = graph_lift(g, true);
    auto b = build(std::move(cc), base_config("adj_up@rank=0"));
    ASSERT_EQ(b.model.schema.keys.size(), 1u);
    EXPECT_EQ(b.model.schema.keys[0].name(), "adj_up.0.0");
    EXPECT_TRUE(b.model.store.contains("l0.message.adj_up.0.0.w0"));
    EXPECT_TRUE(b.model.store.contains("l1.gate.adj_up.0.0.w0"));
    EXPECT_FALSE(b.model.store.contains("l0.position.w0"));
}

TEST(Model, SeedDeterminesParameters) {
    auto a = build(two_edges(), base_config("inc_down,inc_up"));
    auto b = build(two_edges(), base_config("inc_down,inc_up"));
    auto config = base_config("inc_down,inc_up");
    config.seed = 4;
    auto c = build(two_edges(), config);
    ASSERT_EQ(a.model.store.size(), b.model.store.size());
    bool any_diff = false;
    for (std::size_t i = 0; i < a.model.store.size(); ++i) {
        EXPECT_EQ(a.model.store[i].value, b.model.store[i].value);
        any_diff |= a.model.store[i].value != c.model.store[i].value;
    }
    EXPECT_TRUE(any_diff);
    EXPECT_EQ(evaluate_model(a.model, a.cc, a.nc).prediction, evaluate_model(b.model, b.cc, b.nc).prediction);
}

TEST(Model, ZeroUpdateIsPureResidual) {
    auto b = build(two_edges(), base_config("inc_down,inc_up,adj_up@rank=0"));
    for (int l = 0; l < 2; ++l)
        for (Rank r : b.model.schema.ranks)
            set_constant_output(b.model, "l" + std::to_string(l) + ".update.r" + std::to_string(r), 0.0);
    const auto e = evaluate_model(b.model, b.cc, b.nc);
    const Prepared p = prepare(b.model, b.cc, b.nc);
    for (Rank r : b.model.schema.ranks) {
        const auto& s = b.model.store;
        const std::string prefix = "embed.r" + std::to_string(r);
        const Matrix expected =
            (p.inputs.at(r) * s[s.index(prefix + ".w0")].value).rowwise() + RowVector(s[s.index(prefix + ".b0")].value);
        EXPECT_TRUE(e.hidden.at(r).isApprox(expected, 1e-14)) << r;
    }
}

TEST(Model, PositionWeightZeroKeepsPositions) {
    auto b = build(two_edges(), base_config("adj_up@rank=0,inc_up", Mode::equivariant));
    for (int l = 0; l < 2; ++l) set_constant_output(b.model, "l" + std::to_string(l) + ".position", 0.0);
    EXPECT_EQ(evaluate_model(b.model, b.cc, b.nc).positions, b.cc.positions());
}

TEST(Model, UnitPositionWeightOnTwoNodes) {
    Matrix p(2, 3);
    p << 0.5, -1, 2, 1.5, 0, -1;
    auto cc = build_complex(2, 3, p, {{{0}, 0, {1.0}}, {{1}, 0, {2.0}}, {{0, 1}, 1, {0.0}}});
    auto config = base_config("adj_up@rank=0", Mode::equivariant);
    config.num_layers = 1;
    auto b = build(std::move(cc), config);
    set_constant_output(b.model, "l0.position", 1.0);
    const Matrix out = evaluate_model(b.model, b.cc, b.nc).positions;
    const RowVector d0 = out.row(0) - p.row(0), d1 = out.row(1) - p.row(1);
    EXPECT_TRUE(d0.isApprox(p.row(0) - p.row(1), 1e-15));
    EXPECT_TRUE(d1.isApprox(-d0, 1e-15));
}

TEST(Model, NodeWithoutSingletonNeighborsStaysFixed) {
    Matrix p(3, 2);
    p << 0, 0, 1, 0, 3, 2;
    auto cc = build_complex(3, 2, p, {{{0}, 0, {1.0}}, {{1}, 0, {0.5}}, {{2}, 0, {-1.0}}, {{0, 1}, 1, {1.0}},
                                      {{0, 1, 2}, 2, {0.5}}});
    auto config = base_config("adj_up@rank=0,inc_up@rank=0", Mode::equivariant);
    config.num_layers = 1;
    auto b = build(std::move(cc), config);
    set_constant_output(b.model, "l0.position", 1.0);
    const Matrix out = evaluate_model(b.model, b.cc, b.nc).positions;
    EXPECT_EQ(out.row(2), p.row(2));
    EXPECT_NE(out.row(0), p.row(0));
    EXPECT_TRUE((out.row(0) - p.row(0)).isApprox(p.row(0) - p.row(1), 1e-15));
}

TEST(Model, ConstantCPolicyScalesDisplacement) {
    GeometricGraph g;
    g.num_nodes = 3;
    g.spatial_dim = 2;
    g.positions = (Matrix(3, 2) << 0, 0, 1, 0, 0, 2).finished();
    g.node_features = Matrix::Ones(3, 1);
    g.edges = {{0, 1}, {0, 2}};
    auto config = base_config("adj_up@rank=0", Mode::equivariant);
    config.num_layers = 1;
    config.c_policy = CPolicy::constant;
    config.c_constant = 0.25;
    auto b = build(graph_lift(g, true), config);
    set_constant_output(b.model, "l0.position", 1.0);
    const Matrix out = evaluate_model(b.model, b.cc, b.nc).positions;
    const RowVector expected = g.positions.row(0) + 0.25 * (2 * g.positions.row(0) - g.positions.row(1) - g.positions.row(2));
    EXPECT_TRUE(out.row(0).isApprox(expected, 1e-15));

    config.c_policy = CPolicy::reciprocal_count;
    auto r = build(graph_lift(g, true), config);
    set_constant_output(r.model, "l0.position", 1.0);
    const Matrix out_r = evaluate_model(r.model, r.cc, r.nc).positions;
    const RowVector expected_r = g.positions.row(0) + 0.5 * (2 * g.positions.row(0) - g.positions.row(1) - g.positions.row(2));
    EXPECT_TRUE(out_r.row(0).isApprox(expected_r, 1e-15));
}

TEST(Model, VelocityGate) {
    std::mt19937_64 rng(70);
    auto cc = featured(two_edges(), rng, true);
    auto config = base_config("adj_up@rank=0,inc_up", Mode::equivariant_velocity);
    config.num_layers = 1;
    auto b = build(std::move(cc), config);
    set_constant_output(b.model, "l0.position", 0.0);
    set_constant_output(b.model, "l0.velocity", 1.0);
    auto e = evaluate_model(b.model, b.cc, b.nc);
    ASSERT_TRUE(e.velocities);
    EXPECT_EQ(*e.velocities, *b.cc.velocities());
    EXPECT_EQ(e.positions, Matrix(b.cc.positions() + *b.cc.velocities()));

    set_constant_output(b.model, "l0.velocity", 0.0);
    e = evaluate_model(b.model, b.cc, b.nc);
    EXPECT_TRUE(e.velocities->isZero(0.0));
    EXPECT_EQ(e.positions, b.cc.positions());
}

TEST(Model, VelocityModeNeedsVelocities) {
    std::mt19937_64 rng(71);
    auto config = base_config("adj_up@rank=0", Mode::equivariant_velocity);
    auto with = featured(two_edges(), rng, true);
    auto b = build(std::move(with), config);
    const auto without = featured(two_edges(), rng, false);
    const auto nc = assemble(without, config.neighborhoods);
    EXPECT_EQ(code_of([&] { prepare(b.model, without, nc); }), errc::config_mismatch);
}

TEST(Model, ModeAndLevelMismatch) {
    auto inv = build(two_edges(), base_config("adj_up@rank=0,inc_up"));
    const Prepared p = prepare(inv.model, inv.cc, inv.nc);
    ad::Tape t;
    const auto out = forward(t, inv.model, p);
    std::vector<std::optional<ad::Var>> none(inv.model.schema.keys.size());
    EXPECT_EQ(code_of([&] { position_delta(t, inv.model, p, 0, out.positions, none); }), errc::mode_mismatch);
    LayerState state{out.hidden, out.positions, std::nullopt};
    EXPECT_EQ(code_of([&] { velocity_update(t, inv.model, p, 0, state, none); }), errc::mode_mismatch);
    EXPECT_EQ(code_of([&] { readout(t, inv.model, p, out.hidden, ReadoutLevel::node); }), errc::level_mismatch);
}

TEST(Model, ConfigErrors) {
    const auto cc = two_edges();
    auto config = base_config("adj_up@rank=0");
    const auto nc = assemble(cc, config.neighborhoods);
    const auto schema = infer_schema(config, {Sample{&cc, &nc}});
    auto bad = config;
    bad.hidden = 0;
    EXPECT_EQ(code_of([&] { init_model(bad, schema); }), errc::config_mismatch);
    bad = config;
    bad.num_layers = 0;
    EXPECT_EQ(code_of([&] { init_model(bad, schema); }), errc::config_mismatch);
    bad = config;
    bad.invariants = parse_invariants("dist:sum");
    EXPECT_EQ(code_of([&] { init_model(bad, schema); }), errc::config_mismatch);
    EXPECT_EQ(code_of([&] { infer_schema(config, {}); }), errc::empty_dataset);
}

TEST(Model, UnknownKeyIsRejected) {
    auto b = build(two_edges(), base_config("adj_up@rank=0"));
    const auto other = assemble(b.cc, parse_neighborhood_list("inc_up"));
    EXPECT_EQ(code_of([&] { prepare(b.model, b.cc, other); }), errc::config_mismatch);
}

TEST(Model, NeighborhoodsHaveSeparateWeights) {
    auto b = build(two_edges(), base_config("inc_up@rank=0,adj_up@rank=0"));
    const auto& keys = b.model.schema.keys;
    ASSERT_EQ(keys.size(), 2u);
    const auto& s = b.model.store;
    EXPECT_NE(s[s.index("l0.message." + keys[0].name() + ".w0")].value,
              s[s.index("l0.message." + keys[1].name() + ".w0")].value);

    const Prepared p = prepare(b.model, b.cc, b.nc);
    ad::Tape t;
    LayerState state;
    for (Rank r : b.model.schema.ranks)
        state.hidden[r] = t.constant(Matrix::Ones(static_cast<Eigen::Index>(p.cells.at(r).size()), 8));
    state.positions = t.constant(b.cc.positions());
    const auto inv = layer_invariants(t, b.model, p, 0, state.positions, false);
    // Identical inputs through both keys.
    const Matrix row = (Matrix(1, 18) << Matrix::Ones(1, 16), Matrix::Zero(1, 2)).finished();
    const Matrix m0 = b.model.layers[0].message.at(keys[0]).forward(t, b.model.store, t.constant(row)).value();
    const Matrix m1 = b.model.layers[0].message.at(keys[1]).forward(t, b.model.store, t.constant(row)).value();
    EXPECT_NE(m0, m1);
    EXPECT_EQ(inv.size(), 2u);

    auto shared = base_config("inc_up@rank=0,adj_up@rank=0");
    shared.share_message = true;
    auto sb = build(two_edges(), shared);
    EXPECT_TRUE(sb.model.store.contains("l0.message.w0"));
    EXPECT_FALSE(sb.model.store.contains("l0.message." + keys[0].name() + ".w0"));
}

TEST(Model, SixCellForwardIsFinite) {
    const auto doc = parse_complex(read_text_file(std::string(ETNN_TEST_DATA) + "/six_cell.json"));
    auto config = base_config("inc_down,inc_up,adj_up,adj_down");
    config.num_layers = 1;
    auto b = build(doc.complex, config);
    const auto e = evaluate_model(b.model, b.cc, b.nc);
    EXPECT_EQ(e.prediction.rows(), 1);
    EXPECT_EQ(e.prediction.cols(), 1);
    EXPECT_TRUE(e.prediction.allFinite());
    for (const auto& [r, h] : e.hidden) EXPECT_TRUE(h.allFinite());
}

TEST(ModelProperty, NodePermutationEquivariance) {
    std::mt19937_64 rng(72);
    for (int t = 0; t < 20; ++t) {
        const auto cc = featured(oracle::random_oracle_complex(rng, 30), rng);
        for (ReadoutLevel level : {ReadoutLevel::complex, ReadoutLevel::node}) {
            auto config = base_config("inc_down,inc_up,adj_up,adj_max", Mode::equivariant);
            config.readout = level;
            config.invariants = parse_invariants("dist:sum,centroid:mean,hausdorff,hull:diff");
            std::vector<NodeId> perm(cc.num_nodes());
            std::iota(perm.begin(), perm.end(), 0);
            std::shuffle(perm.begin(), perm.end(), rng);
            const auto moved = relabel(cc, perm);
            const auto nc = assemble(cc, config.neighborhoods);
            const auto nc2 = assemble(moved, config.neighborhoods);
            const auto schema = infer_schema(config, {Sample{&cc, &nc}, Sample{&moved, &nc2}});
            auto model = init_model(config, schema);
            const auto a = evaluate_model(model, cc, nc);
            const auto b = evaluate_model(model, moved, nc2);
            for (std::size_t i = 0; i < perm.size(); ++i) {
                const auto j = static_cast<Eigen::Index>(perm[i]);
                const auto ii = static_cast<Eigen::Index>(i);
                EXPECT_LT((b.positions.row(j) - a.positions.row(ii)).cwiseAbs().maxCoeff(), 1e-9);
                if (level == ReadoutLevel::node)
                    EXPECT_LT((b.prediction.row(j) - a.prediction.row(ii)).cwiseAbs().maxCoeff(), 1e-9);
            }
            if (level == ReadoutLevel::complex) EXPECT_LT((b.prediction - a.prediction).cwiseAbs().maxCoeff(), 1e-9);
        }
    }
}

TEST(ModelProperty, EuclideanEquivariance) {
    std::mt19937_64 rng(73);
    for (int t = 0; t < 20; ++t) {
        const auto cc = featured(oracle::random_oracle_complex(rng, 30, 3), rng);
        auto config = base_config("inc_down,inc_up,adj_up,adj_down", Mode::equivariant);
        config.invariants = parse_invariants("dist:mean,centroid:mean,hausdorff,hull:x");
        auto b = build(cc, config);
        const Matrix q = oracle::orthogonal_oracle(rng, 3, t % 2 ? 1 : -1);
        const RowVector shift = oracle::random_points(rng, 1, 3, 5.0);
        const Matrix moved_pos = (cc.positions() * q.transpose()).rowwise() + shift;
        const auto moved = cc.with_geometry(moved_pos);
        const auto x = evaluate_model(b.model, b.cc, b.nc);
        const auto y = evaluate_model(b.model, moved, b.nc);
        EXPECT_NEAR((y.prediction - x.prediction).cwiseAbs().maxCoeff(), 0.0, 1e-9);
        const Matrix expected = (x.positions * q.transpose()).rowwise() + shift;
        EXPECT_NEAR((y.positions - expected).cwiseAbs().maxCoeff(), 0.0, 1e-9);
    }
}
