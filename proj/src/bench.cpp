#include "etnn/bench.hpp"

#include "etnn/egnn.hpp"
#include "etnn/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace etnn::bench {

namespace {

Matrix gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double sd = 1.0) {
    std::normal_distribution<double> n(0.0, sd);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

std::size_t uniform(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

Rank rank_for_size(std::size_t size, Rank max_rank) {
    const Rank r = size == 2 ? 1 : size == 3 ? 2 : 3;
    return std::min(r, max_rank);
}

std::vector<NeighborhoodSpec> random_specs(std::mt19937_64& rng, const std::vector<std::string>& pool) {
    std::vector<NeighborhoodSpec> out;
    while (out.empty())
        for (const auto& s : pool)
            if (std::bernoulli_distribution(0.5)(rng)) out.push_back(parse_neighborhood(s));
    return out;
}

CombinatorialComplex with_node_features(const CombinatorialComplex& cc, const Matrix& positions,
                                        const std::optional<Matrix>& velocities, bool append_coordinates) {
    auto specs = cell_specs(cc);
    if (append_coordinates)
        for (auto& s : specs)
            if (s.rank == 0)
                for (Eigen::Index c = 0; c < positions.cols(); ++c) s.features.push_back(positions(s.nodes[0], c));
    return build_complex(cc.num_nodes(), cc.spatial_dim(), positions, std::move(specs), velocities);
}

EtnnModel model_for(const EtnnConfig& config, const CombinatorialComplex& cc, const NeighborhoodCollection& coll) {
    return init_model(config, infer_schema(config, {Sample{&cc, &coll}}));
}

}  // namespace

CombinatorialComplex random_complex(std::mt19937_64& rng, const RandomComplexOptions& o) {
    const std::size_t n = uniform(rng, o.min_nodes, o.max_nodes);
    const Matrix x = gaussian(rng, static_cast<Eigen::Index>(n), o.spatial_dim);
    std::uniform_real_distribution<double> feat(-1.0, 1.0);
    std::vector<CellSpec> specs;
    for (NodeId v = 0; v < n; ++v) {
        CellSpec s{{v}, 0};
        for (Eigen::Index k = 0; k < o.feature_width; ++k) s.features.push_back(feat(rng));
        specs.push_back(std::move(s));
    }
    std::set<std::vector<NodeId>> seen;
    const std::size_t budget = o.max_cells > n ? uniform(rng, 0, o.max_cells - n) : 0;
    std::vector<NodeId> all(n);
    std::iota(all.begin(), all.end(), NodeId{0});
    for (std::size_t attempt = 0; attempt < 20 * budget + 20 && seen.size() < budget && o.max_rank >= 1; ++attempt) {
        const std::size_t size = uniform(rng, 2, std::min<std::size_t>(n, 6));
        std::shuffle(all.begin(), all.end(), rng);
        std::vector<NodeId> nodes(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(size));
        std::sort(nodes.begin(), nodes.end());
        if (!seen.insert(nodes).second) continue;
        CellSpec s{nodes, rank_for_size(size, o.max_rank)};
        for (Eigen::Index k = 0; k < o.feature_width; ++k) s.features.push_back(feat(rng));
        specs.push_back(std::move(s));
    }
    std::optional<Matrix> v;
    if (o.velocities) v = gaussian(rng, static_cast<Eigen::Index>(n), o.spatial_dim);
    return build_complex(n, o.spatial_dim, x, std::move(specs), v);
}

Matrix random_orthogonal(std::mt19937_64& rng, int n, int det_sign) {
    const Matrix a = gaussian(rng, n, n);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < n; ++i)
        if (r(i, i) < 0) q.col(i) = -q.col(i);
    if ((q.determinant() < 0) != (det_sign < 0)) q.col(0) = -q.col(0);
    return q;
}

double relative_error(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return std::numeric_limits<double>::infinity();
    return (a - b).norm() / std::max(b.norm(), 1e-12);
}

EquivarianceReport equivariance_suite(const EquivarianceOptions& o) {
    static const std::vector<std::string> invariant_pool{
        "dist:sum,centroid:mean", "hausdorff,dist:max",       "dist:min,centroid:mean,hull:diff",
        "hull:x,hull:y,hausdorff:xy", "dist:mean,hausdorff:yx+norm", "centroid:mean"};
    static const std::vector<std::string> neighborhood_pool{"adj_up", "adj_down", "inc_up", "inc_down", "adj_max",
                                                            "inc_up:2"};
    EquivarianceReport report;
    for (int t = 0; t < o.trials; ++t) {
        std::mt19937_64 rng(o.seed * 1000003ULL + static_cast<std::uint64_t>(t));
        const Mode mode = t % 3 == 0 ? Mode::invariant : t % 3 == 1 ? Mode::equivariant : Mode::equivariant_velocity;
        RandomComplexOptions co;
        co.spatial_dim = std::bernoulli_distribution(0.5)(rng) ? 2 : 3;
        co.velocities = mode == Mode::equivariant_velocity;
        const auto base = random_complex(rng, co);
        const auto specs = random_specs(rng, neighborhood_pool);

        EtnnConfig config;
        config.hidden = o.hidden;
        config.num_layers = o.layers;
        config.neighborhoods = specs;
        config.invariants = parse_invariants(invariant_pool[uniform(rng, 0, invariant_pool.size() - 1)]);
        config.mode = mode;
        config.position_diff_normalize = std::bernoulli_distribution(0.5)(rng);
        config.aggregation = std::bernoulli_distribution(0.8)(rng) ? Aggregation::gated_concat : Aggregation::sum;
        config.seed = o.seed + static_cast<std::uint64_t>(t);

        const Matrix rot = random_orthogonal(rng, base.spatial_dim(), std::bernoulli_distribution(0.5)(rng) ? 1 : -1);
        const RowVector shift = gaussian(rng, 1, base.spatial_dim(), 3.0);
        const Matrix x2 = (base.positions() * rot.transpose()).rowwise() + shift;
        std::optional<Matrix> v2;
        if (base.velocities()) v2 = *base.velocities() * rot.transpose();

        const auto cc1 = with_node_features(base, base.positions(), base.velocities(), o.negative_control);
        const auto cc2 = with_node_features(base, x2, v2, o.negative_control);
        const auto coll1 = assemble(cc1, specs);
        const auto coll2 = assemble(cc2, specs);
        auto model = model_for(config, cc1, coll1);
        const auto e1 = evaluate_model(model, cc1, coll1);
        const auto e2 = evaluate_model(model, cc2, coll2);

        const double pred = relative_error(e2.prediction, e1.prediction);
        double hidden = 0.0;
        for (const auto& [r, h] : e1.hidden) hidden = std::max(hidden, relative_error(e2.hidden.at(r), h));
        const Matrix expect_x = (e1.positions * rot.transpose()).rowwise() + shift;
        const double pos = relative_error(e2.positions, expect_x);
        double vel = 0.0;
        if (e1.velocities) vel = relative_error(*e2.velocities, *e1.velocities * rot.transpose());

        report.max_prediction_error = std::max(report.max_prediction_error, pred);
        report.max_hidden_error = std::max(report.max_hidden_error, hidden);
        report.max_position_error = std::max(report.max_position_error, pos);
        report.max_velocity_error = std::max(report.max_velocity_error, vel);
        ++report.trials;
        if (pred <= o.tol && hidden <= o.tol && pos <= o.tol && vel <= o.tol) {
            ++report.passed;
        } else {
            std::ostringstream msg;
            msg << "trial " << t << " (" << to_string(mode) << ", " << config.invariants.to_string()
                << "): prediction " << pred << ", hidden " << hidden << ", positions " << pos << ", velocities " << vel;
            report.failures.push_back(msg.str());
        }
    }
    return report;
}

HasseReport hasse_equivalence(const HasseOptions& o) {
    static const std::vector<std::string> pool{"adj_up", "adj_down", "inc_up", "inc_down"};
    HasseReport report;
    for (int t = 0; t < o.trials; ++t) {
        std::mt19937_64 rng(o.seed * 7919ULL + static_cast<std::uint64_t>(t));
        RandomComplexOptions co;
        co.max_nodes = 10;
        co.max_cells = o.max_cells;
        const auto cc = random_complex(rng, co);
        auto specs = random_specs(rng, pool);
        if (o.negative_control) specs = {parse_neighborhood("adj_up"), parse_neighborhood("inc_up"), parse_neighborhood("inc_down")};
        const auto coll = assemble(cc, specs);

        auto config = EtnnConfig::homogeneous(o.hidden, o.layers, specs);
        config.seed = o.seed + static_cast<std::uint64_t>(t);
        if (o.negative_control) config.share_message = false;
        auto model = model_for(config, cc, coll);
        if (o.negative_control && model.schema.keys.size() < 2) continue;

        const Prepared prep = prepare(model, cc, coll);
        const auto etnn = evaluate_model(model, cc, coll);

        const auto hasse = hasse_graph(cc, coll, Aggregator::mean);
        std::vector<std::vector<NodeId>> members;
        Matrix inputs(static_cast<Eigen::Index>(cc.num_cells()), prep.inputs.at(0).cols());
        Matrix hidden(static_cast<Eigen::Index>(cc.num_cells()), o.hidden);
        for (CellId id = 0; id < cc.num_cells(); ++id) {
            const Cell& c = cc.cell(id);
            members.push_back(c.nodes);
            inputs.row(id) = prep.inputs.at(c.rank).row(prep.row_of[id]);
            hidden.row(id) = etnn.hidden.at(c.rank).row(prep.row_of[id]);
        }
        if (o.negative_control) {
            for (int l = 0; l < o.layers; ++l) {
                const auto& first = model.layers[static_cast<std::size_t>(l)].message.begin()->second;
                for (std::size_t i = 0; i < first.weights.size(); ++i) {
                    const std::string p = "l" + std::to_string(l) + ".message";
                    model.store.add(p + ".w" + std::to_string(i), model.store[first.weights[i]].value);
                    model.store.add(p + ".b" + std::to_string(i), model.store[first.biases[i]].value);
                }
            }
        }
        const auto egnn = egnn_forward(hasse, members, cc.num_nodes(), inputs, model.store,
                                       shared_model_params(o.layers));
        const double dev = std::max(relative_error(egnn.hidden, hidden), relative_error(egnn.node_positions, etnn.positions));
        report.max_deviation = std::max(report.max_deviation, dev);
        ++report.trials;
    }
    return report;
}

GradientReport gradient_suite(const GradientOptions& o) {
    static const std::vector<std::string> invariant_pool{"dist:sum,centroid:mean+norm", "hausdorff,dist:mean",
                                                         "hull:diff,dist:min", "centroid:sum,hausdorff:xy+norm"};
    static const std::vector<std::string> neighborhood_pool{"adj_up", "adj_down", "inc_up", "inc_down", "adj_max"};
    GradientReport report;
    for (int t = 0; t < o.trials; ++t) {
        std::mt19937_64 rng(o.seed * 104729ULL + static_cast<std::uint64_t>(t));
        const Mode mode = t % 3 == 0 ? Mode::invariant : t % 3 == 1 ? Mode::equivariant : Mode::equivariant_velocity;
        RandomComplexOptions co;
        co.max_nodes = 6;
        co.max_cells = 12;
        co.max_rank = 2;
        co.spatial_dim = 3;
        co.velocities = mode == Mode::equivariant_velocity;
        const auto cc = random_complex(rng, co);
        const auto specs = random_specs(rng, neighborhood_pool);
        const auto coll = assemble(cc, specs);

        EtnnConfig config;
        config.hidden = 4;
        config.num_layers = 1 + t % 2;
        config.neighborhoods = specs;
        config.invariants = parse_invariants(invariant_pool[uniform(rng, 0, invariant_pool.size() - 1)]);
        config.mode = mode;
        config.readout = t % 4 == 3 ? ReadoutLevel::node : ReadoutLevel::complex;
        config.out_dim = 1 + t % 2;
        config.aggregation = t % 5 == 4 ? Aggregation::sum : Aggregation::gated_concat;
        config.position_diff_normalize = t % 2 == 0;
        config.seed = o.seed + static_cast<std::uint64_t>(t);
        auto model = model_for(config, cc, coll);
        const Prepared prep = prepare(model, cc, coll);

        const Eigen::Index rows = config.readout == ReadoutLevel::node ? static_cast<Eigen::Index>(cc.num_nodes()) : 1;
        const Matrix target = gaussian(rng, rows, config.out_dim);
        const bool bce = t % 3 == 2;
        const Matrix labels = (target.array() > 0.0).cast<double>();
        const bool moving = model.updates_positions();
        auto loss = [&](ad::Tape& tape) {
            auto out = forward(tape, model, prep, true);
            ad::Var l = bce ? ad::bce_with_logits(out.prediction, labels) : ad::mse_loss(out.prediction, target);
            if (moving) l = ad::add(l, ad::scale(ad::mean_all(ad::mul(out.positions, out.positions)), 0.1));
            return l;
        };
        const auto r = ad::finite_diff_check(model.store, loss, o.h);
        report.max_rel_error = std::max(report.max_rel_error, r.max_rel_error);
        report.coordinates += r.coordinates;
        ++report.trials;
    }
    return report;
}

// ---- k-chain expressivity ----------------------------------------------------

double ExpressivityCell::mean() const {
    if (accuracy.empty()) return 0.0;
    return std::accumulate(accuracy.begin(), accuracy.end(), 0.0) / static_cast<double>(accuracy.size());
}

double ExpressivityCell::stddev() const {
    if (accuracy.size() < 2) return 0.0;
    const double m = mean();
    double s = 0.0;
    for (double a : accuracy) s += (a - m) * (a - m);
    return std::sqrt(s / static_cast<double>(accuracy.size() - 1));
}

const ExpressivityCell* ExpressivityReport::find(const std::string& variant, int layers, int width) const {
    for (const auto& c : cells)
        if (c.variant == variant && c.layers == layers && c.width == width) return &c;
    return nullptr;
}

double ExpressivityReport::mean_accuracy(const std::string& variant, int layers) const {
    double total = 0.0;
    int count = 0;
    for (const auto& c : cells)
        if (c.variant == variant && c.layers == layers) {
            total += c.mean();
            ++count;
        }
    return count ? total / count : std::numeric_limits<double>::quiet_NaN();
}

std::string ExpressivityReport::to_csv() const {
    std::ostringstream out;
    out << "variant,k,layers,width,seeds,mean_accuracy,std_accuracy,accuracies\n";
    for (const auto& c : cells) {
        out << c.variant << ',' << k << ',' << c.layers << ',' << c.width << ',' << c.accuracy.size() << ','
            << c.mean() << ',' << c.stddev() << ',';
        for (std::size_t i = 0; i < c.accuracy.size(); ++i) out << (i ? ";" : "") << c.accuracy[i];
        out << '\n';
    }
    return out.str();
}

std::string ExpressivityReport::to_table() const {
    std::ostringstream out;
    out << "k=" << k << ", epochs=" << epochs << "\n";
    out << std::left << std::setw(10) << "variant" << std::setw(8) << "layers" << std::setw(8) << "width"
        << "accuracy (mean +- std)\n";
    for (const auto& c : cells)
        out << std::left << std::setw(10) << c.variant << std::setw(8) << c.layers << std::setw(8) << c.width
            << std::fixed << std::setprecision(1) << 100.0 * c.mean() << "% +- " << 100.0 * c.stddev() << "%\n";
    return out.str();
}

KchainTask kchain_task(int k, const std::string& variant, int layers, int width, std::uint64_t seed) {
    auto [ga, gb] = k_chain_graphs(k);
    auto [cca, ca] = expressivity_lift(ga, variant);
    auto [ccb, cb] = expressivity_lift(gb, variant);
    EtnnConfig config;
    config.hidden = width;
    config.num_layers = layers;
    config.invariants = parse_invariants("dist:sum,centroid:mean");
    config.mode = Mode::equivariant;
    config.default_features = node_mean_features;
    config.seed = seed;
    return KchainTask{std::move(cca), std::move(ccb), std::move(ca), std::move(cb), std::move(config)};
}

double kchain_accuracy(const KchainTask& task, int epochs, double lr, std::uint64_t seed) {
    auto schema = infer_schema(task.config, {Sample{&task.a, &task.ca}, Sample{&task.b, &task.cb}});
    auto model = init_model(task.config, schema);
    std::vector<DataItem> data{{&task.a, task.ca, Matrix::Constant(1, 1, 1.0)},
                               {&task.b, task.cb, Matrix::Constant(1, 1, 0.0)}};
    TrainSplit split;
    split.train = {0, 1};
    TrainConfig tc;
    tc.epochs = epochs;
    tc.batch_size = 2;
    tc.base_lr = lr;
    tc.weight_decay = 0.0;
    tc.loss = LossKind::bce;
    tc.metric = Metric::accuracy;
    tc.standardize_targets = false;
    tc.restore_best = false;
    tc.seed = seed;
    train(model, data, split, tc);
    return evaluate(model, data, {0, 1}, Metric::accuracy);
}

ExpressivityReport kchain_experiment(const KchainOptions& o) {
    ExpressivityReport report;
    report.k = o.k;
    report.epochs = o.epochs;
    for (const auto& variant : o.variants)
        for (int layers : o.layer_counts)
            for (int width : o.widths) {
                ExpressivityCell cell{variant, layers, width, {}};
                for (int s = 0; s < o.seeds; ++s) {
                    const std::uint64_t seed = o.base_seed + static_cast<std::uint64_t>(s);
                    const auto task = kchain_task(o.k, variant, layers, width, seed);
                    cell.accuracy.push_back(kchain_accuracy(task, o.epochs, o.lr, seed));
                }
                report.cells.push_back(std::move(cell));
            }
    return report;
}

// ---- synthetic molecules -------------------------------------------------------

std::vector<SyntheticMolecule> synthetic_molecules(std::size_t count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> jitter(0.0, 0.08);
    std::vector<SyntheticMolecule> out;
    for (std::size_t m = 0; m < count; ++m) {
        const std::size_t ring = uniform(rng, 5, 6);
        const std::size_t subs = uniform(rng, 1, 3);
        const std::size_t n = ring + subs;
        GeometricGraph g;
        g.num_nodes = n;
        g.spatial_dim = 3;
        g.positions = Matrix::Zero(static_cast<Eigen::Index>(n), 3);
        g.node_features = Matrix::Zero(static_cast<Eigen::Index>(n), 3);
        const double radius = 1.2 + 0.15 * std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
        for (std::size_t i = 0; i < ring; ++i) {
            const double a = 2.0 * M_PI * static_cast<double>(i) / static_cast<double>(ring);
            const auto r = static_cast<Eigen::Index>(i);
            g.positions.row(r) << radius * std::cos(a) + jitter(rng), radius * std::sin(a) + jitter(rng),
                0.2 * (i % 2 ? 1.0 : -1.0) + jitter(rng);
            g.node_features(r, 0) = 1.0;
            g.edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>((i + 1) % ring));
        }
        LiftAnnotations ann;
        std::vector<NodeId> ring_nodes(ring);
        std::iota(ring_nodes.begin(), ring_nodes.end(), NodeId{0});
        ann.rings.push_back(AnnotatedCell{ring_nodes, {static_cast<double>(ring)}});
        std::vector<std::size_t> anchors(ring);
        std::iota(anchors.begin(), anchors.end(), std::size_t{0});
        std::shuffle(anchors.begin(), anchors.end(), rng);
        double heavy = 0.0;
        for (std::size_t s = 0; s < subs; ++s) {
            const auto v = static_cast<Eigen::Index>(ring + s);
            const auto a = static_cast<Eigen::Index>(anchors[s]);
            const double len = 1.0 + 0.4 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
            const RowVector dir = g.positions.row(a).normalized();
            g.positions.row(v) = g.positions.row(a) + len * dir;
            const int type = std::bernoulli_distribution(0.5)(rng) ? 1 : 2;
            g.node_features(v, type) = 1.0;
            heavy += type == 2 ? 1.0 : 0.0;
            g.edges.emplace_back(static_cast<NodeId>(anchors[s]), static_cast<NodeId>(v));
            ann.functional_groups.push_back(AnnotatedCell{{static_cast<NodeId>(anchors[s]), static_cast<NodeId>(v)},
                                                          {static_cast<double>(type)}});
        }
        double bond_sum = 0.0;
        for (const auto& [i, j] : g.edges) {
            const double len = (g.positions.row(i) - g.positions.row(j)).norm();
            bond_sum += len;
            ann.edge_features.push_back({len});
        }
        const RowVector centroid = g.positions.colwise().mean();
        double gyration = 0.0;
        for (Eigen::Index i = 0; i < g.positions.rows(); ++i) gyration += (g.positions.row(i) - centroid).squaredNorm();
        gyration = std::sqrt(gyration / static_cast<double>(n));
        const double target = 0.5 * bond_sum + 2.0 * gyration + 0.7 * heavy - 0.3 * static_cast<double>(ring);
        out.push_back(SyntheticMolecule{molecular_lift(g, ann), target});
    }
    return out;
}

// ---- runtime scaling ------------------------------------------------------------

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const auto n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double den = n * sxx - sx * sx;
    if (den == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return (n * sxy - sx * sy) / den;
}

double ScalingReport::slope() const {
    std::vector<double> x, y;
    for (const auto& r : rows) {
        x.push_back(static_cast<double>(r.cells));
        y.push_back(r.median_seconds);
    }
    return loglog_slope(x, y);
}

std::string ScalingReport::to_csv() const {
    std::ostringstream out;
    out.precision(9);
    out << "family,cells,pairs,repeats,mean_seconds,median_seconds\n";
    for (const auto& r : rows)
        out << family << ',' << r.cells << ',' << r.pairs << ',' << r.repeats << ',' << r.mean_seconds << ','
            << r.median_seconds << '\n';
    return out.str();
}

CombinatorialComplex ring_lattice(std::size_t cells, int degree, std::uint64_t seed) {
    if (degree < 1) throw error(errc::invalid_argument, "ring lattice degree must be >= 1");
    const std::size_t n = std::max<std::size_t>(static_cast<std::size_t>(degree) * 2 + 1,
                                                cells / (1 + static_cast<std::size_t>(degree)));
    std::mt19937_64 rng(seed);
    std::vector<CellSpec> specs;
    for (NodeId v = 0; v < n; ++v) specs.push_back(CellSpec{{v}, 0, {1.0}});
    for (NodeId v = 0; v < n; ++v)
        for (int d = 1; d <= degree; ++d)
            specs.push_back(CellSpec{{v, static_cast<NodeId>((v + static_cast<NodeId>(d)) % n)}, 1, {1.0}});
    BuildOptions opts;
    opts.validate_ranks = false;
    return build_complex(n, 3, gaussian(rng, static_cast<Eigen::Index>(n), 3), std::move(specs), std::nullopt, opts);
}

CombinatorialComplex dense_virtual(std::size_t nodes, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<CellSpec> specs;
    std::vector<NodeId> all;
    for (NodeId v = 0; v < nodes; ++v) {
        specs.push_back(CellSpec{{v}, 0, {1.0}});
        all.push_back(v);
    }
    specs.push_back(CellSpec{all, 1, {}, {"virtual"}});
    return build_complex(nodes, 3, gaussian(rng, static_cast<Eigen::Index>(nodes), 3), std::move(specs));
}

ScalingReport runtime_scaling(const std::string& family, const std::vector<std::size_t>& sizes, int min_repeats,
                              double min_seconds) {
    if (family != "sparse" && family != "dense") throw error(errc::invalid_argument, "scaling family must be sparse or dense");
    ScalingReport report;
    report.family = family;
    for (std::size_t size : sizes) {
        const bool dense = family == "dense";
        const auto cc = dense ? dense_virtual(size, size) : ring_lattice(size, 2, size);
        const auto specs = dense ? parse_neighborhood_list("adj_max") : parse_neighborhood_list("adj_up,inc_up,inc_down");
        const auto coll = assemble(cc, specs);
        EtnnConfig config;
        config.hidden = 16;
        config.num_layers = 1;
        config.neighborhoods = specs;
        config.invariants = parse_invariants("dist:sum");
        config.mode = Mode::equivariant;
        auto model = model_for(config, cc, coll);
        const Prepared prep = prepare(model, cc, coll);

        std::vector<double> times;
        double spent = 0.0;
        while (static_cast<int>(times.size()) < min_repeats || spent < min_seconds) {
            const auto t0 = std::chrono::steady_clock::now();
            {
                ad::Tape tape;
                auto out = forward(tape, model, prep, false);
                (void)out;
            }
            const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            times.push_back(dt);
            spent += dt;
            if (times.size() > 10000) break;
        }
        ScalingRow row;
        row.cells = dense ? cc.num_cells() - 1 : cc.num_cells();
        row.pairs = coll.total_pairs();
        row.repeats = static_cast<int>(times.size());
        row.mean_seconds = std::accumulate(times.begin(), times.end(), 0.0) / static_cast<double>(times.size());
        std::sort(times.begin(), times.end());
        row.median_seconds = times[times.size() / 2];
        report.rows.push_back(row);
    }
    return report;
}

}  // namespace etnn::bench
