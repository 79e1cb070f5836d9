#ifndef ETNN_BENCH_HPP
#define ETNN_BENCH_HPP

#include "etnn/lifts.hpp"
#include "etnn/model.hpp"
#include "etnn/training.hpp"

#include <functional>
#include <random>
#include <string>
#include <vector>

namespace etnn::bench {

struct RandomComplexOptions {
    std::size_t min_nodes = 3;
    std::size_t max_nodes = 8;
    Rank max_rank = 3;
    std::size_t max_cells = 25;  ///< total, singletons included
    int spatial_dim = 3;
    Eigen::Index feature_width = 2;  ///< same width at every rank
    bool velocities = false;
};

/// Random complex whose rank is a non-decreasing function of cell size, so
/// rank monotonicity holds by construction.
CombinatorialComplex random_complex(std::mt19937_64& rng, const RandomComplexOptions& options);

/// Haar-ish random orthogonal matrix from the QR factorization of a Gaussian
/// matrix; `det_sign` (+1 or -1) picks rotations or reflections.
Matrix random_orthogonal(std::mt19937_64& rng, int n, int det_sign);

/// Frobenius norm of (a - b) over the norm of b (floor 1e-12).
double relative_error(const Matrix& a, const Matrix& b);

struct EquivarianceOptions {
    int trials = 100;
    double tol = 1e-5;
    std::uint64_t seed = 0;
    int hidden = 16;
    int layers = 2;
    /// Feeds raw coordinates in as node features, which must break invariance.
    bool negative_control = false;
};

struct EquivarianceReport {
    int trials = 0;
    int passed = 0;
    double max_prediction_error = 0.0;
    double max_hidden_error = 0.0;
    double max_position_error = 0.0;
    double max_velocity_error = 0.0;
    std::vector<std::string> failures;

    bool ok() const { return trials > 0 && passed == trials; }
};

/// Trials rotate through invariant, equivariant and velocity modes with
/// random neighborhoods and invariant specs.
EquivarianceReport equivariance_suite(const EquivarianceOptions& options);

struct HasseOptions {
    int trials = 50;
    double tol = 1e-9;
    std::uint64_t seed = 0;
    std::size_t max_cells = 30;
    int hidden = 8;
    int layers = 2;
    /// Separate message MLP per neighborhood: the equivalence must break.
    bool negative_control = false;
};

struct HasseReport {
    int trials = 0;
    double max_deviation = 0.0;
    bool ok(double tol) const { return trials > 0 && max_deviation <= tol; }
};

/// Homogeneous ETNN against an EGNN on the augmented Hasse graph (mean
/// positions for higher cells). Deviation covers hidden states and positions.
HasseReport hasse_equivalence(const HasseOptions& options);

struct GradientOptions {
    int trials = 10;
    double h = 1e-5;
    std::uint64_t seed = 0;
};

struct GradientReport {
    int trials = 0;
    double max_rel_error = 0.0;
    std::size_t coordinates = 0;
};

/// Finite differences of full forward + loss on random small models.
GradientReport gradient_suite(const GradientOptions& options);

struct ExpressivityCell {
    std::string variant;
    int layers = 0;
    int width = 0;
    std::vector<double> accuracy;  ///< one per seed
    double mean() const;
    double stddev() const;
};

struct ExpressivityReport {
    int k = 0;
    int epochs = 0;
    std::vector<ExpressivityCell> cells;

    const ExpressivityCell* find(const std::string& variant, int layers, int width) const;
    /// Mean over widths of the per-cell means.
    double mean_accuracy(const std::string& variant, int layers) const;
    std::string to_csv() const;
    std::string to_table() const;
};

struct KchainOptions {
    int k = 4;
    std::vector<std::string> variants{"graph", "1a", "3a", "3a-up"};
    std::vector<int> layer_counts{1, 2};
    std::vector<int> widths{32, 64};
    int seeds = 5;
    int epochs = 500;
    double lr = 1e-3;
    std::uint64_t base_seed = 0;
};

/// Trains a binary classifier on the two lifted k-chain complexes for every
/// (variant, layers, width, seed); accuracy is the fraction of the pair
/// classified correctly after training.
ExpressivityReport kchain_experiment(const KchainOptions& options);

/// Classifier model and data for one k-chain grid cell.
struct KchainTask {
    CombinatorialComplex a;
    CombinatorialComplex b;
    NeighborhoodCollection ca;
    NeighborhoodCollection cb;
    EtnnConfig config;
};
KchainTask kchain_task(int k, const std::string& variant, int layers, int width, std::uint64_t seed);
double kchain_accuracy(const KchainTask& task, int epochs, double lr, std::uint64_t seed);

struct ScalingRow {
    std::size_t cells = 0;
    std::size_t pairs = 0;
    double mean_seconds = 0.0;
    double median_seconds = 0.0;
    int repeats = 0;
};

struct ScalingReport {
    std::string family;
    std::vector<ScalingRow> rows;
    /// Least-squares slope of log(median time) on log(cells); NaN below two sizes.
    double slope() const;
    std::string to_csv() const;
};

/// Ring lattice (each node joined to its next `degree` neighbours) with edge
/// cells, sized to approximately `cells` cells.
CombinatorialComplex ring_lattice(std::size_t cells, int degree, std::uint64_t seed);
/// Nodes plus one virtual all-node cell; adj_max then joins every node pair.
CombinatorialComplex dense_virtual(std::size_t nodes, std::uint64_t seed);

/// `family` is "sparse" (ring lattice; adj_up, inc_up, inc_down) or "dense"
/// (virtual cell; adj_max). Repeats until `min_seconds` per size is spent.
ScalingReport runtime_scaling(const std::string& family, const std::vector<std::size_t>& sizes, int min_repeats = 3,
                              double min_seconds = 0.2);

struct SyntheticMolecule {
    CombinatorialComplex complex;
    double target = 0.0;
};

/// Small molecule-like complexes: a puckered 5- or 6-ring with 1 to 3
/// substituents, one-hot atom types, bond-length edge features, the ring as a
/// rank-2 cell and substituent/anchor groups as rank-1 cells. The target is a
/// smooth function of geometry and composition.
std::vector<SyntheticMolecule> synthetic_molecules(std::size_t count, std::uint64_t seed);

/// Least-squares slope of log(y) on log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace etnn::bench

#endif  // ETNN_BENCH_HPP
