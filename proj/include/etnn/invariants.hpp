#ifndef ETNN_INVARIANTS_HPP
#define ETNN_INVARIANTS_HPP

#include "etnn/complex.hpp"
#include "etnn/neighborhoods.hpp"

#include <map>
#include <string>
#include <vector>

namespace etnn {

enum class Aggregator { sum, mean, max, min };
enum class HausdorffMode { sym, xy, yx };

std::string_view to_string(Aggregator agg) noexcept;

/// Aggregated pairwise distance over X x Y (identity transform on distances).
double dist_agg(const Matrix& x, const Matrix& y, Aggregator agg);
/// Distance between linear aggregates of X and Y (mean: centroid distance).
double centroid_dist(const Matrix& x, const Matrix& y, Aggregator agg = Aggregator::mean);
/// Symmetric or directed Hausdorff distance, exact O(|X||Y|).
double hausdorff(const Matrix& x, const Matrix& y, HausdorffMode mode = HausdorffMode::sym);

/// One geometric invariant of a cell pair.
struct InvariantComponent {
    enum class Kind { dist_agg, centroid_dist, hausdorff, hull_x, hull_y, hull_diff };
    Kind kind = Kind::dist_agg;
    Aggregator agg = Aggregator::sum;       ///< dist_agg / centroid_dist
    HausdorffMode mode = HausdorffMode::sym;  ///< hausdorff

    std::string to_string() const;
    friend bool operator==(const InvariantComponent&, const InvariantComponent&) = default;
};

/// Ordered list of invariant components; arity = components.size().
struct InvariantSpec {
    std::vector<InvariantComponent> components;
    bool normalize = false;

    std::size_t arity() const { return components.size(); }
    bool uses_hull() const;
    std::string to_string() const;
};

/// Grammar: comma list of `dist:<sum|mean|max|min>`, `centroid:<mean|sum>`,
/// `hausdorff[:sym|xy|yx]`, `hull:<x|y|diff>`, optional `+norm` suffix.
/// An empty string (or `none`) yields an empty spec.
InvariantSpec parse_invariants(std::string_view text);

/// Component value and its gradient with respect to the points of X and Y.
struct InvariantValue {
    double value = 0.0;
    Matrix grad_x;
    Matrix grad_y;
};

/// Evaluates one component. Ties in max/min pick the first attaining index.
/// Throws EmptyCell, DimensionMismatch, UnsupportedDimension (hull, n not 2/3).
InvariantValue evaluate(const InvariantComponent& component, const Matrix& x, const Matrix& y,
                        bool with_gradient = false);

/// Member-node positions of a cell, one row per node.
Matrix cell_points(const Matrix& positions, std::span<const NodeId> nodes);

/// Per-entry (num_pairs x arity) invariant matrices aligned with entry pair order.
using InvariantTensor = std::vector<Matrix>;

InvariantTensor compute_invariants(const CombinatorialComplex& cc, const NeighborhoodCollection& collection,
                                   const InvariantSpec& spec);
/// Same, evaluated on supplied positions instead of the complex's own.
InvariantTensor compute_invariants(const CombinatorialComplex& cc, const Matrix& positions,
                                   const NeighborhoodCollection& collection, const InvariantSpec& spec);

/// Parameter-free running standardization of invariant columns, keyed by
/// (receiver rank, component). Momentum and epsilon follow batch-norm defaults.
class RunningNormalizer {
public:
    explicit RunningNormalizer(double momentum = 0.1, double eps = 1e-5) : momentum_(momentum), eps_(eps) {}

    struct Stats {
        double mean = 0.0;
        double var = 1.0;
    };

    /// Training mode: standardizes `rows` with their own batch statistics and
    /// folds them into the running estimate (unbiased variance, like batch norm).
    Matrix train(Rank receiver_rank, const Matrix& rows);
    /// Evaluation mode: standardizes with the frozen running statistics.
    Matrix eval(Rank receiver_rank, const Matrix& rows) const;

    Stats stats(Rank receiver_rank, std::size_t component) const;
    void set_stats(Rank receiver_rank, std::size_t component, Stats s);
    const std::map<std::pair<Rank, std::size_t>, Stats>& all() const { return stats_; }

    double momentum() const { return momentum_; }
    double eps() const { return eps_; }

private:
    double momentum_;
    double eps_;
    std::map<std::pair<Rank, std::size_t>, Stats> stats_;
};

}  // namespace etnn

#endif  // ETNN_INVARIANTS_HPP
