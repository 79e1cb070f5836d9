#ifndef ETNN_TESTS_SUPPORT_HPP
#define ETNN_TESTS_SUPPORT_HPP

// Independent reference implementations used by the unit tests and the
// acceptance binary. Nothing here calls the library routine it checks.

#include "etnn/complex.hpp"
#include "etnn/neighborhoods.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <vector>

namespace etnn::oracle {

using PairSet = std::set<CellPair>;

inline bool subset_of(const std::vector<NodeId>& a, const std::vector<NodeId>& b) {
    for (NodeId n : a)
        if (std::find(b.begin(), b.end(), n) == b.end()) return false;
    return true;
}

inline bool proper_subset_of(const std::vector<NodeId>& a, const std::vector<NodeId>& b) {
    return a.size() < b.size() && subset_of(a, b);
}

/// Random complex with up to `max_cells` cells. Rank is a random
/// non-decreasing step function of cell size, so some complexes skip ranks
/// and some keep several sizes at one rank. Positions sit on a coarse integer
/// grid so that distinct nodes sometimes coincide.
inline CombinatorialComplex random_oracle_complex(std::mt19937_64& rng, std::size_t max_cells, int dim = 2) {
    std::uniform_int_distribution<std::size_t> nodes_d(2, 9);
    const std::size_t n = nodes_d(rng);
    std::vector<Rank> rank_of_size(n + 1, 0);
    std::bernoulli_distribution step(0.6);
    for (std::size_t s = 2; s <= n; ++s) rank_of_size[s] = rank_of_size[s - 1] + (s == 2 || step(rng) ? 1 : 0);
    std::uniform_int_distribution<int> grid(-2, 2);
    Matrix pos(static_cast<Eigen::Index>(n), dim);
    for (Eigen::Index i = 0; i < pos.size(); ++i) pos.data()[i] = grid(rng);

    std::set<std::vector<NodeId>> seen;
    for (NodeId i = 0; i < n; ++i) seen.insert({i});
    std::vector<CellSpec> cells;
    std::uniform_int_distribution<std::size_t> extra_d(0, max_cells > n ? max_cells - n : 0);
    const std::size_t extra = extra_d(rng);
    std::uniform_int_distribution<std::size_t> size_d(2, n);
    for (std::size_t attempt = 0; cells.size() < extra && attempt < 20 * max_cells; ++attempt) {
        std::vector<NodeId> all(n);
        for (NodeId i = 0; i < n; ++i) all[i] = i;
        std::shuffle(all.begin(), all.end(), rng);
        const std::size_t s = size_d(rng);
        std::vector<NodeId> cell(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(s));
        std::sort(cell.begin(), cell.end());
        if (!seen.insert(cell).second) continue;
        cells.push_back({cell, rank_of_size[s]});
    }
    return build_complex(n, dim, pos, cells);
}

/// Direct set-theoretic definition of each combinatorial neighborhood kind.
inline PairSet oracle_pairs(const CombinatorialComplex& cc, NeighborhoodKind kind, int hop = 1) {
    PairSet out;
    const auto& cells = cc.cells();
    const CellId m = static_cast<CellId>(cells.size());
    Rank top = 0;
    for (const auto& c : cells) top = std::max(top, c.rank);
    auto common_cell = [&](CellId x, CellId y, auto pred) {
        for (CellId z = 0; z < m; ++z)
            if (pred(cells[z]) && proper_subset_of(cells[x].nodes, cells[z].nodes) &&
                proper_subset_of(cells[y].nodes, cells[z].nodes))
                return true;
        return false;
    };
    auto common_face = [&](CellId x, CellId y, Rank r) {
        for (CellId z = 0; z < m; ++z)
            if (cells[z].rank == r && proper_subset_of(cells[z].nodes, cells[x].nodes) &&
                proper_subset_of(cells[z].nodes, cells[y].nodes))
                return true;
        return false;
    };
    for (CellId x = 0; x < m; ++x)
        for (CellId y = 0; y < m; ++y) {
            if (x == y) continue;
            const Rank rx = cells[x].rank, ry = cells[y].rank;
            bool hit = false;
            switch (kind) {
                case NeighborhoodKind::inc_up:
                    hit = ry == rx + hop && proper_subset_of(cells[x].nodes, cells[y].nodes);
                    break;
                case NeighborhoodKind::inc_down:
                    hit = ry == rx - hop && proper_subset_of(cells[y].nodes, cells[x].nodes);
                    break;
                case NeighborhoodKind::adj_up:
                    hit = rx == ry && common_cell(x, y, [&](const Cell& z) { return z.rank == rx + 1; });
                    break;
                case NeighborhoodKind::adj_down:
                    hit = rx == ry && common_face(x, y, rx - 1);
                    break;
                case NeighborhoodKind::adj_max:
                    hit = rx == ry && common_cell(x, y, [&](const Cell& z) { return z.rank == top; });
                    break;
                default: {
                    // Point-set footprints intersect iff two member points coincide.
                    const int off = kind == NeighborhoodKind::spatial_adj ? 0
                                    : kind == NeighborhoodKind::spatial_inc_up ? 1
                                                                               : -1;
                    if (ry != rx + off) break;
                    for (NodeId a : cells[x].nodes)
                        for (NodeId b : cells[y].nodes)
                            if (cc.positions().row(a) == cc.positions().row(b)) hit = true;
                    break;
                }
            }
            if (hit) out.insert({x, y});
        }
    return out;
}

/// Union of entry pairs; also checks each entry's stated ranks and ordering.
inline PairSet entry_pairs(const CombinatorialComplex& cc, const std::vector<NeighborhoodEntry>& entries,
                           bool* consistent = nullptr) {
    PairSet out;
    bool ok = true;
    for (const auto& e : entries) {
        if (!std::is_sorted(e.pairs.begin(), e.pairs.end())) ok = false;
        for (const auto& [x, y] : e.pairs) {
            if (x == y || cc.cell(x).rank != e.receiver_rank || cc.cell(y).rank != e.sender_rank) ok = false;
            if (!out.insert({x, y}).second) ok = false;
        }
    }
    if (consistent) *consistent = ok;
    return out;
}

/// Directed Hausdorff distance by exhaustive enumeration.
inline double hausdorff_oracle(const Matrix& x, const Matrix& y) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < y.rows(); ++j) {
            double s = 0.0;
            for (Eigen::Index d = 0; d < x.cols(); ++d) s += (x(i, d) - y(j, d)) * (x(i, d) - y(j, d));
            best = std::min(best, std::sqrt(s));
        }
        worst = std::max(worst, best);
    }
    return worst;
}

/// Supporting hyperplanes of the hull, found by brute force over every
/// (dim)-subset of points: normal, offset with normal . p <= offset inside.
struct Halfspace {
    Eigen::VectorXd normal;
    double offset = 0.0;
};

inline std::vector<Halfspace> supporting_halfspaces(const Matrix& p) {
    const Eigen::Index n = p.rows(), d = p.cols();
    std::vector<Halfspace> out;
    auto consider = [&](Eigen::VectorXd normal, Eigen::Index anchor) {
        if (normal.norm() < 1e-12) return;
        normal.normalize();
        const double off = normal.dot(p.row(anchor).transpose());
        double hi = -std::numeric_limits<double>::infinity(), lo = -hi;
        for (Eigen::Index k = 0; k < n; ++k) {
            const double v = normal.dot(p.row(k).transpose()) - off;
            hi = std::max(hi, v);
            lo = std::min(lo, v);
        }
        if (hi <= 1e-12) out.push_back({normal, off});
        else if (lo >= -1e-12) out.push_back({-normal, -off});
    };
    if (d == 2) {
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j) {
                Eigen::VectorXd e = (p.row(j) - p.row(i)).transpose();
                Eigen::VectorXd normal(2);
                normal << -e(1), e(0);
                consider(normal, i);
            }
    } else {
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j)
                for (Eigen::Index k = j + 1; k < n; ++k) {
                    Eigen::Vector3d a = (p.row(j) - p.row(i)).transpose();
                    Eigen::Vector3d b = (p.row(k) - p.row(i)).transpose();
                    consider(Eigen::VectorXd(a.cross(b)), i);
                }
    }
    return out;
}

/// Monte-Carlo rejection estimate of the hull measure: uniform samples in the
/// bounding box, accepted when inside every supporting halfspace.
inline double monte_carlo_hull(const Matrix& p, std::size_t samples, std::uint64_t seed) {
    const auto planes = supporting_halfspaces(p);
    const Eigen::RowVectorXd lo = p.colwise().minCoeff(), hi = p.colwise().maxCoeff();
    double box = 1.0;
    for (Eigen::Index d = 0; d < p.cols(); ++d) box *= hi(d) - lo(d);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::size_t inside = 0;
    Eigen::VectorXd q(p.cols());
    for (std::size_t s = 0; s < samples; ++s) {
        for (Eigen::Index d = 0; d < p.cols(); ++d) q(d) = lo(d) + u(rng) * (hi(d) - lo(d));
        bool in = true;
        for (const auto& h : planes)
            if (h.normal.dot(q) > h.offset) {
                in = false;
                break;
            }
        inside += in ? 1 : 0;
    }
    return box * static_cast<double>(inside) / static_cast<double>(samples);
}

/// Orthogonal matrix from Householder QR of a Gaussian matrix, columns sign
/// fixed by the diagonal of R, with the requested determinant sign.
inline Matrix orthogonal_oracle(std::mt19937_64& rng, int n, int det_sign) {
    std::normal_distribution<double> g;
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < n; ++i)
        if (r(i, i) < 0) q.col(i) *= -1.0;
    if ((q.determinant() > 0) != (det_sign > 0)) q.col(0) *= -1.0;
    return q;
}

inline Matrix random_points(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
    return m;
}

}  // namespace etnn::oracle

#endif  // ETNN_TESTS_SUPPORT_HPP
