#include "etnn/invariants.hpp"

#include "etnn/error.hpp"
#include "etnn/hull.hpp"

#include <cmath>
#include <limits>

namespace etnn {

std::string_view to_string(Aggregator agg) noexcept {
    switch (agg) {
        case Aggregator::sum: return "sum";
        case Aggregator::mean: return "mean";
        case Aggregator::max: return "max";
        case Aggregator::min: return "min";
    }
    return "?";
}

namespace {

void check_sets(const Matrix& x, const Matrix& y) {
    if (x.rows() == 0 || y.rows() == 0) throw error(errc::empty_cell, "invariant of an empty point set");
    if (x.cols() != y.cols()) throw error(errc::dimension_mismatch, "point sets in different dimensions");
}

// Unit direction of (a - b), zero when the points coincide (subgradient).
RowVector unit_diff(const RowVector& a, const RowVector& b, double dist) {
    if (dist == 0.0) return RowVector::Zero(a.size());
    return (a - b) / dist;
}

/// Euclidean distance summed in coordinate order, so results are reproducible
/// bit for bit regardless of vectorization.
double point_distance(const Matrix& x, Eigen::Index i, const Matrix& y, Eigen::Index j) {
    double s = 0.0;
    for (Eigen::Index d = 0; d < x.cols(); ++d) {
        const double t = x(i, d) - y(j, d);
        s += t * t;
    }
    return std::sqrt(s);
}

InvariantValue eval_dist(const Matrix& x, const Matrix& y, Aggregator agg, bool grad) {
    InvariantValue out;
    if (grad) {
        out.grad_x = Matrix::Zero(x.rows(), x.cols());
        out.grad_y = Matrix::Zero(y.rows(), y.cols());
    }
    const bool extremal = agg == Aggregator::max || agg == Aggregator::min;
    double acc = extremal ? (agg == Aggregator::max ? -1.0 : std::numeric_limits<double>::infinity()) : 0.0;
    Eigen::Index bi = 0, bj = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < y.rows(); ++j) {
            const double d = point_distance(x, i, y, j);
            if (!extremal) {
                acc += d;
                if (grad) {
                    const RowVector u = unit_diff(x.row(i), y.row(j), d);
                    out.grad_x.row(i) += u;
                    out.grad_y.row(j) -= u;
                }
            } else if ((agg == Aggregator::max && d > acc) || (agg == Aggregator::min && d < acc)) {
                acc = d, bi = i, bj = j;
            }
        }
    }
    if (agg == Aggregator::mean) {
        const double count = static_cast<double>(x.rows() * y.rows());
        acc /= count;
        if (grad) out.grad_x /= count, out.grad_y /= count;
    }
    if (extremal && grad) {
        const RowVector u = unit_diff(x.row(bi), y.row(bj), acc);
        out.grad_x.row(bi) += u;
        out.grad_y.row(bj) -= u;
    }
    out.value = acc;
    return out;
}

InvariantValue eval_centroid(const Matrix& x, const Matrix& y, Aggregator agg, bool grad) {
    if (agg != Aggregator::mean && agg != Aggregator::sum)
        throw error(errc::invalid_argument, "centroid distance needs a linear aggregator (mean or sum)");
    const double wx = agg == Aggregator::mean ? 1.0 / static_cast<double>(x.rows()) : 1.0;
    const double wy = agg == Aggregator::mean ? 1.0 / static_cast<double>(y.rows()) : 1.0;
    const RowVector diff = wx * x.colwise().sum() - wy * y.colwise().sum();
    InvariantValue out;
    out.value = diff.norm();
    if (grad) {
        const RowVector u = out.value == 0.0 ? RowVector::Zero(diff.size()) : RowVector(diff / out.value);
        out.grad_x = (wx * u).replicate(x.rows(), 1);
        out.grad_y = (-wy * u).replicate(y.rows(), 1);
    }
    return out;
}

// max over a in A of min over b in B; records the attaining (a, b) indices.
double directed(const Matrix& a, const Matrix& b, Eigen::Index& ai, Eigen::Index& bj) {
    double best = -1.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        double nearest = std::numeric_limits<double>::infinity();
        Eigen::Index nj = 0;
        for (Eigen::Index j = 0; j < b.rows(); ++j) {
            const double d = point_distance(a, i, b, j);
            if (d < nearest) nearest = d, nj = j;
        }
        if (nearest > best) best = nearest, ai = i, bj = nj;
    }
    return best;
}

InvariantValue eval_hausdorff(const Matrix& x, const Matrix& y, HausdorffMode mode, bool grad) {
    Eigen::Index xi = 0, yj = 0, yi = 0, xj = 0;
    const double dxy = mode != HausdorffMode::yx ? directed(x, y, xi, yj) : 0.0;
    const double dyx = mode != HausdorffMode::xy ? directed(y, x, yi, xj) : 0.0;
    bool use_xy = mode == HausdorffMode::xy || (mode == HausdorffMode::sym && dxy >= dyx);
    InvariantValue out;
    out.value = use_xy ? dxy : dyx;
    if (grad) {
        out.grad_x = Matrix::Zero(x.rows(), x.cols());
        out.grad_y = Matrix::Zero(y.rows(), y.cols());
        const Eigen::Index ix = use_xy ? xi : xj;
        const Eigen::Index iy = use_xy ? yj : yi;
        const RowVector u = unit_diff(x.row(ix), y.row(iy), out.value);
        out.grad_x.row(ix) += u;
        out.grad_y.row(iy) -= u;
    }
    return out;
}

InvariantValue eval_hull(const Matrix& x, const Matrix& y, InvariantComponent::Kind kind, bool grad) {
    InvariantValue out;
    const bool need_x = kind != InvariantComponent::Kind::hull_y;
    const bool need_y = kind != InvariantComponent::Kind::hull_x;
    HullMeasure hx, hy;
    if (need_x) hx = hull_measure(x, grad);
    if (need_y) hy = hull_measure(y, grad);
    if (grad) {
        out.grad_x = need_x ? hx.gradient : Matrix::Zero(x.rows(), x.cols());
        out.grad_y = need_y ? hy.gradient : Matrix::Zero(y.rows(), y.cols());
    }
    switch (kind) {
        case InvariantComponent::Kind::hull_x: out.value = hx.volume; break;
        case InvariantComponent::Kind::hull_y: out.value = hy.volume; break;
        default:
            out.value = hx.volume - hy.volume;
            if (grad) out.grad_y = -out.grad_y;
            break;
    }
    return out;
}

}  // namespace

InvariantValue evaluate(const InvariantComponent& c, const Matrix& x, const Matrix& y, bool with_gradient) {
    check_sets(x, y);
    using K = InvariantComponent::Kind;
    switch (c.kind) {
        case K::dist_agg: return eval_dist(x, y, c.agg, with_gradient);
        case K::centroid_dist: return eval_centroid(x, y, c.agg, with_gradient);
        case K::hausdorff: return eval_hausdorff(x, y, c.mode, with_gradient);
        default: return eval_hull(x, y, c.kind, with_gradient);
    }
}

double dist_agg(const Matrix& x, const Matrix& y, Aggregator agg) {
    return evaluate({InvariantComponent::Kind::dist_agg, agg}, x, y).value;
}

double centroid_dist(const Matrix& x, const Matrix& y, Aggregator agg) {
    return evaluate({InvariantComponent::Kind::centroid_dist, agg}, x, y).value;
}

double hausdorff(const Matrix& x, const Matrix& y, HausdorffMode mode) {
    return evaluate({InvariantComponent::Kind::hausdorff, Aggregator::sum, mode}, x, y).value;
}

std::string InvariantComponent::to_string() const {
    switch (kind) {
        case Kind::dist_agg: return "dist:" + std::string(etnn::to_string(agg));
        case Kind::centroid_dist: return "centroid:" + std::string(etnn::to_string(agg));
        case Kind::hausdorff:
            return mode == HausdorffMode::sym ? "hausdorff" : (mode == HausdorffMode::xy ? "hausdorff:xy" : "hausdorff:yx");
        case Kind::hull_x: return "hull:x";
        case Kind::hull_y: return "hull:y";
        case Kind::hull_diff: return "hull:diff";
    }
    return "?";
}

bool InvariantSpec::uses_hull() const {
    for (const auto& c : components)
        if (c.kind == InvariantComponent::Kind::hull_x || c.kind == InvariantComponent::Kind::hull_y ||
            c.kind == InvariantComponent::Kind::hull_diff)
            return true;
    return false;
}

std::string InvariantSpec::to_string() const {
    std::string out;
    for (const auto& c : components) out += (out.empty() ? "" : ",") + c.to_string();
    if (normalize) out += "+norm";
    return out;
}

InvariantSpec parse_invariants(std::string_view text) {
    InvariantSpec spec;
    constexpr std::string_view norm = "+norm";
    if (text.size() >= norm.size() && text.substr(text.size() - norm.size()) == norm) {
        spec.normalize = true;
        text.remove_suffix(norm.size());
    }
    if (text.empty() || text == "none") return spec;
    auto parse_agg = [](std::string_view s) {
        if (s == "sum") return Aggregator::sum;
        if (s == "mean") return Aggregator::mean;
        if (s == "max") return Aggregator::max;
        if (s == "min") return Aggregator::min;
        throw error(errc::parse_error, "unknown aggregator '" + std::string(s) + "'");
    };
    using K = InvariantComponent::Kind;
    while (!text.empty()) {
        const auto comma = text.find(',');
        std::string_view item = text.substr(0, comma);
        text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
        const auto colon = item.find(':');
        const std::string_view head = item.substr(0, colon);
        const std::string_view arg = colon == std::string_view::npos ? std::string_view{} : item.substr(colon + 1);
        InvariantComponent c;
        if (head == "dist") {
            c.kind = K::dist_agg;
            c.agg = arg.empty() ? Aggregator::sum : parse_agg(arg);
        } else if (head == "centroid") {
            c.kind = K::centroid_dist;
            c.agg = arg.empty() ? Aggregator::mean : parse_agg(arg);
            if (c.agg != Aggregator::mean && c.agg != Aggregator::sum)
                throw error(errc::parse_error, "centroid aggregator must be mean or sum");
        } else if (head == "hausdorff") {
            c.kind = K::hausdorff;
            if (arg.empty() || arg == "sym") c.mode = HausdorffMode::sym;
            else if (arg == "xy") c.mode = HausdorffMode::xy;
            else if (arg == "yx") c.mode = HausdorffMode::yx;
            else throw error(errc::parse_error, "hausdorff mode must be sym, xy or yx");
        } else if (head == "hull") {
            if (arg == "x") c.kind = K::hull_x;
            else if (arg == "y") c.kind = K::hull_y;
            else if (arg == "diff") c.kind = K::hull_diff;
            else throw error(errc::parse_error, "hull component must be x, y or diff");
        } else {
            throw error(errc::parse_error, "unknown invariant '" + std::string(item) + "'");
        }
        spec.components.push_back(c);
    }
    return spec;
}

Matrix cell_points(const Matrix& positions, std::span<const NodeId> nodes) {
    Matrix out(static_cast<Eigen::Index>(nodes.size()), positions.cols());
    for (std::size_t i = 0; i < nodes.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = positions.row(nodes[i]);
    return out;
}

InvariantTensor compute_invariants(const CombinatorialComplex& cc, const NeighborhoodCollection& collection,
                                   const InvariantSpec& spec) {
    return compute_invariants(cc, cc.positions(), collection, spec);
}

InvariantTensor compute_invariants(const CombinatorialComplex& cc, const Matrix& positions,
                                   const NeighborhoodCollection& collection, const InvariantSpec& spec) {
    InvariantTensor out;
    out.reserve(collection.entries.size());
    const auto arity = static_cast<Eigen::Index>(spec.arity());
    for (const auto& entry : collection.entries) {
        Matrix m(static_cast<Eigen::Index>(entry.pairs.size()), arity);
        for (std::size_t p = 0; p < entry.pairs.size(); ++p) {
            const Matrix x = cell_points(positions, cc.cell(entry.pairs[p].first).nodes);
            const Matrix y = cell_points(positions, cc.cell(entry.pairs[p].second).nodes);
            for (Eigen::Index c = 0; c < arity; ++c)
                m(static_cast<Eigen::Index>(p), c) = evaluate(spec.components[static_cast<std::size_t>(c)], x, y).value;
        }
        out.push_back(std::move(m));
    }
    return out;
}

Matrix RunningNormalizer::train(Rank receiver_rank, const Matrix& rows) {
    Matrix out = rows;
    const double n = static_cast<double>(rows.rows());
    if (rows.rows() == 0) return out;
    for (Eigen::Index c = 0; c < rows.cols(); ++c) {
        const double mean = rows.col(c).mean();
        const double biased = (rows.col(c).array() - mean).square().sum() / n;
        out.col(c) = (rows.col(c).array() - mean) / std::sqrt(biased + eps_);
        const double unbiased = rows.rows() > 1 ? biased * n / (n - 1.0) : biased;
        auto& s = stats_[{receiver_rank, static_cast<std::size_t>(c)}];
        s.mean = (1.0 - momentum_) * s.mean + momentum_ * mean;
        s.var = (1.0 - momentum_) * s.var + momentum_ * unbiased;
    }
    return out;
}

Matrix RunningNormalizer::eval(Rank receiver_rank, const Matrix& rows) const {
    Matrix out = rows;
    for (Eigen::Index c = 0; c < rows.cols(); ++c) {
        const Stats s = stats(receiver_rank, static_cast<std::size_t>(c));
        out.col(c) = (rows.col(c).array() - s.mean) / std::sqrt(s.var + eps_);
    }
    return out;
}

RunningNormalizer::Stats RunningNormalizer::stats(Rank receiver_rank, std::size_t component) const {
    auto it = stats_.find({receiver_rank, component});
    return it == stats_.end() ? Stats{} : it->second;
}

void RunningNormalizer::set_stats(Rank receiver_rank, std::size_t component, Stats s) {
    stats_[{receiver_rank, component}] = s;
}

}  // namespace etnn
