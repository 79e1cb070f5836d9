#include "etnn/geometry.hpp"

#include "etnn/error.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace etnn::geometry {

namespace {

using boost::multiprecision::cpp_rational;

int sign_of(double v) { return (v > 0) - (v < 0); }

Point2 row_point(const Matrix& m, Eigen::Index i) { return {m(i, 0), m(i, 1)}; }

}  // namespace

int orientation(Point2 a, Point2 b, Point2 c) {
    const double left = (b.x - a.x) * (c.y - a.y);
    const double right = (b.y - a.y) * (c.x - a.x);
    const double det = left - right;
    // Error bound for the naive determinant (Shewchuk's ccwerrboundA with
    // slack for the rounded differences).
    constexpr double eps = std::numeric_limits<double>::epsilon() * 0.5;
    const double bound = (3.0 + 16.0 * eps) * eps * 4.0 * (std::abs(left) + std::abs(right));
    if (std::isfinite(det) && std::abs(det) > bound) return sign_of(det);

    const cpp_rational ax(a.x), ay(a.y), bx(b.x), by(b.y), cx(c.x), cy(c.y);
    const cpp_rational exact = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
    return exact.sign();
}

bool on_segment(Point2 p, Point2 a, Point2 b) {
    if (orientation(a, b, p) != 0) return false;
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
           p.y <= std::max(a.y, b.y);
}

bool segments_intersect(Point2 a, Point2 b, Point2 c, Point2 d) {
    const int o1 = orientation(a, b, c);
    const int o2 = orientation(a, b, d);
    const int o3 = orientation(c, d, a);
    const int o4 = orientation(c, d, b);
    if (o1 * o2 < 0 && o3 * o4 < 0) return true;
    if (o1 == 0 && on_segment(c, a, b)) return true;
    if (o2 == 0 && on_segment(d, a, b)) return true;
    if (o3 == 0 && on_segment(a, c, d)) return true;
    if (o4 == 0 && on_segment(b, c, d)) return true;
    return false;
}

bool point_in_polygon(Point2 p, const Polygon& polygon) {
    const auto& v = polygon.vertices;
    const Eigen::Index k = v.rows();
    for (Eigen::Index i = 0; i < k; ++i)
        if (on_segment(p, row_point(v, i), row_point(v, (i + 1) % k))) return true;
    bool inside = false;
    for (Eigen::Index i = 0; i < k; ++i) {
        const Point2 a = row_point(v, i);
        const Point2 b = row_point(v, (i + 1) % k);
        if ((a.y > p.y) != (b.y > p.y)) {
            const int dir = b.y > a.y ? 1 : -1;
            if (orientation(a, b, p) * dir > 0) inside = !inside;
        }
    }
    return inside;
}

int ambient_dim(const Shape& s) {
    return std::visit(
        [](const auto& shape) -> int {
            using T = std::decay_t<decltype(shape)>;
            if constexpr (std::is_same_v<T, PointSet>)
                return static_cast<int>(shape.points.cols());
            else
                return static_cast<int>(shape.vertices.cols());
        },
        s);
}

namespace {

void validate(const Shape& s) {
    if (const auto* ps = std::get_if<PointSet>(&s)) {
        if (ps->points.rows() == 0) throw error(errc::degenerate_footprint, "empty point set");
        return;
    }
    if (const auto* pl = std::get_if<Polyline>(&s)) {
        if (pl->vertices.cols() != 2) throw error(errc::unsupported_geometry, "polylines must be planar");
        if (pl->vertices.rows() < 2) throw error(errc::degenerate_footprint, "polyline needs two vertices");
        return;
    }
    const auto& pg = std::get<Polygon>(s);
    if (pg.vertices.cols() != 2) throw error(errc::unsupported_geometry, "polygons must be planar");
    if (pg.vertices.rows() < 3) throw error(errc::degenerate_footprint, "polygon needs three vertices");
}

template <typename F>
bool any_edge(const Matrix& v, bool closed, F&& f) {
    const Eigen::Index k = v.rows();
    const Eigen::Index count = closed ? k : k - 1;
    for (Eigen::Index i = 0; i < count; ++i)
        if (f(row_point(v, i), row_point(v, (i + 1) % k))) return true;
    return false;
}

bool points_vs(const PointSet& ps, const Shape& other) {
    if (const auto* qs = std::get_if<PointSet>(&other)) {
        if (ps.points.cols() != qs->points.cols())
            throw error(errc::dimension_mismatch, "point sets live in different dimensions");
        for (Eigen::Index i = 0; i < ps.points.rows(); ++i)
            for (Eigen::Index j = 0; j < qs->points.rows(); ++j)
                if (ps.points.row(i) == qs->points.row(j)) return true;
        return false;
    }
    if (ps.points.cols() != 2) throw error(errc::unsupported_geometry, "planar shape against non-planar points");
    for (Eigen::Index i = 0; i < ps.points.rows(); ++i) {
        const Point2 p = row_point(ps.points, i);
        if (const auto* pl = std::get_if<Polyline>(&other)) {
            if (any_edge(pl->vertices, false, [&](Point2 a, Point2 b) { return on_segment(p, a, b); }))
                return true;
        } else if (point_in_polygon(p, std::get<Polygon>(other))) {
            return true;
        }
    }
    return false;
}

}  // namespace

bool intersects(const Shape& a, const Shape& b) {
    validate(a);
    validate(b);
    if (const auto* pa = std::get_if<PointSet>(&a)) return points_vs(*pa, b);
    if (const auto* pb = std::get_if<PointSet>(&b)) return points_vs(*pb, a);

    const bool a_closed = std::holds_alternative<Polygon>(a);
    const bool b_closed = std::holds_alternative<Polygon>(b);
    const Matrix& va = a_closed ? std::get<Polygon>(a).vertices : std::get<Polyline>(a).vertices;
    const Matrix& vb = b_closed ? std::get<Polygon>(b).vertices : std::get<Polyline>(b).vertices;

    const bool boundary_hit = any_edge(va, a_closed, [&](Point2 p, Point2 q) {
        return any_edge(vb, b_closed, [&](Point2 r, Point2 s) { return segments_intersect(p, q, r, s); });
    });
    if (boundary_hit) return true;
    // No boundary crossing: one shape may still lie entirely inside a polygon.
    if (b_closed && point_in_polygon(row_point(va, 0), std::get<Polygon>(b))) return true;
    if (a_closed && point_in_polygon(row_point(vb, 0), std::get<Polygon>(a))) return true;
    return false;
}

}  // namespace etnn::geometry
