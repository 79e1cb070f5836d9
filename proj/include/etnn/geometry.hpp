#ifndef ETNN_GEOMETRY_HPP
#define ETNN_GEOMETRY_HPP

#include "etnn/types.hpp"

#include <variant>
#include <vector>

namespace etnn::geometry {

/// Closed-set geometric primitives. Polylines and polygons are planar (n = 2);
/// point sets may live in any dimension.
struct PointSet {
    Matrix points;  ///< one point per row
};

struct Polyline {
    Matrix vertices;  ///< k x 2, k >= 2
};

/// Simple polygon; the closing edge is implicit. Interior by the even-odd rule.
struct Polygon {
    Matrix vertices;  ///< k x 2, k >= 3
};

using Shape = std::variant<PointSet, Polyline, Polygon>;

struct Point2 {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Point2&, const Point2&) = default;
};

/// Exact sign of the orientation determinant of (a, b, c): +1 counter-clockwise,
/// -1 clockwise, 0 collinear. Uses a floating filter and falls back to exact
/// rational arithmetic on the (exactly representable) double inputs.
int orientation(Point2 a, Point2 b, Point2 c);

/// Closed point-on-segment test.
bool on_segment(Point2 p, Point2 a, Point2 b);

/// Closed segment-segment intersection (touching and collinear overlap count).
bool segments_intersect(Point2 a, Point2 b, Point2 c, Point2 d);

/// Point in closed polygon: boundary counts as inside, interior by even-odd.
bool point_in_polygon(Point2 p, const Polygon& polygon);

/// Non-empty intersection of two closed shapes. Throws UnsupportedGeometry when
/// a polyline/polygon is involved and the ambient dimension is not 2, and
/// DegenerateFootprint for empty or under-specified shapes.
bool intersects(const Shape& a, const Shape& b);

/// Ambient dimension of a shape.
int ambient_dim(const Shape& s);

}  // namespace etnn::geometry

#endif  // ETNN_GEOMETRY_HPP
