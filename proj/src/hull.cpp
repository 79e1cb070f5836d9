#include "etnn/hull.hpp"

#include "etnn/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

namespace etnn {

namespace {

double cross2(const Matrix& p, Eigen::Index o, Eigen::Index a, Eigen::Index b) {
    return (p(a, 0) - p(o, 0)) * (p(b, 1) - p(o, 1)) - (p(a, 1) - p(o, 1)) * (p(b, 0) - p(o, 0));
}

// Andrew's monotone chain; returns hull vertex indices in counter-clockwise order.
std::vector<Eigen::Index> hull_2d(const Matrix& p) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(p.rows()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) {
        return p(a, 0) < p(b, 0) || (p(a, 0) == p(b, 0) && p(a, 1) < p(b, 1));
    });
    if (idx.size() < 3) return idx;
    std::vector<Eigen::Index> h(2 * idx.size());
    std::size_t k = 0;
    for (auto i : idx) {
        while (k >= 2 && cross2(p, h[k - 2], h[k - 1], i) <= 0) --k;
        h[k++] = i;
    }
    for (std::size_t t = idx.size() - 1, lower = k + 1; t-- > 0;) {
        const auto i = idx[t];
        while (k >= lower && cross2(p, h[k - 2], h[k - 1], i) <= 0) --k;
        h[k++] = i;
    }
    h.resize(k - 1);
    return h;
}

HullMeasure measure_2d(const Matrix& p, bool with_gradient) {
    HullMeasure out;
    if (with_gradient) out.gradient = Matrix::Zero(p.rows(), 2);
    const auto h = hull_2d(p);
    if (h.size() < 3) return out;
    const std::size_t k = h.size();
    double twice = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const auto a = h[i], b = h[(i + 1) % k];
        twice += p(a, 0) * p(b, 1) - p(b, 0) * p(a, 1);
    }
    out.volume = 0.5 * twice;
    if (with_gradient) {
        for (std::size_t i = 0; i < k; ++i) {
            const auto prev = h[(i + k - 1) % k], cur = h[i], next = h[(i + 1) % k];
            out.gradient(cur, 0) += 0.5 * (p(next, 1) - p(prev, 1));
            out.gradient(cur, 1) += 0.5 * (p(prev, 0) - p(next, 0));
        }
    }
    return out;
}

using Vec3 = Eigen::Vector3d;
using Face = std::array<Eigen::Index, 3>;

// Incremental hull; faces are oriented with outward normals.
std::vector<Face> hull_3d(const std::vector<Vec3>& pts) {
    const auto n = static_cast<Eigen::Index>(pts.size());
    double scale = 0.0;
    for (const auto& a : pts) scale = std::max(scale, (a - pts[0]).norm());
    if (scale == 0.0) return {};
    const double eps_len = 1e-12 * scale;

    Eigen::Index i0 = 0;
    for (Eigen::Index i = 1; i < n; ++i)
        if (pts[i].x() < pts[i0].x()) i0 = i;
    Eigen::Index i1 = i0;
    double best = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        if (double d = (pts[i] - pts[i0]).norm(); d > best) best = d, i1 = i;
    if (best <= eps_len) return {};
    const Vec3 axis = (pts[i1] - pts[i0]).normalized();
    Eigen::Index i2 = i0;
    best = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        if (double d = (pts[i] - pts[i0]).cross(axis).norm(); d > best) best = d, i2 = i;
    if (best <= eps_len) return {};
    const Vec3 normal = (pts[i1] - pts[i0]).cross(pts[i2] - pts[i0]).normalized();
    Eigen::Index i3 = i0;
    best = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        if (double d = std::abs(normal.dot(pts[i] - pts[i0])); d > best) best = d, i3 = i;
    if (best <= eps_len) return {};

    const Vec3 inner = (pts[i0] + pts[i1] + pts[i2] + pts[i3]) / 4.0;
    std::vector<Face> faces;
    auto push_oriented = [&](Eigen::Index a, Eigen::Index b, Eigen::Index c) {
        const Vec3 nrm = (pts[b] - pts[a]).cross(pts[c] - pts[a]);
        if (nrm.dot(pts[a] - inner) < 0) std::swap(b, c);
        faces.push_back({a, b, c});
    };
    push_oriented(i0, i1, i2);
    push_oriented(i0, i1, i3);
    push_oriented(i0, i2, i3);
    push_oriented(i1, i2, i3);

    const double eps_vol = 1e-12 * scale * scale * scale;
    for (Eigen::Index p = 0; p < n; ++p) {
        if (p == i0 || p == i1 || p == i2 || p == i3) continue;
        std::vector<bool> visible(faces.size(), false);
        bool any = false;
        for (std::size_t f = 0; f < faces.size(); ++f) {
            const auto& [a, b, c] = faces[f];
            const Vec3 nrm = (pts[b] - pts[a]).cross(pts[c] - pts[a]);
            if (nrm.dot(pts[p] - pts[a]) > eps_vol) visible[f] = any = true;
        }
        if (!any) continue;
        std::set<std::pair<Eigen::Index, Eigen::Index>> visible_edges;
        for (std::size_t f = 0; f < faces.size(); ++f)
            if (visible[f])
                for (int e = 0; e < 3; ++e) visible_edges.emplace(faces[f][e], faces[f][(e + 1) % 3]);
        std::vector<Face> next;
        next.reserve(faces.size() + 4);
        for (std::size_t f = 0; f < faces.size(); ++f)
            if (!visible[f]) next.push_back(faces[f]);
        for (const auto& [u, v] : visible_edges)
            if (!visible_edges.count({v, u})) next.push_back({u, v, p});
        faces = std::move(next);
    }
    return faces;
}

HullMeasure measure_3d(const Matrix& p, bool with_gradient) {
    HullMeasure out;
    if (with_gradient) out.gradient = Matrix::Zero(p.rows(), 3);
    if (p.rows() < 4) return out;
    std::vector<Vec3> pts(static_cast<std::size_t>(p.rows()));
    Vec3 ref = Vec3::Zero();
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        pts[i] = p.row(i).transpose();
        ref += pts[i];
    }
    ref /= static_cast<double>(p.rows());
    const auto faces = hull_3d(pts);
    double six = 0.0;
    for (const auto& [a, b, c] : faces) {
        const Vec3 ra = pts[a] - ref, rb = pts[b] - ref, rc = pts[c] - ref;
        six += ra.dot(rb.cross(rc));
        if (with_gradient) {
            out.gradient.row(a) += rb.cross(rc).transpose() / 6.0;
            out.gradient.row(b) += rc.cross(ra).transpose() / 6.0;
            out.gradient.row(c) += ra.cross(rb).transpose() / 6.0;
        }
    }
    out.volume = six / 6.0;
    return out;
}

}  // namespace

HullMeasure hull_measure(const Matrix& points, bool with_gradient) {
    if (points.rows() == 0) throw error(errc::empty_cell, "convex hull of an empty point set");
    if (points.cols() == 2) return measure_2d(points, with_gradient);
    if (points.cols() == 3) return measure_3d(points, with_gradient);
    throw error(errc::unsupported_dimension, "convex hull volume needs n in {2, 3}, got " +
                                                 std::to_string(points.cols()));
}

}  // namespace etnn
