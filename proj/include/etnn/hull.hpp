#ifndef ETNN_HULL_HPP
#define ETNN_HULL_HPP

#include "etnn/types.hpp"

namespace etnn {

/// Convex hull measure of a point set together with its gradient with respect
/// to every input point (rows of `gradient` align with rows of the input).
struct HullMeasure {
    double volume = 0.0;
    Matrix gradient;
};

/// Area (n = 2) or volume (n = 3) of the convex hull. Affinely degenerate
/// sets measure 0 with zero gradient. Throws UnsupportedDimension for other n
/// and EmptyCell for an empty set.
HullMeasure hull_measure(const Matrix& points, bool with_gradient = false);

inline double hull_volume(const Matrix& points) { return hull_measure(points, false).volume; }

}  // namespace etnn

#endif  // ETNN_HULL_HPP
