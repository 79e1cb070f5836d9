#ifndef ETNN_TYPES_HPP
#define ETNN_TYPES_HPP

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace etnn {

/// Dense row-major matrix used for positions, features and tensor values.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

using NodeId = std::uint32_t;
using CellId = std::uint32_t;
using Rank = int;

/// Directed (receiver, sender) cell pair.
using CellPair = std::pair<CellId, CellId>;

}  // namespace etnn

#endif  // ETNN_TYPES_HPP
