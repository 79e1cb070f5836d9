#ifndef ETNN_EGNN_HPP
#define ETNN_EGNN_HPP

#include "etnn/diff.hpp"
#include "etnn/lifts.hpp"

#include <string>
#include <vector>

namespace etnn {

/// Parameter names an EGNN reads from a ParamStore. Each MLP follows the
/// `<prefix>.w<i>` / `<prefix>.b<i>` layout of ad::make_mlp.
struct EgnnParams {
    std::string embed;
    std::vector<std::string> message;   ///< per layer, SiLU after every layer
    std::vector<std::string> update;    ///< per layer
    std::vector<std::string> position;  ///< per layer
};

/// Parameter names of a homogeneous ETNN model with `layers` layers.
EgnnParams shared_model_params(int layers);

struct EgnnResult {
    Matrix hidden;          ///< one row per graph node
    Matrix positions;       ///< one row per graph node
    Matrix node_positions;  ///< positions of the underlying point nodes (singleton rows)
};

/// EGNN over a geometric augmented Hasse graph with the singleton-only
/// position rule: singleton Hasse nodes move by the EGNN update restricted to
/// singleton neighbours (C = 1 / neighbour count), every other Hasse node
/// moves to the mean of its updated members. `members[i]` lists the point
/// nodes of Hasse node i; `inputs` holds its input features.
EgnnResult egnn_forward(const HasseGraph& graph, const std::vector<std::vector<NodeId>>& members,
                        std::size_t num_points, const Matrix& inputs, const ad::ParamStore& store,
                        const EgnnParams& params);

}  // namespace etnn

#endif  // ETNN_EGNN_HPP
