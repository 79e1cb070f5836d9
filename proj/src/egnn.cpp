#include "etnn/egnn.hpp"

#include "etnn/error.hpp"

#include <cmath>

namespace etnn {

namespace {

Matrix silu(const Matrix& x) {
    return x.unaryExpr([](double v) { return v / (1.0 + std::exp(-v)); });
}

struct Dense {
    std::vector<const Matrix*> w;
    std::vector<const Matrix*> b;
    bool activate_last = false;

    Matrix operator()(const Matrix& x) const {
        Matrix h = x;
        for (std::size_t l = 0; l < w.size(); ++l) {
            h = (h * *w[l]).rowwise() + b[l]->row(0);
            if (l + 1 < w.size() || activate_last) h = silu(h);
        }
        return h;
    }
};

Dense load(const ad::ParamStore& store, const std::string& prefix, bool activate_last) {
    Dense d;
    d.activate_last = activate_last;
    for (int l = 0; store.contains(prefix + ".w" + std::to_string(l)); ++l) {
        d.w.push_back(&store[store.index(prefix + ".w" + std::to_string(l))].value);
        d.b.push_back(&store[store.index(prefix + ".b" + std::to_string(l))].value);
    }
    if (d.w.empty()) throw error(errc::config_mismatch, "no parameters under '" + prefix + "'");
    return d;
}

}  // namespace

EgnnParams shared_model_params(int layers) {
    EgnnParams p;
    p.embed = "embed";
    for (int l = 0; l < layers; ++l) {
        const std::string s = "l" + std::to_string(l);
        p.message.push_back(s + ".message");
        p.update.push_back(s + ".update");
        p.position.push_back(s + ".position");
    }
    return p;
}

EgnnResult egnn_forward(const HasseGraph& graph, const std::vector<std::vector<NodeId>>& members,
                        std::size_t num_points, const Matrix& inputs, const ad::ParamStore& store,
                        const EgnnParams& params) {
    const auto n = static_cast<Eigen::Index>(graph.num_nodes());
    if (static_cast<Eigen::Index>(members.size()) != n || inputs.rows() != n)
        throw error(errc::shape_mismatch, "egnn: members and inputs must have one row per graph node");

    std::vector<Eigen::Index> point_row(num_points, -1);
    for (Eigen::Index i = 0; i < n; ++i)
        if (members[static_cast<std::size_t>(i)].size() == 1) point_row[members[static_cast<std::size_t>(i)][0]] = i;

    Matrix h = load(store, params.embed, false)(inputs);
    Matrix x = graph.positions;
    for (std::size_t l = 0; l < params.message.size(); ++l) {
        const Dense phi_e = load(store, params.message[l], true);
        const Dense phi_h = load(store, params.update[l], false);
        const Dense phi_x = load(store, params.position[l], false);
        const Eigen::Index width = h.cols();

        Matrix agg = Matrix::Zero(n, width);
        Matrix shift = Matrix::Zero(n, x.cols());
        Vector count = Vector::Zero(n);
        for (const auto& [i, j] : graph.edges) {
            Matrix in(1, 2 * width + 1);
            in << h.row(i), h.row(j), (x.row(i) - x.row(j)).norm();
            const Matrix m = phi_e(in);
            agg.row(i) += m.row(0);
            if (members[i].size() == 1 && members[j].size() == 1) {
                shift.row(i) += (x.row(i) - x.row(j)) * phi_x(m)(0, 0);
                count(i) += 1.0;
            }
        }
        Matrix cat(n, 2 * width);
        cat << h, agg;
        h += phi_h(cat);

        Matrix next = x;
        for (Eigen::Index i = 0; i < n; ++i)
            if (members[static_cast<std::size_t>(i)].size() == 1 && count(i) > 0) next.row(i) += shift.row(i) / count(i);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& mem = members[static_cast<std::size_t>(i)];
            if (mem.size() == 1) continue;
            next.row(i).setZero();
            for (NodeId v : mem) next.row(i) += next.row(point_row.at(v));
            next.row(i) /= static_cast<double>(mem.size());
        }
        x = std::move(next);
    }
    EgnnResult out;
    out.hidden = std::move(h);
    out.node_positions = Matrix(static_cast<Eigen::Index>(num_points), x.cols());
    for (std::size_t v = 0; v < num_points; ++v) {
        if (point_row[v] < 0) throw error(errc::shape_mismatch, "egnn: a point node has no singleton graph node");
        out.node_positions.row(static_cast<Eigen::Index>(v)) = x.row(point_row[v]);
    }
    out.positions = std::move(x);
    return out;
}

}  // namespace etnn
