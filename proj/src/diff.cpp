#include "etnn/diff.hpp"

#include "etnn/error.hpp"
#include "etnn/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace etnn::ad {

// ---- ParamStore -------------------------------------------------------------

std::size_t ParamStore::add(const std::string& name, Matrix value) {
    if (by_name_.count(name)) throw error(errc::invalid_argument, "parameter '" + name + "' registered twice");
    const auto r = value.rows(), c = value.cols();
    params_.push_back(Param{name, std::move(value), Matrix::Zero(r, c), Matrix::Zero(r, c), Matrix::Zero(r, c)});
    by_name_[name] = params_.size() - 1;
    return params_.size() - 1;
}

std::size_t ParamStore::index(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw error(errc::config_mismatch, "no parameter named '" + name + "'");
    return it->second;
}

std::size_t ParamStore::num_scalars() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
}

void ParamStore::zero_grad() {
    for (auto& p : params_) p.grad.setZero();
}

double ParamStore::grad_norm() const {
    double sq = 0.0;
    for (const auto& p : params_) sq += p.grad.squaredNorm();
    return std::sqrt(sq);
}

// ---- Tape -------------------------------------------------------------------

const Matrix& Var::value() const { return tape->value(id); }

double Var::item() const {
    const Matrix& v = value();
    if (v.rows() != 1 || v.cols() != 1) throw error(errc::shape_mismatch, "item() on a non-scalar node");
    return v(0, 0);
}

Var Tape::constant(Matrix value) {
    nodes_.push_back(Node{std::move(value), {}, false, false, "constant", {}, {}, nullptr, 0});
    return Var{this, nodes_.size() - 1};
}

Var Tape::input(Matrix value) {
    nodes_.push_back(Node{std::move(value), {}, false, true, "input", {}, {}, nullptr, 0});
    return Var{this, nodes_.size() - 1};
}

Var Tape::param(ParamStore& store, std::size_t index) {
    nodes_.push_back(Node{store[index].value, {}, false, true, "param", {}, {}, &store, index});
    return Var{this, nodes_.size() - 1};
}

Var Tape::push(Matrix value, const char* op, std::vector<std::size_t> parents, Backward backward) {
    bool needs = false;
    for (auto p : parents) needs = needs || nodes_[p].requires_grad;
    Node n{std::move(value), {}, false, needs, op, std::move(parents), {}, nullptr, 0};
    if (needs) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
}

Matrix Tape::grad(std::size_t id) const {
    const Node& n = nodes_.at(id);
    return n.has_grad ? n.grad : Matrix::Zero(n.value.rows(), n.value.cols());
}

const Matrix* Tape::grad_ptr(std::size_t id) const {
    const Node& n = nodes_.at(id);
    return n.has_grad ? &n.grad : nullptr;
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (g.rows() != n.value.rows() || g.cols() != n.value.cols())
        throw error(errc::shape_mismatch, std::string("gradient shape differs from value in ") + n.op);
    if (n.has_grad) {
        n.grad += g;
    } else {
        n.grad = g;
        n.has_grad = true;
    }
}

void Tape::backward(Var loss) {
    const Node& l = nodes_.at(loss.id);
    if (l.value.rows() != 1 || l.value.cols() != 1)
        throw error(errc::non_scalar_loss, "loss is " + std::to_string(l.value.rows()) + "x" +
                                               std::to_string(l.value.cols()));
    if (!l.requires_grad) return;
    accumulate(loss.id, Matrix::Ones(1, 1));
    for (std::size_t id = loss.id + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (!n.has_grad) continue;
        if (n.store) (*n.store)[n.param_index].grad += n.grad;
        if (n.backward) n.backward(*this, id);
    }
}

// ---- ops --------------------------------------------------------------------

namespace {

void same_shape(Var a, Var b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw error(errc::shape_mismatch, std::string(op) + ": " + std::to_string(a.rows()) + "x" +
                                              std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                              std::to_string(b.cols()));
}

const Matrix& G(Tape& t, std::size_t id) { return *t.grad_ptr(id); }

double sigmoid_scalar(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

Var matmul(Var a, Var b) {
    if (a.cols() != b.rows())
        throw error(errc::shape_mismatch, "matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                              " by " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    Matrix v = a.value() * b.value();
    return a.tape->push(std::move(v), "matmul", {a.id, b.id}, [a = a.id, b = b.id](Tape& t, std::size_t id) {
        const Matrix& g = G(t, id);
        if (t.requires_grad(a)) t.accumulate(a, g * t.value(b).transpose());
        if (t.requires_grad(b)) t.accumulate(b, t.value(a).transpose() * g);
    });
}

Var add(Var a, Var b) {
    same_shape(a, b, "add");
    return a.tape->push(a.value() + b.value(), "add", {a.id, b.id}, [a = a.id, b = b.id](Tape& t, std::size_t id) {
        t.accumulate(a, G(t, id));
        t.accumulate(b, G(t, id));
    });
}

Var sub(Var a, Var b) {
    same_shape(a, b, "sub");
    return a.tape->push(a.value() - b.value(), "sub", {a.id, b.id}, [a = a.id, b = b.id](Tape& t, std::size_t id) {
        t.accumulate(a, G(t, id));
        t.accumulate(b, -G(t, id));
    });
}

Var mul(Var a, Var b) {
    same_shape(a, b, "mul");
    Matrix v = a.value().cwiseProduct(b.value());
    return a.tape->push(std::move(v), "mul", {a.id, b.id}, [a = a.id, b = b.id](Tape& t, std::size_t id) {
        const Matrix& g = G(t, id);
        if (t.requires_grad(a)) t.accumulate(a, g.cwiseProduct(t.value(b)));
        if (t.requires_grad(b)) t.accumulate(b, g.cwiseProduct(t.value(a)));
    });
}

Var add_row(Var a, Var row) {
    if (row.rows() != 1 || row.cols() != a.cols()) throw error(errc::shape_mismatch, "add_row: bias must be 1 x cols");
    Matrix v = a.value().rowwise() + row.value().row(0);
    return a.tape->push(std::move(v), "add_row", {a.id, row.id}, [a = a.id, r = row.id](Tape& t, std::size_t id) {
        const Matrix& g = G(t, id);
        t.accumulate(a, g);
        if (t.requires_grad(r)) t.accumulate(r, g.colwise().sum());
    });
}

Var mul_rowwise(Var a, Var w) {
    if (w.cols() != 1 || w.rows() != a.rows()) throw error(errc::shape_mismatch, "mul_rowwise: weights must be n x 1");
    Matrix v = a.value().array().colwise() * w.value().col(0).array();
    return a.tape->push(std::move(v), "mul_rowwise", {a.id, w.id}, [a = a.id, w = w.id](Tape& t, std::size_t id) {
        const Matrix& g = G(t, id);
        if (t.requires_grad(a)) t.accumulate(a, Matrix(g.array().colwise() * t.value(w).col(0).array()));
        if (t.requires_grad(w)) t.accumulate(w, Matrix(g.cwiseProduct(t.value(a)).rowwise().sum()));
    });
}

Var scale(Var a, double s) {
    return a.tape->push(a.value() * s, "scale", {a.id},
                        [a = a.id, s](Tape& t, std::size_t id) { t.accumulate(a, G(t, id) * s); });
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw error(errc::shape_mismatch, "concat_cols of nothing");
    const Eigen::Index rows = parts[0].rows();
    Eigen::Index cols = 0;
    std::vector<std::size_t> ids;
    std::vector<Eigen::Index> widths;
    for (const auto& p : parts) {
        if (p.rows() != rows) throw error(errc::shape_mismatch, "concat_cols: row counts differ");
        cols += p.cols();
        ids.push_back(p.id);
        widths.push_back(p.cols());
    }
    Matrix v(rows, cols);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        v.middleCols(at, p.cols()) = p.value();
        at += p.cols();
    }
    return parts[0].tape->push(std::move(v), "concat_cols", ids, [ids, widths](Tape& t, std::size_t id) {
        const Matrix& g = G(t, id);
        Eigen::Index off = 0;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (t.requires_grad(ids[i])) t.accumulate(ids[i], g.middleCols(off, widths[i]));
            off += widths[i];
        }
    });
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw error(errc::shape_mismatch, "concat_rows of nothing");
    const Eigen::Index cols = parts[0].cols();
    Eigen::Index rows = 0;
    std::vector<std::size_t> ids;
    std::vector<Eigen::Index> heights;
    for (const auto& p : parts) {
        if (p.cols() != cols) throw error(errc::shape_mismatch, "concat_rows: column counts differ");
        rows += p.rows();
        ids.push_back(p.id);
        heights.push_back(p.rows());
    }
    Matrix v(rows, cols);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        v.middleRows(at, p.rows()) = p.value();
        at += p.rows();
    }
    return parts[0].tape->push(std::move(v), "concat_rows", ids, [ids, heights](Tape& t, std::size_t id) {
        const Matrix& g = G(t, id);
        Eigen::Index off = 0;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (t.requires_grad(ids[i])) t.accumulate(ids[i], g.middleRows(off, heights[i]));
            off += heights[i];
        }
    });
}

Var silu(Var a) {
    Matrix s = a.value().unaryExpr([](double x) { return sigmoid_scalar(x); });
    Matrix v = a.value().cwiseProduct(s);
    return a.tape->push(std::move(v), "silu", {a.id}, [a = a.id, s = std::move(s)](Tape& t, std::size_t id) {
        const Matrix& x = t.value(a);
        Matrix d = s.array() * (1.0 + x.array() * (1.0 - s.array()));
        t.accumulate(a, G(t, id).cwiseProduct(d));
    });
}

Var sigmoid(Var a) {
    Matrix v = a.value().unaryExpr([](double x) { return sigmoid_scalar(x); });
    return a.tape->push(v, "sigmoid", {a.id}, [a = a.id](Tape& t, std::size_t id) {
        const Matrix& s = t.value(id);
        t.accumulate(a, Matrix(G(t, id).array() * s.array() * (1.0 - s.array())));
    });
}

Var sum_rows(Var a) {
    Matrix v = a.value().colwise().sum();
    if (a.rows() == 0) v = Matrix::Zero(1, a.cols());
    return a.tape->push(std::move(v), "sum_rows", {a.id}, [a = a.id](Tape& t, std::size_t id) {
        const Matrix& g = G(t, id);
        t.accumulate(a, g.replicate(t.value(a).rows(), 1));
    });
}

Var sum_all(Var a) {
    Matrix v(1, 1);
    v(0, 0) = a.value().sum();
    return a.tape->push(std::move(v), "sum_all", {a.id}, [a = a.id](Tape& t, std::size_t id) {
        const Matrix& x = t.value(a);
        t.accumulate(a, Matrix::Constant(x.rows(), x.cols(), G(t, id)(0, 0)));
    });
}

Var mean_all(Var a) {
    const double n = static_cast<double>(a.value().size());
    if (n == 0) throw error(errc::shape_mismatch, "mean of an empty tensor");
    return scale(sum_all(a), 1.0 / n);
}

Var gather_rows(Var a, std::vector<Eigen::Index> index) {
    const Eigen::Index n = a.rows();
    Matrix v(static_cast<Eigen::Index>(index.size()), a.cols());
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] < 0 || index[i] >= n) throw error(errc::index_out_of_range, "gather_rows index out of range");
        v.row(static_cast<Eigen::Index>(i)) = a.value().row(index[i]);
    }
    return a.tape->push(std::move(v), "gather_rows", {a.id}, [a = a.id, index = std::move(index)](Tape& t, std::size_t id) {
        const Matrix& g = G(t, id);
        Matrix out = Matrix::Zero(t.value(a).rows(), t.value(a).cols());
        for (std::size_t i = 0; i < index.size(); ++i) out.row(index[i]) += g.row(static_cast<Eigen::Index>(i));
        t.accumulate(a, out);
    });
}

Var scatter_add_rows(Var a, std::vector<Eigen::Index> index, Eigen::Index rows) {
    if (static_cast<Eigen::Index>(index.size()) != a.rows())
        throw error(errc::shape_mismatch, "scatter_add_rows needs one index per row");
    Matrix v = Matrix::Zero(rows, a.cols());
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] < 0 || index[i] >= rows) throw error(errc::index_out_of_range, "scatter_add_rows index out of range");
        v.row(index[i]) += a.value().row(static_cast<Eigen::Index>(i));
    }
    return a.tape->push(std::move(v), "scatter_add_rows", {a.id},
                        [a = a.id, index = std::move(index)](Tape& t, std::size_t id) {
                            const Matrix& g = G(t, id);
                            Matrix out(static_cast<Eigen::Index>(index.size()), g.cols());
                            for (std::size_t i = 0; i < index.size(); ++i)
                                out.row(static_cast<Eigen::Index>(i)) = g.row(index[i]);
                            t.accumulate(a, out);
                        });
}

Var slice_cols(Var a, Eigen::Index begin, Eigen::Index count) {
    if (begin < 0 || count < 0 || begin + count > a.cols()) throw error(errc::index_out_of_range, "slice_cols range");
    Matrix v = a.value().middleCols(begin, count);
    return a.tape->push(std::move(v), "slice_cols", {a.id}, [a = a.id, begin, count](Tape& t, std::size_t id) {
        Matrix out = Matrix::Zero(t.value(a).rows(), t.value(a).cols());
        out.middleCols(begin, count) = G(t, id);
        t.accumulate(a, out);
    });
}

Var row_normalize_plus1(Var a) {
    Vector r = a.value().rowwise().norm();
    Matrix v = a.value().array().colwise() / (r.array() + 1.0);
    return a.tape->push(std::move(v), "row_normalize_plus1", {a.id}, [a = a.id, r](Tape& t, std::size_t id) {
        const Matrix& g = G(t, id);
        const Matrix& d = t.value(a);
        Matrix out(g.rows(), g.cols());
        for (Eigen::Index i = 0; i < g.rows(); ++i) {
            const double ri = r(i);
            out.row(i) = g.row(i) / (ri + 1.0);
            if (ri > 0.0) out.row(i) -= d.row(i) * (d.row(i).dot(g.row(i)) / (ri * (ri + 1.0) * (ri + 1.0)));
        }
        t.accumulate(a, out);
    });
}

Var batch_standardize(Var a, double eps) {
    const Eigen::Index n = a.rows();
    if (n == 0) return a;
    const RowVector mean = a.value().colwise().mean();
    const Matrix centered = a.value().rowwise() - mean;
    const RowVector inv_std = (centered.array().square().colwise().sum() / static_cast<double>(n) + eps).rsqrt();
    Matrix v = centered.array().rowwise() * inv_std.array();
    return a.tape->push(std::move(v), "batch_standardize", {a.id}, [a = a.id, inv_std](Tape& t, std::size_t id) {
        const Matrix& g = G(t, id);
        const Matrix& y = t.value(id);
        const double n = static_cast<double>(g.rows());
        const RowVector gm = g.colwise().sum() / n;
        const RowVector gy = g.cwiseProduct(y).colwise().sum() / n;
        Matrix out = ((g.rowwise() - gm).array() - y.array().rowwise() * gy.array()).rowwise() * inv_std.array();
        t.accumulate(a, out);
    });
}

Var affine_columns(Var a, const RowVector& mean, const RowVector& inv_std) {
    if (mean.size() != a.cols() || inv_std.size() != a.cols())
        throw error(errc::shape_mismatch, "affine_columns statistics width");
    Matrix v = (a.value().rowwise() - mean).array().rowwise() * inv_std.array();
    return a.tape->push(std::move(v), "affine_columns", {a.id}, [a = a.id, inv_std](Tape& t, std::size_t id) {
        t.accumulate(a, Matrix(G(t, id).array().rowwise() * inv_std.array()));
    });
}

Var pair_invariants(Var positions, const std::vector<std::vector<NodeId>>& receivers,
                    const std::vector<std::vector<NodeId>>& senders, const InvariantSpec& spec) {
    if (receivers.size() != senders.size()) throw error(errc::shape_mismatch, "pair_invariants: pair lists differ");
    const auto arity = static_cast<Eigen::Index>(spec.arity());
    const auto pairs = static_cast<Eigen::Index>(receivers.size());
    Matrix v(pairs, arity);
    const Matrix& pos = positions.value();
    for (Eigen::Index p = 0; p < pairs; ++p) {
        const Matrix x = cell_points(pos, receivers[static_cast<std::size_t>(p)]);
        const Matrix y = cell_points(pos, senders[static_cast<std::size_t>(p)]);
        for (Eigen::Index c = 0; c < arity; ++c)
            v(p, c) = evaluate(spec.components[static_cast<std::size_t>(c)], x, y).value;
    }
    // Gradients are recomputed in the backward pass instead of being stored.
    return positions.tape->push(
        std::move(v), "pair_invariants", {positions.id},
        [pid = positions.id, receivers, senders, spec](Tape& t, std::size_t id) {
            const Matrix& g = G(t, id);
            const Matrix& pos = t.value(pid);
            Matrix out = Matrix::Zero(pos.rows(), pos.cols());
            for (std::size_t p = 0; p < receivers.size(); ++p) {
                const auto pi = static_cast<Eigen::Index>(p);
                if (g.row(pi).isZero(0.0)) continue;
                const Matrix x = cell_points(pos, receivers[p]);
                const Matrix y = cell_points(pos, senders[p]);
                for (std::size_t c = 0; c < spec.arity(); ++c) {
                    const double w = g(pi, static_cast<Eigen::Index>(c));
                    if (w == 0.0) continue;
                    const auto r = evaluate(spec.components[c], x, y, true);
                    for (std::size_t i = 0; i < receivers[p].size(); ++i)
                        out.row(receivers[p][i]) += w * r.grad_x.row(static_cast<Eigen::Index>(i));
                    for (std::size_t i = 0; i < senders[p].size(); ++i)
                        out.row(senders[p][i]) += w * r.grad_y.row(static_cast<Eigen::Index>(i));
                }
            }
            t.accumulate(pid, out);
        });
}

// ---- losses -----------------------------------------------------------------

namespace {

void check_target(Var pred, const Matrix& target, const char* what) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
        throw error(errc::target_mismatch, std::string(what) + ": prediction and target shapes differ");
    if (target.size() == 0) throw error(errc::target_mismatch, std::string(what) + ": empty target");
}

Var elementwise_loss(Var pred, const Matrix& target, const char* op, const std::function<double(double, double)>& f,
                     const std::function<double(double, double)>& df) {
    check_target(pred, target, op);
    const double n = static_cast<double>(target.size());
    Matrix v(1, 1);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < target.rows(); ++i)
        for (Eigen::Index j = 0; j < target.cols(); ++j) acc += f(pred.value()(i, j), target(i, j));
    v(0, 0) = acc / n;
    return pred.tape->push(std::move(v), op, {pred.id}, [p = pred.id, target, df, n](Tape& t, std::size_t id) {
        const double g = G(t, id)(0, 0);
        const Matrix& x = t.value(p);
        Matrix out(x.rows(), x.cols());
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            for (Eigen::Index j = 0; j < x.cols(); ++j) out(i, j) = g * df(x(i, j), target(i, j)) / n;
        t.accumulate(p, out);
    });
}

}  // namespace

Var mse_loss(Var pred, const Matrix& target) {
    return elementwise_loss(
        pred, target, "mse", [](double p, double y) { return (p - y) * (p - y); },
        [](double p, double y) { return 2.0 * (p - y); });
}

Var mae_loss(Var pred, const Matrix& target) {
    return elementwise_loss(
        pred, target, "mae", [](double p, double y) { return std::abs(p - y); },
        [](double p, double y) { return p > y ? 1.0 : (p < y ? -1.0 : 0.0); });
}

Var huber_loss(Var pred, const Matrix& target, double delta) {
    if (delta <= 0) throw error(errc::invalid_argument, "huber delta must be positive");
    return elementwise_loss(
        pred, target, "huber",
        [delta](double p, double y) {
            const double r = std::abs(p - y);
            return r <= delta ? 0.5 * r * r : delta * (r - 0.5 * delta);
        },
        [delta](double p, double y) { return std::clamp(p - y, -delta, delta); });
}

Var bce_with_logits(Var logits, const Matrix& target) {
    return elementwise_loss(
        logits, target, "bce",
        [](double z, double y) { return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z))); },
        [](double z, double y) { return sigmoid_scalar(z) - y; });
}

// ---- MLP --------------------------------------------------------------------

Var Mlp::forward(Tape& tape, ParamStore& store, Var input) const {
    if (input.cols() != in_width())
        throw error(errc::shape_mismatch, "mlp input width " + std::to_string(input.cols()) + ", expected " +
                                              std::to_string(in_width()));
    Var h = input;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        h = add_row(matmul(h, tape.param(store, weights[l])), tape.param(store, biases[l]));
        if (l + 1 < weights.size() || spec.final_activation) h = silu(h);
    }
    return h;
}

Mlp make_mlp(ParamStore& store, const std::string& prefix, MlpSpec spec, std::mt19937_64& rng) {
    if (spec.widths.size() < 2) throw error(errc::invalid_argument, "mlp needs at least one layer");
    for (std::size_t i = 1; i < spec.widths.size(); ++i)
        if (spec.widths[i] <= 0) throw error(errc::invalid_argument, "mlp layer widths must be positive");
    if (spec.widths[0] < 0) throw error(errc::invalid_argument, "negative mlp input width");
    Mlp mlp;
    mlp.spec = spec;
    for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
        const auto fan_in = spec.widths[l], fan_out = spec.widths[l + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        Matrix w(fan_in, fan_out);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
        mlp.weights.push_back(store.add(prefix + ".w" + std::to_string(l), std::move(w)));
        mlp.biases.push_back(store.add(prefix + ".b" + std::to_string(l), Matrix::Zero(1, fan_out)));
    }
    return mlp;
}

// ---- optimization -----------------------------------------------------------

void adam_step(ParamStore& store, const AdamConfig& c) {
    ++store.step;
    const double t = static_cast<double>(store.step);
    const double bc1 = 1.0 - std::pow(c.beta1, t);
    const double bc2 = 1.0 - std::pow(c.beta2, t);
    for (auto& p : store.params()) {
        p.m = c.beta1 * p.m + (1.0 - c.beta1) * p.grad;
        p.v = c.beta2 * p.v + (1.0 - c.beta2) * p.grad.cwiseProduct(p.grad);
        const Matrix update = (p.m / bc1).array() / ((p.v / bc2).array().sqrt() + c.eps);
        p.value -= c.lr * (update + c.weight_decay * p.value);
    }
}

double cosine_lr(std::uint64_t step, std::uint64_t total_steps, double base_lr) {
    if (total_steps == 0) return base_lr;
    const double frac = std::min(1.0, static_cast<double>(step) / static_cast<double>(total_steps));
    return base_lr * 0.5 * (1.0 + std::cos(M_PI * frac));
}

double clip_grad_norm(ParamStore& store, double max_norm) {
    const double norm = store.grad_norm();
    const double factor = norm > max_norm ? max_norm / norm : 1.0;
    if (factor < 1.0)
        for (auto& p : store.params()) p.grad *= factor;
    return factor;
}

GradCheckReport finite_diff_check(ParamStore& store, const std::function<Var(Tape&)>& loss, double h,
                                  std::size_t max_coordinates, std::uint64_t seed) {
    store.zero_grad();
    {
        Tape tape;
        tape.backward(loss(tape));
    }
    std::vector<std::pair<std::size_t, Eigen::Index>> coords;
    for (std::size_t p = 0; p < store.size(); ++p)
        for (Eigen::Index i = 0; i < store[p].value.size(); ++i) coords.emplace_back(p, i);
    if (max_coordinates && coords.size() > max_coordinates) {
        std::mt19937_64 rng(seed);
        std::shuffle(coords.begin(), coords.end(), rng);
        coords.resize(max_coordinates);
        std::sort(coords.begin(), coords.end());
    }
    auto eval = [&] {
        Tape tape;
        return loss(tape).item();
    };
    GradCheckReport report;
    for (auto [p, i] : coords) {
        double& x = store[p].value.data()[i];
        const double saved = x;
        x = saved + h;
        const double up = eval();
        x = saved - h;
        const double down = eval();
        x = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double analytic = store[p].grad.data()[i];
        const double abs_err = std::abs(analytic - numeric);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
        report.max_abs_error = std::max(report.max_abs_error, abs_err);
        report.max_rel_error = std::max(report.max_rel_error, abs_err / denom);
        ++report.coordinates;
    }
    return report;
}

// ---- checkpoints --------------------------------------------------------------

namespace {

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
    return v;
}

void put_doubles(std::string& out, const Matrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, m.data() + i, 8);
        put_u64(out, bits);
    }
}

void get_doubles(const std::string& in, std::size_t& at, Matrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        const std::uint64_t bits = get_u64(in, at);
        std::memcpy(m.data() + i, &bits, 8);
        at += 8;
    }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store, const nlohmann::json& extra) {
    nlohmann::json header;
    header["step"] = store.step;
    header["tensors"] = nlohmann::json::array();
    for (const auto& p : store.params())
        header["tensors"].push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
    header["extra"] = extra;
    const std::string text = header.dump();
    std::string out;
    put_u64(out, text.size());
    out += text;
    for (const auto& p : store.params()) {
        put_doubles(out, p.value);
        put_doubles(out, p.m);
        put_doubles(out, p.v);
    }
    write_file_atomic(path, out);
}

namespace {

nlohmann::json read_header(const std::string& in, const std::filesystem::path& path, std::uint64_t& len) {
    if (in.size() < 8) throw error(errc::parse_error, "checkpoint too short");
    len = get_u64(in, 0);
    if (len > in.size() - 8) throw error(errc::parse_error, "checkpoint header length exceeds file");
    auto header = parse_json_text(in.substr(8, len), path.string());
    if (!header.is_object() || !header.contains("tensors") || !header.contains("step"))
        throw error(errc::parse_error, "checkpoint header lacks tensors or step");
    return header;
}

}  // namespace

nlohmann::json checkpoint_extra(const std::filesystem::path& path) {
    std::uint64_t len = 0;
    return read_header(read_text_file(path), path, len).value("extra", nlohmann::json{});
}

nlohmann::json load_checkpoint(const std::filesystem::path& path, ParamStore& store) {
    const std::string in = read_text_file(path);
    std::uint64_t len = 0;
    const auto header = read_header(in, path, len);
    const auto& tensors = header.at("tensors");
    if (tensors.size() != store.size()) throw error(errc::config_mismatch, "checkpoint tensor count differs");
    std::size_t expected = 8 + len;
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto& t = tensors[i];
        const auto& p = store[i];
        if (t.at("name") != p.name || t.at("rows") != p.value.rows() || t.at("cols") != p.value.cols())
            throw error(errc::config_mismatch, "checkpoint tensor '" + t.at("name").get<std::string>() +
                                                   "' does not match the model");
        expected += 3 * 8 * static_cast<std::size_t>(p.value.size());
    }
    if (in.size() != expected) throw error(errc::parse_error, "checkpoint payload size mismatch");
    std::size_t at = 8 + len;
    for (auto& p : store.params()) {
        get_doubles(in, at, p.value);
        get_doubles(in, at, p.m);
        get_doubles(in, at, p.v);
    }
    store.step = header.at("step").get<std::uint64_t>();
    return header.value("extra", nlohmann::json{});
}

}  // namespace etnn::ad
