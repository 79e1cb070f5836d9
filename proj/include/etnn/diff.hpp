#ifndef ETNN_DIFF_HPP
#define ETNN_DIFF_HPP

#include "etnn/invariants.hpp"
#include "etnn/types.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace etnn::ad {

/// Named parameter tensors with gradients and Adam moments.
class ParamStore {
public:
    struct Param {
        std::string name;
        Matrix value;
        Matrix grad;
        Matrix m;
        Matrix v;
    };

    /// Registers a tensor; throws InvalidArgument for a repeated name.
    std::size_t add(const std::string& name, Matrix value);
    std::size_t index(const std::string& name) const;
    bool contains(const std::string& name) const { return by_name_.count(name) != 0; }

    Param& operator[](std::size_t i) { return params_.at(i); }
    const Param& operator[](std::size_t i) const { return params_.at(i); }
    std::size_t size() const { return params_.size(); }
    std::size_t num_scalars() const;

    std::vector<Param>& params() { return params_; }
    const std::vector<Param>& params() const { return params_; }

    void zero_grad();
    double grad_norm() const;

    std::uint64_t step = 0;

private:
    std::vector<Param> params_;
    std::map<std::string, std::size_t> by_name_;
};

class Tape;

/// Handle to a node on a tape.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Matrix& value() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    /// Scalar value of a 1 x 1 node.
    double item() const;
};

/// Reverse-mode recording of one forward computation. Nodes are appended in
/// evaluation order, so the reverse sweep is a walk down the node list.
class Tape {
public:
    using Backward = std::function<void(Tape&, std::size_t)>;

    Var constant(Matrix value);
    /// Leaf whose gradient is kept on the tape (read it with grad()).
    Var input(Matrix value);
    /// Leaf bound to a stored parameter; backward accumulates into the store.
    Var param(ParamStore& store, std::size_t index);
    Var param(ParamStore& store, const std::string& name) { return param(store, store.index(name)); }

    /// Appends a computed node. `backward` receives the tape and node id and
    /// must push gradient into the parents through accumulate().
    Var push(Matrix value, const char* op, std::vector<std::size_t> parents, Backward backward);

    const Matrix& value(std::size_t id) const { return nodes_[id].value; }
    /// Gradient of a node after backward(); zero matrix if none flowed.
    Matrix grad(std::size_t id) const;
    Matrix grad(Var v) const { return grad(v.id); }
    const Matrix* grad_ptr(std::size_t id) const;
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    const char* op(std::size_t id) const { return nodes_[id].op; }
    std::size_t size() const { return nodes_.size(); }

    void accumulate(std::size_t id, const Matrix& g);

    /// Seeds d(loss)/d(loss) = 1 and sweeps in reverse. Throws NonScalarLoss.
    void backward(Var loss);

private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool has_grad = false;
        bool requires_grad = false;
        const char* op = "";
        std::vector<std::size_t> parents;
        Backward backward;
        ParamStore* store = nullptr;
        std::size_t param_index = 0;
    };
    std::vector<Node> nodes_;
};

// ---- tensor ops -----------------------------------------------------------

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product.
Var mul(Var a, Var b);
/// Adds a 1 x c row to every row of a.
Var add_row(Var a, Var row);
/// Multiplies row i of a by w(i, 0); w is n x 1.
Var mul_rowwise(Var a, Var w);
Var scale(Var a, double s);
/// Horizontal concatenation; all parts share the row count.
Var concat_cols(const std::vector<Var>& parts);
/// Vertical concatenation; all parts share the column count.
Var concat_rows(const std::vector<Var>& parts);
Var silu(Var a);
Var sigmoid(Var a);
/// Column sums as a 1 x c row.
Var sum_rows(Var a);
/// Sum of all entries as 1 x 1.
Var sum_all(Var a);
/// Mean of all entries as 1 x 1.
Var mean_all(Var a);
/// out.row(i) = a.row(index[i]). Throws IndexOutOfRange.
Var gather_rows(Var a, std::vector<Eigen::Index> index);
/// out.row(index[i]) += a.row(i), out has `rows` rows. Throws IndexOutOfRange.
Var scatter_add_rows(Var a, std::vector<Eigen::Index> index, Eigen::Index rows);
/// Columns [begin, begin + count).
Var slice_cols(Var a, Eigen::Index begin, Eigen::Index count);
/// Row i divided by (norm of row i + 1).
Var row_normalize_plus1(Var a);
/// Column standardization with the batch's own (biased) statistics.
Var batch_standardize(Var a, double eps);
/// (a - mean) * inv_std per column with constant statistics.
Var affine_columns(Var a, const RowVector& mean, const RowVector& inv_std);

/// Invariant components of cell pairs as a (pairs x arity) node, differentiable
/// in the point positions. `receivers[p]` and `senders[p]` are member-node lists.
Var pair_invariants(Var positions, const std::vector<std::vector<NodeId>>& receivers,
                    const std::vector<std::vector<NodeId>>& senders, const InvariantSpec& spec);

// ---- losses (scalar 1 x 1 outputs, mean over entries) ----------------------

Var mse_loss(Var pred, const Matrix& target);
Var mae_loss(Var pred, const Matrix& target);
Var huber_loss(Var pred, const Matrix& target, double delta);
/// Binary cross-entropy on logits, numerically stable form.
Var bce_with_logits(Var logits, const Matrix& target);

// ---- MLPs -------------------------------------------------------------------

struct MlpSpec {
    std::vector<Eigen::Index> widths;  ///< input width followed by each layer's output width
    bool final_activation = false;     ///< SiLU after the last layer too
};

/// Dense layers with SiLU between them. Parameters live in a ParamStore under
/// `<prefix>.w<i>` / `<prefix>.b<i>`.
struct Mlp {
    MlpSpec spec;
    std::vector<std::size_t> weights;
    std::vector<std::size_t> biases;

    Var forward(Tape& tape, ParamStore& store, Var input) const;
    Eigen::Index in_width() const { return spec.widths.front(); }
    Eigen::Index out_width() const { return spec.widths.back(); }
};

/// Glorot-uniform weights, zero biases. Throws InvalidArgument for an empty or
/// non-positive width list.
Mlp make_mlp(ParamStore& store, const std::string& prefix, MlpSpec spec, std::mt19937_64& rng);

// ---- optimization -----------------------------------------------------------

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

/// Adam with decoupled weight decay; increments store.step.
void adam_step(ParamStore& store, const AdamConfig& config);
double cosine_lr(std::uint64_t step, std::uint64_t total_steps, double base_lr);
/// Scales all gradients by min(1, max_norm / global norm); returns the factor.
double clip_grad_norm(ParamStore& store, double max_norm);

struct GradCheckReport {
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    std::size_t coordinates = 0;
};

/// Compares backward() against central differences on up to `max_coordinates`
/// sampled parameter entries (0 = all). Per-coordinate relative error is
/// |a - n| / max(|a|, |n|, 1e-6).
GradCheckReport finite_diff_check(ParamStore& store, const std::function<Var(Tape&)>& loss, double h = 1e-5,
                                  std::size_t max_coordinates = 0, std::uint64_t seed = 0);

// ---- checkpoints ------------------------------------------------------------

/// 8-byte little-endian header length, JSON header (names, shapes, step,
/// `extra`), then raw little-endian doubles (value, m, v per tensor).
void save_checkpoint(const std::filesystem::path& path, const ParamStore& store, const nlohmann::json& extra = {});
/// Loads into a store with identical names and shapes; returns `extra`.
/// Throws ConfigMismatch on a layout difference, ParseError on a corrupt file.
nlohmann::json load_checkpoint(const std::filesystem::path& path, ParamStore& store);
/// The `extra` header of a checkpoint without touching any store.
nlohmann::json checkpoint_extra(const std::filesystem::path& path);

}  // namespace etnn::ad

#endif  // ETNN_DIFF_HPP
