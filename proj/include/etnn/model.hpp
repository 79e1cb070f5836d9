#ifndef ETNN_MODEL_HPP
#define ETNN_MODEL_HPP

#include "etnn/complex.hpp"
#include "etnn/diff.hpp"
#include "etnn/invariants.hpp"
#include "etnn/neighborhoods.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace etnn {

enum class Mode { invariant, equivariant, equivariant_velocity };
enum class ReadoutLevel { complex, node };
enum class CPolicy { reciprocal_count, constant };

/// How messages are combined. `gated_concat`: sigmoid-gated sum within a
/// neighborhood, fixed-order concatenation across neighborhoods. `sum`: plain
/// sums at both levels.
enum class Aggregation { gated_concat, sum };

/// Bit flags selecting the input features of a rank.
enum FeatureSource : unsigned {
    own_features = 1u,
    node_mean_features = 2u,
    membership_features = 4u,
};

std::string_view to_string(Mode mode) noexcept;
Mode parse_mode(std::string_view text);
unsigned parse_feature_source(std::string_view text);
std::string feature_source_string(unsigned flags);

struct EtnnConfig {
    int hidden = 32;
    int num_layers = 2;
    int out_dim = 1;
    std::vector<NeighborhoodSpec> neighborhoods;
    InvariantSpec invariants;
    Mode mode = Mode::invariant;
    ReadoutLevel readout = ReadoutLevel::complex;
    unsigned default_features = own_features;
    std::map<Rank, unsigned> feature_source;  ///< overrides per rank
    std::vector<std::string> membership_tags;  ///< vocabulary of membership vectors
    bool position_diff_normalize = false;
    CPolicy c_policy = CPolicy::reciprocal_count;
    double c_constant = 1.0;
    bool exclude_virtual = true;
    Aggregation aggregation = Aggregation::gated_concat;
    bool share_message = false;    ///< one message MLP per layer for every neighborhood
    bool share_update = false;     ///< one update MLP per layer for every rank
    bool share_embedding = false;  ///< one embedder for every rank (inputs zero-padded)
    std::uint64_t seed = 0;

    unsigned features_for(Rank r) const;

    /// Settings under which the model is an EGNN on the augmented Hasse graph:
    /// shared message/update/embedding, plain sums, mean-centroid distance.
    static EtnnConfig homogeneous(int hidden, int num_layers, std::vector<NeighborhoodSpec> neighborhoods);
};

nlohmann::json to_json(const EtnnConfig& c);
EtnnConfig config_from_json(const nlohmann::json& j);

/// Message key: neighborhood label with receiver and sender ranks.
struct MessageKey {
    std::string label;
    Rank receiver = 0;
    Rank sender = 0;

    std::string name() const;
    auto operator<=>(const MessageKey&) const = default;
};

/// Shapes shared by every complex a model sees.
struct ModelSchema {
    std::vector<Rank> ranks;
    std::map<Rank, Eigen::Index> own_width;
    Eigen::Index node_width = 0;
    std::vector<MessageKey> keys;
    std::size_t arity = 0;

    Eigen::Index input_width(const EtnnConfig& c, Rank r) const;
};

nlohmann::json to_json(const ModelSchema& s);
ModelSchema schema_from_json(const nlohmann::json& j);

struct Sample {
    const CombinatorialComplex* complex = nullptr;
    const NeighborhoodCollection* collection = nullptr;
};

/// Collects ranks, feature widths and message keys over all samples.
ModelSchema infer_schema(const EtnnConfig& config, const std::vector<Sample>& samples);

struct EtnnModel {
    EtnnConfig config;
    ModelSchema schema;
    ad::ParamStore store;
    std::map<Rank, ad::Mlp> embed;
    struct Layer {
        std::map<MessageKey, ad::Mlp> message;
        std::map<MessageKey, ad::Mlp> gate;
        std::map<Rank, ad::Mlp> update;
        std::optional<ad::Mlp> position;
        std::optional<ad::Mlp> velocity;
    };
    std::vector<Layer> layers;
    std::map<Rank, ad::Mlp> pre_pool;
    ad::Mlp post_pool;
    std::vector<RunningNormalizer> normalizers;  ///< one per layer

    bool velocity_mode() const { return config.mode == Mode::equivariant_velocity; }
    bool updates_positions() const { return config.mode != Mode::invariant; }
};

/// Allocates every MLP; deterministic in config.seed. Throws ConfigMismatch.
EtnnModel init_model(const EtnnConfig& config, const ModelSchema& schema);

/// Per-complex precomputation: active cells, input features, pair indices,
/// and (in invariant mode) the invariants.
struct Prepared {
    const CombinatorialComplex* complex = nullptr;
    std::map<Rank, std::vector<CellId>> cells;  ///< active cells per rank, ascending
    std::vector<Eigen::Index> row_of;            ///< cell id -> row within its rank (-1 inactive)
    std::map<Rank, Matrix> inputs;
    struct KeyPairs {
        std::vector<Eigen::Index> receiver_rows;
        std::vector<Eigen::Index> sender_rows;
        std::vector<std::vector<NodeId>> receiver_nodes;
        std::vector<std::vector<NodeId>> sender_nodes;
        Matrix invariants;  ///< invariant mode only
    };
    std::vector<KeyPairs> keys;  ///< aligned with schema.keys
    Matrix c_weights;            ///< num_nodes x 1, position-update constants
    std::vector<bool> virtual_cell;
};

Prepared prepare(const EtnnModel& model, const CombinatorialComplex& cc, const NeighborhoodCollection& collection);

struct LayerState {
    std::map<Rank, ad::Var> hidden;
    ad::Var positions;
    std::optional<ad::Var> velocities;
};

struct MessageResult {
    std::map<Rank, ad::Var> hidden;
    std::vector<std::optional<ad::Var>> messages;  ///< ungated messages per key (nullopt: no pairs)
};

/// Invariant rows per key for the given layer (normalized if requested).
std::vector<ad::Var> layer_invariants(ad::Tape& tape, EtnnModel& model, const Prepared& p, int layer,
                                      ad::Var positions, bool training);

MessageResult message_pass(ad::Tape& tape, EtnnModel& model, const Prepared& p, int layer, const LayerState& state,
                           const std::vector<ad::Var>& invariants);

/// Node displacement C * sum over singleton pairs of (x_z - x_t) * xi(m).
/// Throws ModeMismatch in invariant mode.
ad::Var position_delta(ad::Tape& tape, EtnnModel& model, const Prepared& p, int layer, ad::Var positions,
                       const std::vector<std::optional<ad::Var>>& messages);
ad::Var position_update(ad::Tape& tape, EtnnModel& model, const Prepared& p, int layer, ad::Var positions,
                        const std::vector<std::optional<ad::Var>>& messages);
/// Returns (velocities, positions) after the velocity-gated step.
std::pair<ad::Var, ad::Var> velocity_update(ad::Tape& tape, EtnnModel& model, const Prepared& p, int layer,
                                            const LayerState& state,
                                            const std::vector<std::optional<ad::Var>>& messages);

/// Complex level: 1 x out_dim. Node level: num_nodes x out_dim (rank-0 rows).
ad::Var readout(ad::Tape& tape, EtnnModel& model, const Prepared& p, const std::map<Rank, ad::Var>& hidden,
                ReadoutLevel level);

struct ForwardOutput {
    ad::Var prediction;
    ad::Var positions;
    std::optional<ad::Var> velocities;
    std::map<Rank, ad::Var> hidden;
};

ForwardOutput forward(ad::Tape& tape, EtnnModel& model, const Prepared& p, bool training = false);

/// Plain-value result of a forward pass.
struct Evaluation {
    Matrix prediction;
    Matrix positions;
    std::optional<Matrix> velocities;
    std::map<Rank, Matrix> hidden;
};

Evaluation evaluate_model(EtnnModel& model, const CombinatorialComplex& cc, const NeighborhoodCollection& collection);

}  // namespace etnn

#endif  // ETNN_MODEL_HPP
