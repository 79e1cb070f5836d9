#ifndef ETNN_TRAINING_HPP
#define ETNN_TRAINING_HPP

#include "etnn/model.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace etnn {

enum class LossKind { mae, mse, huber, bce };
enum class Metric { mae, mse, rmse, r2, accuracy };

LossKind parse_loss(std::string_view text);
Metric parse_metric(std::string_view text);
std::string_view to_string(LossKind loss) noexcept;
std::string_view to_string(Metric metric) noexcept;
/// True when a larger value of the metric is better.
bool higher_is_better(Metric metric) noexcept;

struct TrainConfig {
    int epochs = 100;
    int batch_size = 8;
    double base_lr = 1e-3;
    double weight_decay = 1e-5;
    double clip_norm = 1.0;  ///< <= 0 disables clipping
    LossKind loss = LossKind::mse;
    double huber_delta = 1.0;
    Metric metric = Metric::mae;
    std::uint64_t seed = 0;
    bool standardize_targets = true;  ///< regression losses only
    bool restore_best = true;
    std::optional<std::filesystem::path> checkpoint;  ///< best-validation checkpoint file
};

/// One training example. Complex-level targets are 1 x out_dim; node-level
/// targets are num_nodes x out_dim.
struct DataItem {
    const CombinatorialComplex* complex = nullptr;
    NeighborhoodCollection collection;
    Matrix target;
};

/// Item indices for complex-level tasks; node masks for node-level tasks
/// (an empty mask selects every node).
struct TrainSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<bool> train_nodes;
    std::vector<bool> val_nodes;
};

/// Per-column affine map between raw and standardized targets.
struct TargetScaler {
    RowVector mean;
    RowVector scale;

    Matrix to_model(const Matrix& raw) const;
    Matrix to_raw(const Matrix& model_units) const;
    bool empty() const { return mean.size() == 0; }
};

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_metric = 0.0;
};

struct History {
    std::vector<EpochRecord> epochs;
    int best_epoch = -1;
    double best_val = 0.0;
    TargetScaler scaler;

    std::string to_csv() const;
};

/// Seeded shuffled mini-batches, mean batch loss, clipping, Adam with cosine
/// learning rate. Throws EmptyDataset, TargetMismatch.
History train(EtnnModel& model, const std::vector<DataItem>& data, const TrainSplit& split, const TrainConfig& config);

/// Predictions in raw target units.
Matrix predict(EtnnModel& model, const DataItem& item, const TargetScaler& scaler = {});

/// Metric over the listed items (node masks applied for node-level readout).
/// Throws EmptyMask when nothing is selected.
double evaluate(EtnnModel& model, const std::vector<DataItem>& data, const std::vector<std::size_t>& items,
                Metric metric, const std::vector<bool>& node_mask = {}, const TargetScaler& scaler = {});

/// Metric of predictions against targets (row-aligned).
double metric_value(Metric metric, const Matrix& prediction, const Matrix& target);

/// Checkpoint holding parameters, Adam state, config, schema, normalizer
/// statistics and the target scaler.
void save_model(const std::filesystem::path& path, const EtnnModel& model, const TargetScaler& scaler,
                const nlohmann::json& extra = {});

struct LoadedModel {
    EtnnModel model;
    TargetScaler scaler;
    nlohmann::json extra;
};

/// Throws ParseError on a corrupt file, ConfigMismatch on a layout mismatch.
LoadedModel load_model(const std::filesystem::path& path);

struct Splits {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

/// Random disjoint split of [0, n). With `groups`, whole groups are assigned
/// together. Throws BadFractions.
Splits make_splits(std::size_t n, double train_fraction, double val_fraction, double test_fraction,
                   std::uint64_t seed, const std::vector<int>& groups = {});

}  // namespace etnn

#endif  // ETNN_TRAINING_HPP
