#include "etnn/training.hpp"

#include "etnn/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace etnn {

LossKind parse_loss(std::string_view text) {
    if (text == "mae") return LossKind::mae;
    if (text == "mse") return LossKind::mse;
    if (text == "huber") return LossKind::huber;
    if (text == "bce") return LossKind::bce;
    throw error(errc::parse_error, "loss must be mae, mse, huber or bce");
}

Metric parse_metric(std::string_view text) {
    if (text == "mae") return Metric::mae;
    if (text == "mse") return Metric::mse;
    if (text == "rmse") return Metric::rmse;
    if (text == "r2") return Metric::r2;
    if (text == "accuracy") return Metric::accuracy;
    throw error(errc::parse_error, "metric must be mae, mse, rmse, r2 or accuracy");
}

std::string_view to_string(LossKind loss) noexcept {
    switch (loss) {
        case LossKind::mae: return "mae";
        case LossKind::mse: return "mse";
        case LossKind::huber: return "huber";
        case LossKind::bce: return "bce";
    }
    return "?";
}

std::string_view to_string(Metric metric) noexcept {
    switch (metric) {
        case Metric::mae: return "mae";
        case Metric::mse: return "mse";
        case Metric::rmse: return "rmse";
        case Metric::r2: return "r2";
        case Metric::accuracy: return "accuracy";
    }
    return "?";
}

bool higher_is_better(Metric metric) noexcept { return metric == Metric::r2 || metric == Metric::accuracy; }

Matrix TargetScaler::to_model(const Matrix& raw) const {
    if (empty()) return raw;
    return (raw.rowwise() - mean).array().rowwise() / scale.array();
}

Matrix TargetScaler::to_raw(const Matrix& model_units) const {
    if (empty()) return model_units;
    return (model_units.array().rowwise() * scale.array()).matrix().rowwise() + mean;
}

std::string History::to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "epoch,lr,train_loss,val_metric\n";
    for (const auto& e : epochs) out << e.epoch << ',' << e.lr << ',' << e.train_loss << ',' << e.val_metric << '\n';
    return out.str();
}

namespace {

bool node_level(const EtnnModel& m) { return m.config.readout == ReadoutLevel::node; }

std::vector<Eigen::Index> selected_rows(const std::vector<bool>& mask, Eigen::Index rows) {
    std::vector<Eigen::Index> out;
    for (Eigen::Index i = 0; i < rows; ++i)
        if (mask.empty() || mask.at(static_cast<std::size_t>(i))) out.push_back(i);
    return out;
}

Matrix take_rows(const Matrix& m, const std::vector<Eigen::Index>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
    return out;
}

void check_targets(const EtnnModel& model, const std::vector<DataItem>& data) {
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& d = data[i];
        const Eigen::Index rows = node_level(model) ? static_cast<Eigen::Index>(d.complex->num_nodes()) : 1;
        if (d.target.rows() != rows || d.target.cols() != model.config.out_dim)
            throw error(errc::target_mismatch, "item " + std::to_string(i) + " target is " +
                                                   std::to_string(d.target.rows()) + "x" +
                                                   std::to_string(d.target.cols()) + ", expected " +
                                                   std::to_string(rows) + "x" + std::to_string(model.config.out_dim));
    }
}

ad::Var loss_of(const TrainConfig& c, ad::Var pred, const Matrix& target) {
    switch (c.loss) {
        case LossKind::mae: return ad::mae_loss(pred, target);
        case LossKind::mse: return ad::mse_loss(pred, target);
        case LossKind::huber: return ad::huber_loss(pred, target, c.huber_delta);
        case LossKind::bce: return ad::bce_with_logits(pred, target);
    }
    throw error(errc::invalid_argument, "unknown loss");
}

}  // namespace

double metric_value(Metric metric, const Matrix& p, const Matrix& t) {
    if (p.rows() != t.rows() || p.cols() != t.cols()) throw error(errc::target_mismatch, "metric shapes differ");
    if (t.size() == 0) throw error(errc::empty_mask, "metric over zero targets");
    const double n = static_cast<double>(t.size());
    const Matrix r = p - t;
    switch (metric) {
        case Metric::mae: return r.cwiseAbs().sum() / n;
        case Metric::mse: return r.squaredNorm() / n;
        case Metric::rmse: return std::sqrt(r.squaredNorm() / n);
        case Metric::r2: {
            const double ss_res = r.squaredNorm();
            const double ss_tot = (t.array() - t.mean()).square().sum();
            if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
            return 1.0 - ss_res / ss_tot;
        }
        case Metric::accuracy: {
            double hits = 0.0;
            for (Eigen::Index i = 0; i < t.size(); ++i) hits += (p.data()[i] > 0.0) == (t.data()[i] > 0.5);
            return hits / n;
        }
    }
    return 0.0;
}

Matrix predict(EtnnModel& model, const DataItem& item, const TargetScaler& scaler) {
    const Matrix raw = evaluate_model(model, *item.complex, item.collection).prediction;
    return scaler.to_raw(raw);
}

double evaluate(EtnnModel& model, const std::vector<DataItem>& data, const std::vector<std::size_t>& items,
                Metric metric, const std::vector<bool>& node_mask, const TargetScaler& scaler) {
    std::vector<Matrix> preds, targets;
    Eigen::Index rows = 0;
    for (auto i : items) {
        const auto& d = data.at(i);
        Matrix p = predict(model, d, scaler);
        Matrix t = d.target;
        if (node_level(model)) {
            const auto sel = selected_rows(node_mask, t.rows());
            p = take_rows(p, sel);
            t = take_rows(t, sel);
        }
        rows += t.rows();
        preds.push_back(std::move(p));
        targets.push_back(std::move(t));
    }
    if (rows == 0) throw error(errc::empty_mask, "evaluation selects no targets");
    Matrix P(rows, model.config.out_dim), T(rows, model.config.out_dim);
    Eigen::Index at = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        P.middleRows(at, preds[i].rows()) = preds[i];
        T.middleRows(at, targets[i].rows()) = targets[i];
        at += preds[i].rows();
    }
    return metric_value(metric, P, T);
}

History train(EtnnModel& model, const std::vector<DataItem>& data, const TrainSplit& split, const TrainConfig& c) {
    if (data.empty() || split.train.empty()) throw error(errc::empty_dataset, "no training items");
    if (c.epochs < 0 || c.batch_size < 1) throw error(errc::invalid_argument, "epochs >= 0 and batch_size >= 1 required");
    check_targets(model, data);
    const bool nodes = node_level(model);

    std::map<std::size_t, Prepared> prepared;
    for (auto i : split.train) prepared.emplace(i, prepare(model, *data.at(i).complex, data.at(i).collection));

    History history;
    std::map<std::size_t, std::vector<Eigen::Index>> train_rows;
    for (auto i : split.train) {
        train_rows[i] = nodes ? selected_rows(split.train_nodes, data[i].target.rows()) : std::vector<Eigen::Index>{0};
        if (train_rows[i].empty()) throw error(errc::empty_mask, "training mask selects no nodes");
    }
    if (c.standardize_targets && c.loss != LossKind::bce) {
        std::vector<Matrix> rows;
        Eigen::Index total = 0;
        for (auto i : split.train) {
            rows.push_back(take_rows(data[i].target, train_rows[i]));
            total += rows.back().rows();
        }
        Matrix all(total, model.config.out_dim);
        Eigen::Index at = 0;
        for (const auto& r : rows) {
            all.middleRows(at, r.rows()) = r;
            at += r.rows();
        }
        history.scaler.mean = all.colwise().mean();
        history.scaler.scale = ((all.rowwise() - history.scaler.mean).array().square().colwise().sum() /
                                static_cast<double>(std::max<Eigen::Index>(total, 1)))
                                   .sqrt();
        for (Eigen::Index k = 0; k < history.scaler.scale.size(); ++k)
            if (!(history.scaler.scale(k) > 0.0)) history.scaler.scale(k) = 1.0;
    }
    std::map<std::size_t, Matrix> targets;
    for (auto i : split.train) targets[i] = take_rows(history.scaler.to_model(data[i].target), train_rows[i]);

    const auto& val_items = split.val.empty() ? split.train : split.val;
    const auto& val_mask = split.val.empty() && split.val_nodes.empty() ? split.train_nodes : split.val_nodes;

    const std::size_t n = split.train.size();
    const std::size_t per_epoch = (n + static_cast<std::size_t>(c.batch_size) - 1) / static_cast<std::size_t>(c.batch_size);
    const std::uint64_t total_steps = per_epoch * static_cast<std::uint64_t>(c.epochs);
    std::uint64_t local_step = 0;
    std::mt19937_64 rng(c.seed);
    std::vector<Matrix> best;
    std::vector<std::size_t> order = split.train;

    for (int epoch = 1; epoch <= c.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        const double epoch_lr = ad::cosine_lr(local_step, total_steps, c.base_lr);
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(c.batch_size)) {
            const std::size_t end = std::min(n, start + static_cast<std::size_t>(c.batch_size));
            const double inv_b = 1.0 / static_cast<double>(end - start);
            model.store.zero_grad();
            for (std::size_t b = start; b < end; ++b) {
                const std::size_t i = order[b];
                ad::Tape tape;
                auto out = forward(tape, model, prepared.at(i), true);
                ad::Var pred = out.prediction;
                if (nodes) pred = ad::gather_rows(pred, train_rows.at(i));
                ad::Var loss = loss_of(c, pred, targets.at(i));
                loss_sum += loss.item();
                tape.backward(ad::scale(loss, inv_b));
            }
            if (c.clip_norm > 0) ad::clip_grad_norm(model.store, c.clip_norm);
            ad::AdamConfig adam;
            adam.lr = ad::cosine_lr(local_step, total_steps, c.base_lr);
            adam.weight_decay = c.weight_decay;
            ad::adam_step(model.store, adam);
            ++local_step;
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = epoch_lr;
        rec.train_loss = loss_sum / static_cast<double>(n);
        rec.val_metric = evaluate(model, data, val_items, c.metric, val_mask, history.scaler);
        history.epochs.push_back(rec);
        const bool better = history.best_epoch < 0 ||
                            (higher_is_better(c.metric) ? rec.val_metric > history.best_val : rec.val_metric < history.best_val);
        if (better) {
            history.best_epoch = epoch;
            history.best_val = rec.val_metric;
            if (c.restore_best) {
                best.clear();
                for (const auto& p : model.store.params()) best.push_back(p.value);
            }
            if (c.checkpoint) save_model(*c.checkpoint, model, history.scaler, {{"epoch", epoch}});
        }
    }
    if (c.restore_best && !best.empty())
        for (std::size_t k = 0; k < best.size(); ++k) model.store[k].value = best[k];
    return history;
}

namespace {

std::vector<double> row_values(const RowVector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

RowVector row_from(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    RowVector r(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) r(static_cast<Eigen::Index>(i)) = v[i];
    return r;
}

}  // namespace

void save_model(const std::filesystem::path& path, const EtnnModel& model, const TargetScaler& scaler,
                const nlohmann::json& extra) {
    nlohmann::json j;
    j["config"] = to_json(model.config);
    j["schema"] = to_json(model.schema);
    j["scaler_mean"] = row_values(scaler.mean);
    j["scaler_scale"] = row_values(scaler.scale);
    nlohmann::json norms = nlohmann::json::array();
    for (const auto& n : model.normalizers) {
        nlohmann::json layer = nlohmann::json::array();
        for (const auto& [key, s] : n.all()) layer.push_back({key.first, key.second, s.mean, s.var});
        norms.push_back(std::move(layer));
    }
    j["normalizers"] = std::move(norms);
    j["user"] = extra;
    ad::save_checkpoint(path, model.store, j);
}

LoadedModel load_model(const std::filesystem::path& path) {
    const auto extra = ad::checkpoint_extra(path);
    LoadedModel out;
    try {
        out.model = init_model(config_from_json(extra.at("config")), schema_from_json(extra.at("schema")));
        out.scaler.mean = row_from(extra.at("scaler_mean"));
        out.scaler.scale = row_from(extra.at("scaler_scale"));
        const auto& norms = extra.at("normalizers");
        if (norms.size() != out.model.normalizers.size())
            throw error(errc::config_mismatch, "checkpoint normalizer count differs from the layer count");
        for (std::size_t l = 0; l < norms.size(); ++l)
            for (const auto& e : norms[l])
                out.model.normalizers[l].set_stats(e.at(0).get<Rank>(), e.at(1).get<std::size_t>(),
                                                   {e.at(2).get<double>(), e.at(3).get<double>()});
        out.extra = extra.value("user", nlohmann::json{});
    } catch (const nlohmann::json::exception& e) {
        throw error(errc::parse_error, path.string() + ": malformed checkpoint metadata (" + e.what() + ")");
    }
    ad::load_checkpoint(path, out.model.store);
    return out;
}

Splits make_splits(std::size_t n, double f_train, double f_val, double f_test, std::uint64_t seed,
                   const std::vector<int>& groups) {
    if (f_train < 0 || f_val < 0 || f_test < 0 || std::abs(f_train + f_val + f_test - 1.0) > 1e-9)
        throw error(errc::bad_fractions, "split fractions must be non-negative and sum to 1");
    if (!groups.empty() && groups.size() != n) throw error(errc::invalid_argument, "one group label per item required");
    const auto n_train = static_cast<std::size_t>(std::llround(f_train * static_cast<double>(n)));
    const auto n_val = std::min(n - std::min(n, n_train), static_cast<std::size_t>(std::llround(f_val * static_cast<double>(n))));
    std::mt19937_64 rng(seed);
    Splits s;
    if (groups.empty()) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t i = 0; i < n; ++i) (i < n_train ? s.train : i < n_train + n_val ? s.val : s.test).push_back(idx[i]);
    } else {
        std::map<int, std::vector<std::size_t>> members;
        for (std::size_t i = 0; i < n; ++i) members[groups[i]].push_back(i);
        std::vector<int> labels;
        for (const auto& [g, _] : members) labels.push_back(g);
        std::shuffle(labels.begin(), labels.end(), rng);
        for (int g : labels) {
            auto& m = members[g];
            auto& target = s.train.size() < n_train ? s.train : s.val.size() < n_val ? s.val : s.test;
            target.insert(target.end(), m.begin(), m.end());
        }
    }
    for (auto* v : {&s.train, &s.val, &s.test}) std::sort(v->begin(), v->end());
    return s;
}

}  // namespace etnn
