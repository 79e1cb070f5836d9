#include "etnn/model.hpp"

#include "etnn/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace etnn {

using ad::Tape;
using ad::Var;

std::string_view to_string(Mode mode) noexcept {
    switch (mode) {
        case Mode::invariant: return "invariant";
        case Mode::equivariant: return "equivariant";
        case Mode::equivariant_velocity: return "equivariant_velocity";
    }
    return "?";
}

Mode parse_mode(std::string_view text) {
    if (text == "invariant") return Mode::invariant;
    if (text == "equivariant") return Mode::equivariant;
    if (text == "equivariant_velocity" || text == "velocity") return Mode::equivariant_velocity;
    throw error(errc::parse_error, "mode must be invariant, equivariant or equivariant_velocity");
}

unsigned parse_feature_source(std::string_view text) {
    if (text == "none") return 0;
    unsigned flags = 0;
    while (!text.empty()) {
        const auto plus = text.find('+');
        const auto part = text.substr(0, plus);
        if (part == "own") flags |= own_features;
        else if (part == "node_mean") flags |= node_mean_features;
        else if (part == "membership" || part == "membership_tags") flags |= membership_features;
        else throw error(errc::parse_error, "unknown feature source '" + std::string(part) + "'");
        text = plus == std::string_view::npos ? std::string_view{} : text.substr(plus + 1);
    }
    return flags;
}

std::string feature_source_string(unsigned flags) {
    std::string out;
    auto add = [&](const char* s) { out += (out.empty() ? "" : "+") + std::string(s); };
    if (flags & own_features) add("own");
    if (flags & node_mean_features) add("node_mean");
    if (flags & membership_features) add("membership");
    return out.empty() ? "none" : out;
}

unsigned EtnnConfig::features_for(Rank r) const {
    auto it = feature_source.find(r);
    return it == feature_source.end() ? default_features : it->second;
}

EtnnConfig EtnnConfig::homogeneous(int hidden, int num_layers, std::vector<NeighborhoodSpec> neighborhoods) {
    EtnnConfig c;
    c.hidden = hidden;
    c.num_layers = num_layers;
    c.neighborhoods = std::move(neighborhoods);
    c.invariants = parse_invariants("centroid:mean");
    c.mode = Mode::equivariant;
    c.aggregation = Aggregation::sum;
    c.share_message = c.share_update = c.share_embedding = true;
    return c;
}

nlohmann::json to_json(const EtnnConfig& c) {
    nlohmann::json j;
    j["hidden"] = c.hidden;
    j["num_layers"] = c.num_layers;
    j["out_dim"] = c.out_dim;
    std::vector<std::string> nbhd;
    for (const auto& n : c.neighborhoods) nbhd.push_back(n.to_string());
    j["neighborhoods"] = nbhd;
    j["invariants"] = c.invariants.to_string();
    j["mode"] = std::string(to_string(c.mode));
    j["readout"] = c.readout == ReadoutLevel::complex ? "complex" : "node";
    j["features"] = feature_source_string(c.default_features);
    nlohmann::json per_rank = nlohmann::json::object();
    for (const auto& [r, f] : c.feature_source) per_rank[std::to_string(r)] = feature_source_string(f);
    j["features_per_rank"] = per_rank;
    j["membership_tags"] = c.membership_tags;
    j["position_diff_normalize"] = c.position_diff_normalize;
    j["c_policy"] = c.c_policy == CPolicy::reciprocal_count ? "reciprocal_count" : "constant";
    j["c_constant"] = c.c_constant;
    j["exclude_virtual"] = c.exclude_virtual;
    j["aggregation"] = c.aggregation == Aggregation::sum ? "sum" : "gated_concat";
    j["share_message"] = c.share_message;
    j["share_update"] = c.share_update;
    j["share_embedding"] = c.share_embedding;
    j["seed"] = c.seed;
    return j;
}

EtnnConfig config_from_json(const nlohmann::json& j) {
    EtnnConfig c;
    c.hidden = j.at("hidden");
    c.num_layers = j.at("num_layers");
    c.out_dim = j.at("out_dim");
    for (const auto& s : j.at("neighborhoods")) c.neighborhoods.push_back(parse_neighborhood(s.get<std::string>()));
    c.invariants = parse_invariants(j.at("invariants").get<std::string>());
    c.mode = parse_mode(j.at("mode").get<std::string>());
    c.readout = j.at("readout") == "node" ? ReadoutLevel::node : ReadoutLevel::complex;
    c.default_features = parse_feature_source(j.at("features").get<std::string>());
    for (const auto& [k, v] : j.at("features_per_rank").items())
        c.feature_source[std::stoi(k)] = parse_feature_source(v.get<std::string>());
    c.membership_tags = j.at("membership_tags").get<std::vector<std::string>>();
    c.position_diff_normalize = j.at("position_diff_normalize");
    c.c_policy = j.at("c_policy") == "constant" ? CPolicy::constant : CPolicy::reciprocal_count;
    c.c_constant = j.at("c_constant");
    c.exclude_virtual = j.at("exclude_virtual");
    c.aggregation = j.at("aggregation") == "sum" ? Aggregation::sum : Aggregation::gated_concat;
    c.share_message = j.at("share_message");
    c.share_update = j.at("share_update");
    c.share_embedding = j.at("share_embedding");
    c.seed = j.at("seed");
    return c;
}

std::string MessageKey::name() const {
    return label + "." + std::to_string(receiver) + "." + std::to_string(sender);
}

Eigen::Index ModelSchema::input_width(const EtnnConfig& c, Rank r) const {
    auto width_of = [&](Rank rank) {
        const unsigned f = c.features_for(rank);
        Eigen::Index w = 0;
        if (f & own_features) {
            auto it = own_width.find(rank);
            w += it == own_width.end() ? 0 : it->second;
        }
        if (f & node_mean_features) w += node_width;
        if (f & membership_features) w += static_cast<Eigen::Index>(c.membership_tags.size());
        return w;
    };
    if (!c.share_embedding) return width_of(r);
    Eigen::Index w = 0;
    for (Rank rank : ranks) w = std::max(w, width_of(rank));
    return w;
}

nlohmann::json to_json(const ModelSchema& s) {
    nlohmann::json j;
    j["ranks"] = s.ranks;
    nlohmann::json own = nlohmann::json::object();
    for (const auto& [r, w] : s.own_width) own[std::to_string(r)] = w;
    j["own_width"] = own;
    j["node_width"] = s.node_width;
    j["arity"] = s.arity;
    j["keys"] = nlohmann::json::array();
    for (const auto& k : s.keys) j["keys"].push_back({{"label", k.label}, {"receiver", k.receiver}, {"sender", k.sender}});
    return j;
}

ModelSchema schema_from_json(const nlohmann::json& j) {
    ModelSchema s;
    s.ranks = j.at("ranks").get<std::vector<Rank>>();
    for (const auto& [k, v] : j.at("own_width").items()) s.own_width[std::stoi(k)] = v.get<Eigen::Index>();
    s.node_width = j.at("node_width");
    s.arity = j.at("arity");
    for (const auto& k : j.at("keys")) s.keys.push_back(MessageKey{k.at("label"), k.at("receiver"), k.at("sender")});
    return s;
}

namespace {

bool is_excluded(const EtnnConfig& c, const Cell& cell) { return c.exclude_virtual && cell.has_tag("virtual"); }

}  // namespace

ModelSchema infer_schema(const EtnnConfig& config, const std::vector<Sample>& samples) {
    if (samples.empty()) throw error(errc::empty_dataset, "schema inference needs at least one complex");
    ModelSchema s;
    std::set<Rank> ranks;
    std::set<MessageKey> keys;
    for (const auto& sample : samples) {
        const auto& cc = *sample.complex;
        for (const auto& cell : cc.cells()) {
            if (is_excluded(config, cell)) continue;
            ranks.insert(cell.rank);
            auto& w = s.own_width[cell.rank];
            w = std::max(w, static_cast<Eigen::Index>(cell.features.size()));
        }
    }
    for (const auto& sample : samples)
        for (const auto& e : sample.collection->entries)
            if (ranks.count(e.receiver_rank) && ranks.count(e.sender_rank))
                keys.insert(MessageKey{e.label, e.receiver_rank, e.sender_rank});
    s.ranks.assign(ranks.begin(), ranks.end());
    s.keys.assign(keys.begin(), keys.end());
    s.node_width = s.own_width.count(0) ? s.own_width[0] : 0;
    s.arity = config.invariants.arity();
    return s;
}

EtnnModel init_model(const EtnnConfig& config, const ModelSchema& schema) {
    if (config.hidden <= 0) throw error(errc::config_mismatch, "hidden width must be positive");
    if (config.num_layers < 1) throw error(errc::config_mismatch, "num_layers must be >= 1");
    if (config.out_dim < 1) throw error(errc::config_mismatch, "out_dim must be >= 1");
    if (schema.arity != config.invariants.arity())
        throw error(errc::config_mismatch, "schema invariant arity differs from the invariant spec");
    if (schema.ranks.empty() || schema.ranks.front() != 0)
        throw error(errc::config_mismatch, "schema must contain rank 0");
    if (config.c_policy == CPolicy::constant && !(config.c_constant == config.c_constant))
        throw error(errc::config_mismatch, "invalid constant C");

    EtnnModel m;
    m.config = config;
    m.schema = schema;
    std::mt19937_64 rng(config.seed);
    const Eigen::Index h = config.hidden;
    const auto arity = static_cast<Eigen::Index>(schema.arity);

    if (config.share_embedding) {
        m.embed[-1] = ad::make_mlp(m.store, "embed", {{schema.input_width(config, 0), h}}, rng);
    } else {
        for (Rank r : schema.ranks)
            m.embed[r] = ad::make_mlp(m.store, "embed.r" + std::to_string(r), {{schema.input_width(config, r), h}}, rng);
    }
    std::map<Rank, Eigen::Index> fan_in;
    for (Rank r : schema.ranks) {
        Eigen::Index k = 0;
        for (const auto& key : schema.keys) k += key.receiver == r;
        fan_in[r] = config.aggregation == Aggregation::sum ? 2 * h : h + k * h;
    }
    for (int l = 0; l < config.num_layers; ++l) {
        const std::string p = "l" + std::to_string(l);
        EtnnModel::Layer layer;
        if (config.share_message) {
            auto mlp = ad::make_mlp(m.store, p + ".message", {{2 * h + arity, h, h}, true}, rng);
            for (const auto& key : schema.keys) layer.message[key] = mlp;
            if (config.aggregation == Aggregation::gated_concat) {
                auto gate = ad::make_mlp(m.store, p + ".gate", {{h, 1}}, rng);
                for (const auto& key : schema.keys) layer.gate[key] = gate;
            }
        } else {
            for (const auto& key : schema.keys) {
                layer.message[key] = ad::make_mlp(m.store, p + ".message." + key.name(), {{2 * h + arity, h, h}, true}, rng);
                if (config.aggregation == Aggregation::gated_concat)
                    layer.gate[key] = ad::make_mlp(m.store, p + ".gate." + key.name(), {{h, 1}}, rng);
            }
        }
        if (config.share_update) {
            auto mlp = ad::make_mlp(m.store, p + ".update", {{fan_in[0], h, h}}, rng);
            for (Rank r : schema.ranks) {
                if (fan_in[r] != fan_in[0])
                    throw error(errc::config_mismatch, "a shared update needs equal message arity at every rank");
                layer.update[r] = mlp;
            }
        } else {
            for (Rank r : schema.ranks)
                layer.update[r] = ad::make_mlp(m.store, p + ".update.r" + std::to_string(r), {{fan_in[r], h, h}}, rng);
        }
        if (m.updates_positions()) layer.position = ad::make_mlp(m.store, p + ".position", {{h, h, 1}}, rng);
        if (m.velocity_mode()) layer.velocity = ad::make_mlp(m.store, p + ".velocity", {{h, h, 1}}, rng);
        m.layers.push_back(std::move(layer));
    }
    for (Rank r : schema.ranks) {
        if (config.readout == ReadoutLevel::node && r != 0) continue;
        m.pre_pool[r] = ad::make_mlp(m.store, "readout.pre.r" + std::to_string(r), {{h, h, h}}, rng);
    }
    const Eigen::Index post_in =
        config.readout == ReadoutLevel::complex ? h * static_cast<Eigen::Index>(schema.ranks.size()) : h;
    m.post_pool = ad::make_mlp(m.store, "readout.post", {{post_in, h, config.out_dim}}, rng);
    m.normalizers.assign(static_cast<std::size_t>(config.num_layers), RunningNormalizer{});
    return m;
}

Prepared prepare(const EtnnModel& model, const CombinatorialComplex& cc, const NeighborhoodCollection& collection) {
    const auto& config = model.config;
    const auto& schema = model.schema;
    if (model.velocity_mode() && !cc.velocities())
        throw error(errc::config_mismatch, "velocity mode needs velocities on the complex");
    Prepared p;
    p.complex = &cc;
    p.row_of.assign(cc.num_cells(), -1);
    p.virtual_cell.assign(cc.num_cells(), false);
    const std::set<Rank> ranks(schema.ranks.begin(), schema.ranks.end());
    for (Rank r : schema.ranks) p.cells[r];
    for (CellId id = 0; id < cc.num_cells(); ++id) {
        const Cell& c = cc.cell(id);
        if (is_excluded(config, c)) {
            p.virtual_cell[id] = true;
            continue;
        }
        if (!ranks.count(c.rank))
            throw error(errc::config_mismatch, "rank " + std::to_string(c.rank) + " is not in the model schema");
        auto& list = p.cells[c.rank];
        p.row_of[id] = static_cast<Eigen::Index>(list.size());
        list.push_back(id);
    }

    // Input features.
    const Eigen::Index width_all = config.share_embedding ? schema.input_width(config, 0) : 0;
    for (Rank r : schema.ranks) {
        const unsigned f = config.features_for(r);
        const Eigen::Index width = config.share_embedding ? width_all : schema.input_width(config, r);
        const auto& list = p.cells[r];
        Matrix in = Matrix::Zero(static_cast<Eigen::Index>(list.size()), width);
        for (std::size_t i = 0; i < list.size(); ++i) {
            const Cell& c = cc.cell(list[i]);
            const auto row = static_cast<Eigen::Index>(i);
            Eigen::Index at = 0;
            if (f & own_features) {
                const Eigen::Index w = schema.own_width.count(r) ? schema.own_width.at(r) : 0;
                if (static_cast<Eigen::Index>(c.features.size()) > w)
                    throw error(errc::config_mismatch, "cell features wider than the schema at rank " + std::to_string(r));
                for (std::size_t k = 0; k < c.features.size(); ++k) in(row, at + static_cast<Eigen::Index>(k)) = c.features[k];
                at += w;
            }
            if (f & node_mean_features) {
                for (NodeId n : c.nodes) {
                    const auto& nf = cc.cell(cc.node_cell(n)).features;
                    if (static_cast<Eigen::Index>(nf.size()) > schema.node_width)
                        throw error(errc::config_mismatch, "node features wider than the schema");
                    for (std::size_t k = 0; k < nf.size(); ++k)
                        in(row, at + static_cast<Eigen::Index>(k)) += nf[k] / static_cast<double>(c.nodes.size());
                }
                at += schema.node_width;
            }
            if (f & membership_features) {
                for (std::size_t t = 0; t < config.membership_tags.size(); ++t)
                    in(row, at + static_cast<Eigen::Index>(t)) = c.has_tag(config.membership_tags[t]) ? 1.0 : 0.0;
            }
        }
        p.inputs[r] = std::move(in);
    }

    // Pairs per message key.
    p.keys.assign(schema.keys.size(), {});
    const bool hull_live = model.updates_positions() && config.invariants.uses_hull();
    for (const auto& e : collection.entries) {
        const MessageKey key{e.label, e.receiver_rank, e.sender_rank};
        auto it = std::lower_bound(schema.keys.begin(), schema.keys.end(), key);
        if (it == schema.keys.end() || !(*it == key)) {
            for (const auto& [x, y] : e.pairs)
                if (!p.virtual_cell.at(x) && !p.virtual_cell.at(y))
                    throw error(errc::config_mismatch, "neighborhood key " + key.name() + " is not in the model schema");
            continue;
        }
        auto& kp = p.keys[static_cast<std::size_t>(it - schema.keys.begin())];
        for (const auto& [x, y] : e.pairs) {
            if (p.virtual_cell.at(x) || p.virtual_cell.at(y)) continue;
            kp.receiver_rows.push_back(p.row_of[x]);
            kp.sender_rows.push_back(p.row_of[y]);
            kp.receiver_nodes.push_back(cc.cell(x).nodes);
            kp.sender_nodes.push_back(cc.cell(y).nodes);
            if (hull_live && (cc.cell(x).nodes.size() > 16 || cc.cell(y).nodes.size() > 16))
                throw error(errc::config_mismatch, "hull invariants in equivariant mode are limited to cells of <= 16 nodes");
        }
    }
    if (config.mode == Mode::invariant) {
        const auto arity = static_cast<Eigen::Index>(config.invariants.arity());
        for (auto& kp : p.keys) {
            kp.invariants.resize(static_cast<Eigen::Index>(kp.receiver_nodes.size()), arity);
            for (std::size_t i = 0; i < kp.receiver_nodes.size(); ++i) {
                const Matrix x = cell_points(cc.positions(), kp.receiver_nodes[i]);
                const Matrix y = cell_points(cc.positions(), kp.sender_nodes[i]);
                for (Eigen::Index c = 0; c < arity; ++c)
                    kp.invariants(static_cast<Eigen::Index>(i), c) =
                        evaluate(config.invariants.components[static_cast<std::size_t>(c)], x, y).value;
            }
        }
    }

    // Position-update constants from singleton-to-singleton pairs.
    p.c_weights = Matrix::Zero(static_cast<Eigen::Index>(cc.num_nodes()), 1);
    for (std::size_t k = 0; k < schema.keys.size(); ++k) {
        if (schema.keys[k].receiver != 0 || schema.keys[k].sender != 0) continue;
        for (const auto& nodes : p.keys[k].receiver_nodes) p.c_weights(nodes[0], 0) += 1.0;
    }
    for (Eigen::Index i = 0; i < p.c_weights.rows(); ++i) {
        const double count = p.c_weights(i, 0);
        if (count == 0.0) continue;
        p.c_weights(i, 0) = config.c_policy == CPolicy::reciprocal_count ? 1.0 / count : config.c_constant;
    }
    return p;
}

namespace {

std::vector<Eigen::Index> node_rows(const Prepared& p) {
    const auto& cc = *p.complex;
    std::vector<Eigen::Index> rows(cc.num_nodes());
    for (NodeId n = 0; n < cc.num_nodes(); ++n) {
        rows[n] = p.row_of[cc.node_cell(n)];
        if (rows[n] < 0) throw error(errc::config_mismatch, "node " + std::to_string(n) + " is excluded from messaging");
    }
    return rows;
}

std::vector<Eigen::Index> first_nodes(const std::vector<std::vector<NodeId>>& lists) {
    std::vector<Eigen::Index> out;
    out.reserve(lists.size());
    for (const auto& l : lists) out.push_back(l[0]);
    return out;
}

const ad::Mlp& embedder(const EtnnModel& m, Rank r) {
    return m.config.share_embedding ? m.embed.at(-1) : m.embed.at(r);
}

}  // namespace

std::vector<Var> layer_invariants(Tape& tape, EtnnModel& model, const Prepared& p, int layer, Var positions,
                                  bool training) {
    const auto& spec = model.config.invariants;
    const auto arity = static_cast<Eigen::Index>(spec.arity());
    std::vector<Var> out;
    out.reserve(p.keys.size());
    for (const auto& kp : p.keys) {
        const auto rows = static_cast<Eigen::Index>(kp.receiver_nodes.size());
        if (model.config.mode == Mode::invariant) out.push_back(tape.constant(kp.invariants));
        else if (rows == 0 || arity == 0) out.push_back(tape.constant(Matrix::Zero(rows, arity)));
        else out.push_back(ad::pair_invariants(positions, kp.receiver_nodes, kp.sender_nodes, spec));
    }
    if (!spec.normalize || arity == 0) return out;

    auto& norm = model.normalizers.at(static_cast<std::size_t>(layer));
    for (Rank r : model.schema.ranks) {
        std::vector<std::size_t> members;
        std::vector<Var> parts;
        for (std::size_t k = 0; k < p.keys.size(); ++k)
            if (model.schema.keys[k].receiver == r && out[k].rows() > 0) {
                members.push_back(k);
                parts.push_back(out[k]);
            }
        if (parts.empty()) continue;
        Var stacked = ad::concat_rows(parts);
        Var normalized;
        if (training) {
            norm.train(r, stacked.value());
            normalized = ad::batch_standardize(stacked, norm.eps());
        } else {
            RowVector mean(arity), inv_std(arity);
            for (Eigen::Index c = 0; c < arity; ++c) {
                const auto s = norm.stats(r, static_cast<std::size_t>(c));
                mean(c) = s.mean;
                inv_std(c) = 1.0 / std::sqrt(s.var + norm.eps());
            }
            normalized = ad::affine_columns(stacked, mean, inv_std);
        }
        Eigen::Index at = 0;
        for (std::size_t i = 0; i < members.size(); ++i) {
            const Eigen::Index n = parts[i].rows();
            std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
            for (Eigen::Index j = 0; j < n; ++j) idx[static_cast<std::size_t>(j)] = at + j;
            out[members[i]] = ad::gather_rows(normalized, std::move(idx));
            at += n;
        }
    }
    return out;
}

MessageResult message_pass(Tape& tape, EtnnModel& model, const Prepared& p, int layer, const LayerState& state,
                           const std::vector<Var>& invariants) {
    const auto& config = model.config;
    const auto& schema = model.schema;
    const auto& L = model.layers.at(static_cast<std::size_t>(layer));
    const Eigen::Index h = config.hidden;
    MessageResult out;
    out.messages.assign(schema.keys.size(), std::nullopt);
    std::vector<std::optional<Var>> aggregated(schema.keys.size());
    for (std::size_t k = 0; k < schema.keys.size(); ++k) {
        const auto& key = schema.keys[k];
        const auto& kp = p.keys[k];
        if (kp.receiver_rows.empty()) continue;
        Var hx = ad::gather_rows(state.hidden.at(key.receiver), kp.receiver_rows);
        Var hy = ad::gather_rows(state.hidden.at(key.sender), kp.sender_rows);
        std::vector<Var> parts{hx, hy};
        if (invariants[k].cols() > 0) parts.push_back(invariants[k]);
        Var m = L.message.at(key).forward(tape, model.store, ad::concat_cols(parts));
        out.messages[k] = m;
        Var weighted = m;
        if (config.aggregation == Aggregation::gated_concat)
            weighted = ad::mul_rowwise(m, ad::sigmoid(L.gate.at(key).forward(tape, model.store, m)));
        aggregated[k] = ad::scatter_add_rows(weighted, kp.receiver_rows, state.hidden.at(key.receiver).rows());
    }
    for (Rank r : schema.ranks) {
        Var hr = state.hidden.at(r);
        const Eigen::Index n = hr.rows();
        std::vector<Var> parts{hr};
        if (config.aggregation == Aggregation::sum) {
            std::optional<Var> total;
            for (std::size_t k = 0; k < schema.keys.size(); ++k)
                if (schema.keys[k].receiver == r && aggregated[k]) total = total ? ad::add(*total, *aggregated[k]) : *aggregated[k];
            parts.push_back(total ? *total : tape.constant(Matrix::Zero(n, h)));
        } else {
            for (std::size_t k = 0; k < schema.keys.size(); ++k)
                if (schema.keys[k].receiver == r)
                    parts.push_back(aggregated[k] ? *aggregated[k] : tape.constant(Matrix::Zero(n, h)));
        }
        Var update = L.update.at(r).forward(tape, model.store, ad::concat_cols(parts));
        out.hidden[r] = ad::add(hr, update);
    }
    return out;
}

Var position_delta(Tape& tape, EtnnModel& model, const Prepared& p, int layer, Var positions,
                   const std::vector<std::optional<Var>>& messages) {
    if (!model.updates_positions()) throw error(errc::mode_mismatch, "position update in invariant mode");
    const auto& L = model.layers.at(static_cast<std::size_t>(layer));
    const auto n = positions.rows();
    std::optional<Var> total;
    for (std::size_t k = 0; k < model.schema.keys.size(); ++k) {
        const auto& key = model.schema.keys[k];
        if (key.receiver != 0 || key.sender != 0 || !messages[k]) continue;
        const auto recv = first_nodes(p.keys[k].receiver_nodes);
        const auto send = first_nodes(p.keys[k].sender_nodes);
        Var diff = ad::sub(ad::gather_rows(positions, recv), ad::gather_rows(positions, send));
        if (model.config.position_diff_normalize) diff = ad::row_normalize_plus1(diff);
        Var weight = L.position->forward(tape, model.store, *messages[k]);
        Var s = ad::scatter_add_rows(ad::mul_rowwise(diff, weight), recv, n);
        total = total ? ad::add(*total, s) : s;
    }
    if (!total) return tape.constant(Matrix::Zero(n, positions.cols()));
    return ad::mul_rowwise(*total, tape.constant(p.c_weights));
}

Var position_update(Tape& tape, EtnnModel& model, const Prepared& p, int layer, Var positions,
                    const std::vector<std::optional<Var>>& messages) {
    return ad::add(positions, position_delta(tape, model, p, layer, positions, messages));
}

std::pair<Var, Var> velocity_update(Tape& tape, EtnnModel& model, const Prepared& p, int layer, const LayerState& state,
                                    const std::vector<std::optional<Var>>& messages) {
    if (!model.velocity_mode() || !state.velocities) throw error(errc::mode_mismatch, "velocity update needs velocity mode");
    const auto& L = model.layers.at(static_cast<std::size_t>(layer));
    Var h0 = ad::gather_rows(state.hidden.at(0), node_rows(p));
    Var gate = L.velocity->forward(tape, model.store, h0);
    Var v = ad::add(ad::mul_rowwise(*state.velocities, gate),
                    position_delta(tape, model, p, layer, state.positions, messages));
    return {v, ad::add(state.positions, v)};
}

Var readout(Tape& tape, EtnnModel& model, const Prepared& p, const std::map<Rank, Var>& hidden, ReadoutLevel level) {
    if (level != model.config.readout) throw error(errc::level_mismatch, "readout level differs from the model config");
    if (level == ReadoutLevel::node) {
        Var h0 = ad::gather_rows(hidden.at(0), node_rows(p));
        return model.post_pool.forward(tape, model.store, model.pre_pool.at(0).forward(tape, model.store, h0));
    }
    std::vector<Var> pooled;
    for (Rank r : model.schema.ranks)
        pooled.push_back(ad::sum_rows(model.pre_pool.at(r).forward(tape, model.store, hidden.at(r))));
    return model.post_pool.forward(tape, model.store, ad::concat_cols(pooled));
}

ForwardOutput forward(Tape& tape, EtnnModel& model, const Prepared& p, bool training) {
    const auto& cc = *p.complex;
    LayerState state;
    for (Rank r : model.schema.ranks)
        state.hidden[r] = embedder(model, r).forward(tape, model.store, tape.constant(p.inputs.at(r)));
    state.positions = tape.constant(cc.positions());
    if (model.velocity_mode()) state.velocities = tape.constant(*cc.velocities());

    std::vector<Var> invariants;
    if (model.config.mode == Mode::invariant)
        invariants = layer_invariants(tape, model, p, 0, state.positions, training);
    for (int l = 0; l < model.config.num_layers; ++l) {
        if (model.config.mode != Mode::invariant)
            invariants = layer_invariants(tape, model, p, l, state.positions, training);
        auto mr = message_pass(tape, model, p, l, state, invariants);
        if (model.velocity_mode()) {
            auto [v, x] = velocity_update(tape, model, p, l, state, mr.messages);
            state.velocities = v;
            state.positions = x;
        } else if (model.updates_positions()) {
            state.positions = position_update(tape, model, p, l, state.positions, mr.messages);
        }
        state.hidden = std::move(mr.hidden);
    }
    ForwardOutput out;
    out.prediction = readout(tape, model, p, state.hidden, model.config.readout);
    out.positions = state.positions;
    out.velocities = state.velocities;
    out.hidden = std::move(state.hidden);
    return out;
}

Evaluation evaluate_model(EtnnModel& model, const CombinatorialComplex& cc, const NeighborhoodCollection& collection) {
    const Prepared p = prepare(model, cc, collection);
    Tape tape;
    auto out = forward(tape, model, p, false);
    Evaluation e;
    e.prediction = out.prediction.value();
    e.positions = out.positions.value();
    if (out.velocities) e.velocities = out.velocities->value();
    for (const auto& [r, v] : out.hidden) e.hidden[r] = v.value();
    return e;
}

}  // namespace etnn
