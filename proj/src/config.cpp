#include "etnn/config.hpp"

#include "etnn/error.hpp"

#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

namespace etnn {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

class Reader {
public:
    explicit Reader(const ConfigFile& f) : f_(f) {}

    bool has(const std::string& key) {
        used_.insert(key);
        return f_.has(key);
    }

    [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
        const auto it = f_.values.find(key);
        const int line = it == f_.values.end() ? 0 : it->second.line;
        throw error(errc::parse_error, f_.origin + ":" + std::to_string(line) + ": " + key + ": " + msg);
    }

    const std::string& text(const std::string& key) { return (used_.insert(key), f_.values.at(key).text); }

    template <class T>
    void number(const std::string& key, T& out) {
        if (!has(key)) return;
        const auto& s = text(key);
        T v{};
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size()) fail(key, "expected a number, got '" + s + "'");
        if constexpr (std::is_floating_point_v<T>)
            if (!std::isfinite(v)) fail(key, "value must be finite");
        out = v;
    }

    void flag(const std::string& key, bool& out) {
        if (!has(key)) return;
        const auto& s = text(key);
        if (s == "true") out = true;
        else if (s == "false") out = false;
        else fail(key, "expected true or false");
    }

    /// Runs `parse` on the value, re-throwing its errors with line context.
    template <class F>
    void with(const std::string& key, F parse) {
        if (!has(key)) return;
        try {
            parse(text(key));
        } catch (const error& e) {
            fail(key, e.what());
        }
    }

    void reject_unknown() const {
        for (const auto& [k, v] : f_.values)
            if (!used_.count(k))
                throw error(errc::parse_error, f_.origin + ":" + std::to_string(v.line) + ": unknown key '" + k + "'");
    }

private:
    const ConfigFile& f_;
    std::set<std::string> used_;
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

ConfigFile parse_config(const std::string& text, const std::string& origin) {
    ConfigFile f;
    f.origin = origin;
    std::istringstream in(text);
    std::string raw, section;
    int line = 0;
    auto fail = [&](const std::string& msg) {
        throw error(errc::parse_error, origin + ":" + std::to_string(line) + ": " + msg);
    };
    while (std::getline(in, raw)) {
        ++line;
        std::string s = raw;
        bool quoted = false;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '"') quoted = !quoted;
            if (s[i] == '#' && !quoted) {
                s.resize(i);
                break;
            }
        }
        s = trim(s);
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') fail("unterminated section header");
            section = trim(std::string_view(s).substr(1, s.size() - 2));
            if (section.empty()) fail("empty section name");
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) fail("expected key = value");
        std::string key = trim(std::string_view(s).substr(0, eq));
        std::string value = trim(std::string_view(s).substr(eq + 1));
        if (key.empty()) fail("empty key");
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        else if (value.find('"') != std::string::npos) fail("unbalanced quote");
        if (!section.empty()) key = section + "." + key;
        if (f.values.count(key)) fail("repeated key '" + key + "'");
        f.values[key] = {value, line};
    }
    return f;
}

RunConfig run_config(const ConfigFile& file) {
    RunConfig rc;
    Reader r(file);
    auto& m = rc.model;
    r.number("model.hidden", m.hidden);
    r.number("model.layers", m.num_layers);
    r.number("model.out_dim", m.out_dim);
    r.with("model.neighborhoods", [&](const std::string& s) { m.neighborhoods = s.empty() ? std::vector<NeighborhoodSpec>{} : parse_neighborhood_list(s); });
    r.with("model.invariants", [&](const std::string& s) { m.invariants = parse_invariants(s); });
    r.with("model.mode", [&](const std::string& s) { m.mode = parse_mode(s); });
    r.with("model.readout", [&](const std::string& s) {
        if (s == "complex") m.readout = ReadoutLevel::complex;
        else if (s == "node") m.readout = ReadoutLevel::node;
        else throw error(errc::parse_error, "readout must be complex or node");
    });
    r.with("model.features", [&](const std::string& s) { m.default_features = parse_feature_source(s); });
    for (const auto& [key, value] : file.values) {
        const std::string prefix = "model.features.r";
        if (key.rfind(prefix, 0) != 0) continue;
        int rank = -1;
        const auto digits = key.substr(prefix.size());
        const auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), rank);
        if (ec != std::errc{} || p != digits.data() + digits.size() || rank < 0) r.fail(key, "expected features.r<rank>");
        r.with(key, [&](const std::string& s) { m.feature_source[rank] = parse_feature_source(s); });
    }
    r.with("model.membership_tags", [&](const std::string& s) { m.membership_tags = split_list(s); });
    r.flag("model.position_diff_normalize", m.position_diff_normalize);
    r.with("model.c_policy", [&](const std::string& s) {
        if (s == "reciprocal_count") m.c_policy = CPolicy::reciprocal_count;
        else if (s == "constant") m.c_policy = CPolicy::constant;
        else throw error(errc::parse_error, "c_policy must be reciprocal_count or constant");
    });
    r.number("model.c_constant", m.c_constant);
    r.flag("model.exclude_virtual", m.exclude_virtual);
    r.with("model.aggregation", [&](const std::string& s) {
        if (s == "gated_concat") m.aggregation = Aggregation::gated_concat;
        else if (s == "sum") m.aggregation = Aggregation::sum;
        else throw error(errc::parse_error, "aggregation must be gated_concat or sum");
    });
    r.flag("model.share_message", m.share_message);
    r.flag("model.share_update", m.share_update);
    r.flag("model.share_embedding", m.share_embedding);
    r.number("model.seed", m.seed);
    if (m.hidden <= 0) r.fail("model.hidden", "must be positive");
    if (m.num_layers < 1) r.fail("model.layers", "must be >= 1");
    if (m.out_dim < 1) r.fail("model.out_dim", "must be >= 1");

    auto& t = rc.train;
    t.seed = m.seed;
    r.number("train.epochs", t.epochs);
    r.number("train.batch_size", t.batch_size);
    r.number("train.lr", t.base_lr);
    r.number("train.weight_decay", t.weight_decay);
    r.number("train.clip_norm", t.clip_norm);
    r.with("train.loss", [&](const std::string& s) { t.loss = parse_loss(s); });
    r.number("train.huber_delta", t.huber_delta);
    r.with("train.metric", [&](const std::string& s) { t.metric = parse_metric(s); });
    r.number("train.seed", t.seed);
    r.flag("train.standardize_targets", t.standardize_targets);
    r.flag("train.restore_best", t.restore_best);
    r.with("train.split", [&](const std::string& s) {
        const auto parts = split_list(s);
        if (parts.size() != 3) throw error(errc::bad_fractions, "split needs train,val,test fractions");
        double f[3];
        for (int i = 0; i < 3; ++i) {
            const auto [p, ec] = std::from_chars(parts[i].data(), parts[i].data() + parts[i].size(), f[i]);
            if (ec != std::errc{} || p != parts[i].data() + parts[i].size() || f[i] < 0)
                throw error(errc::bad_fractions, "fractions must be non-negative numbers");
        }
        if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9) throw error(errc::bad_fractions, "fractions must sum to 1");
        rc.split = {f[0], f[1], f[2]};
    });
    if (t.epochs < 0) r.fail("train.epochs", "must be >= 0");
    if (t.batch_size < 1) r.fail("train.batch_size", "must be >= 1");
    if (t.huber_delta <= 0) r.fail("train.huber_delta", "must be positive");
    r.reject_unknown();
    return rc;
}

std::string to_config_text(const RunConfig& rc) {
    const auto& m = rc.model;
    const auto& t = rc.train;
    std::ostringstream out;
    out.precision(17);
    std::string nbhd;
    for (const auto& n : m.neighborhoods) nbhd += (nbhd.empty() ? "" : ",") + n.to_string();
    std::string tags;
    for (const auto& s : m.membership_tags) tags += (tags.empty() ? "" : ",") + s;
    auto b = [](bool v) { return v ? "true" : "false"; };
    out << "[model]\n"
        << "hidden = " << m.hidden << "\n"
        << "layers = " << m.num_layers << "\n"
        << "out_dim = " << m.out_dim << "\n"
        << "neighborhoods = \"" << nbhd << "\"\n"
        << "invariants = \"" << m.invariants.to_string() << "\"\n"
        << "mode = " << to_string(m.mode) << "\n"
        << "readout = " << (m.readout == ReadoutLevel::node ? "node" : "complex") << "\n"
        << "features = " << feature_source_string(m.default_features) << "\n";
    for (const auto& [r, f] : m.feature_source) out << "features.r" << r << " = " << feature_source_string(f) << "\n";
    out << "membership_tags = \"" << tags << "\"\n"
        << "position_diff_normalize = " << b(m.position_diff_normalize) << "\n"
        << "c_policy = " << (m.c_policy == CPolicy::constant ? "constant" : "reciprocal_count") << "\n"
        << "c_constant = " << m.c_constant << "\n"
        << "exclude_virtual = " << b(m.exclude_virtual) << "\n"
        << "aggregation = " << (m.aggregation == Aggregation::sum ? "sum" : "gated_concat") << "\n"
        << "share_message = " << b(m.share_message) << "\n"
        << "share_update = " << b(m.share_update) << "\n"
        << "share_embedding = " << b(m.share_embedding) << "\n"
        << "seed = " << m.seed << "\n\n"
        << "[train]\n"
        << "epochs = " << t.epochs << "\n"
        << "batch_size = " << t.batch_size << "\n"
        << "lr = " << t.base_lr << "\n"
        << "weight_decay = " << t.weight_decay << "\n"
        << "clip_norm = " << t.clip_norm << "\n"
        << "loss = " << to_string(t.loss) << "\n"
        << "huber_delta = " << t.huber_delta << "\n"
        << "metric = " << to_string(t.metric) << "\n"
        << "seed = " << t.seed << "\n"
        << "standardize_targets = " << b(t.standardize_targets) << "\n"
        << "restore_best = " << b(t.restore_best) << "\n"
        << "split = \"" << rc.split.train << "," << rc.split.val << "," << rc.split.test << "\"\n";
    return out.str();
}

}  // namespace etnn
