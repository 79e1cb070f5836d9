#include "etnn/io.hpp"

#include "etnn/error.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace etnn {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw error(errc::parse_error, where + " must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!ok.count(it.key())) throw error(errc::parse_error, "unknown key '" + it.key() + "' in " + where);
}

const json& require(const json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) throw error(errc::parse_error, std::string("missing key '") + key + "' in " + where);
    return *it;
}

double as_double(const json& v, const std::string& where) {
    if (!v.is_number()) throw error(errc::parse_error, where + ": expected a number");
    return v.get<double>();
}

std::uint64_t as_index(const json& v, const std::string& where) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
        throw error(errc::parse_error, where + ": expected a non-negative integer");
    return v.get<std::uint64_t>();
}

std::vector<double> as_doubles(const json& v, const std::string& where) {
    if (!v.is_array()) throw error(errc::parse_error, where + ": expected an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& x : v) out.push_back(as_double(x, where));
    return out;
}

std::vector<NodeId> as_nodes(const json& v, const std::string& where) {
    if (!v.is_array()) throw error(errc::parse_error, where + ": expected an array of node ids");
    std::vector<NodeId> out;
    for (const auto& x : v) out.push_back(static_cast<NodeId>(as_index(x, where)));
    return out;
}

Matrix as_matrix(const json& v, std::size_t rows, int cols, const std::string& where) {
    if (!v.is_array() || v.size() != rows)
        throw error(errc::dimension_mismatch, where + " must list one row per node");
    Matrix m(static_cast<Eigen::Index>(rows), cols);
    for (std::size_t i = 0; i < rows; ++i) {
        auto row = as_doubles(v[i], where);
        if (row.size() != static_cast<std::size_t>(cols))
            throw error(errc::dimension_mismatch, where + " row " + std::to_string(i) + " has length " +
                                                      std::to_string(row.size()) + ", expected " + std::to_string(cols));
        for (int c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(i), c) = row[static_cast<std::size_t>(c)];
    }
    return m;
}

Target parse_target(const json& j) {
    check_keys(j, {"level", "values"}, "target");
    Target t;
    const auto& level = require(j, "level", "target");
    if (level == "complex") t.level = TargetLevel::complex;
    else if (level == "node") t.level = TargetLevel::node;
    else throw error(errc::parse_error, "target level must be \"complex\" or \"node\"");
    t.values = as_doubles(require(j, "values", "target"), "target values");
    return t;
}

json target_json(const Target& t) {
    return json{{"level", t.level == TargetLevel::complex ? "complex" : "node"}, {"values", t.values}};
}

json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

struct Header {
    std::size_t num_nodes;
    int spatial_dim;
    Matrix positions;
    std::optional<Matrix> velocities;
};

Header parse_header(const json& j) {
    Header h;
    h.spatial_dim = static_cast<int>(as_index(require(j, "spatial_dim", "document"), "spatial_dim"));
    h.num_nodes = static_cast<std::size_t>(as_index(require(j, "num_nodes", "document"), "num_nodes"));
    h.positions = as_matrix(require(j, "positions", "document"), h.num_nodes, h.spatial_dim, "positions");
    if (auto it = j.find("velocities"); it != j.end())
        h.velocities = as_matrix(*it, h.num_nodes, h.spatial_dim, "velocities");
    return h;
}

std::vector<AnnotatedCell> parse_annotated(const json& v, const std::string& where) {
    if (!v.is_array()) throw error(errc::parse_error, where + " must be an array");
    std::vector<AnnotatedCell> out;
    for (const auto& c : v) {
        check_keys(c, {"nodes", "features"}, where);
        AnnotatedCell a;
        a.nodes = as_nodes(require(c, "nodes", where), where);
        if (auto it = c.find("features"); it != c.end()) a.features = as_doubles(*it, where);
        out.push_back(std::move(a));
    }
    return out;
}

}  // namespace

ComplexDocument parse_complex(const json& j) {
    check_keys(j, {"spatial_dim", "num_nodes", "positions", "velocities", "cells", "target"}, "complex document");
    auto h = parse_header(j);
    std::vector<CellSpec> specs;
    const auto& cells = require(j, "cells", "complex document");
    if (!cells.is_array()) throw error(errc::parse_error, "cells must be an array");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const std::string where = "cell " + std::to_string(i);
        const auto& c = cells[i];
        check_keys(c, {"nodes", "rank", "features", "tags"}, where);
        CellSpec s;
        s.nodes = as_nodes(require(c, "nodes", where), where);
        s.rank = static_cast<Rank>(as_index(require(c, "rank", where), where + " rank"));
        if (auto it = c.find("features"); it != c.end()) s.features = as_doubles(*it, where + " features");
        if (auto it = c.find("tags"); it != c.end()) {
            if (!it->is_array()) throw error(errc::parse_error, where + " tags must be an array");
            for (const auto& t : *it) {
                if (!t.is_string()) throw error(errc::parse_error, where + " tags must be strings");
                s.tags.push_back(t.get<std::string>());
            }
        }
        specs.push_back(std::move(s));
    }
    ComplexDocument doc{build_complex(h.num_nodes, h.spatial_dim, h.positions, std::move(specs), h.velocities), {}};
    if (auto it = j.find("target"); it != j.end()) doc.target = parse_target(*it);
    return doc;
}

ComplexDocument parse_complex(const std::string& text) { return parse_complex(parse_json_text(text)); }

json to_json(const CombinatorialComplex& cc, const std::optional<Target>& target) {
    json j;
    j["spatial_dim"] = cc.spatial_dim();
    j["num_nodes"] = cc.num_nodes();
    j["positions"] = matrix_json(cc.positions());
    if (cc.velocities()) j["velocities"] = matrix_json(*cc.velocities());
    json cells = json::array();
    for (const auto& c : cc.cells())
        cells.push_back(json{{"nodes", c.nodes}, {"rank", c.rank}, {"features", c.features}, {"tags", c.tags}});
    j["cells"] = std::move(cells);
    if (target) j["target"] = target_json(*target);
    return j;
}

GraphDocument parse_graph(const json& j) {
    check_keys(j,
               {"spatial_dim", "num_nodes", "positions", "velocities", "node_features", "edges", "edge_features",
                "hyperedges", "rings", "functional_groups", "target"},
               "graph document");
    auto h = parse_header(j);
    GraphDocument doc;
    doc.graph.num_nodes = h.num_nodes;
    doc.graph.spatial_dim = h.spatial_dim;
    doc.graph.positions = std::move(h.positions);
    doc.graph.velocities = std::move(h.velocities);
    if (auto it = j.find("node_features"); it != j.end()) {
        if (!it->is_array() || it->size() != h.num_nodes)
            throw error(errc::dimension_mismatch, "node_features must list one row per node");
        const int width = h.num_nodes ? static_cast<int>((*it)[0].size()) : 0;
        doc.graph.node_features = as_matrix(*it, h.num_nodes, width, "node_features");
    } else {
        doc.graph.node_features = Matrix(static_cast<Eigen::Index>(h.num_nodes), 0);
    }
    const auto& edges = require(j, "edges", "graph document");
    if (!edges.is_array()) throw error(errc::parse_error, "edges must be an array");
    for (const auto& e : edges) {
        auto pair = as_nodes(e, "edge");
        if (pair.size() != 2) throw error(errc::parse_error, "edges must be [i, j] pairs");
        doc.graph.edges.emplace_back(pair[0], pair[1]);
    }
    if (auto it = j.find("edge_features"); it != j.end()) {
        if (!it->is_array() || it->size() != doc.graph.edges.size())
            throw error(errc::dimension_mismatch, "edge_features must list one row per edge");
        for (const auto& f : *it) doc.edge_features.push_back(as_doubles(f, "edge_features"));
    }
    if (auto it = j.find("hyperedges"); it != j.end()) {
        if (!it->is_array()) throw error(errc::parse_error, "hyperedges must be an array");
        for (const auto& hcell : *it) doc.hyperedges.push_back(as_nodes(hcell, "hyperedge"));
    }
    if (auto it = j.find("rings"); it != j.end()) doc.rings = parse_annotated(*it, "rings");
    if (auto it = j.find("functional_groups"); it != j.end())
        doc.functional_groups = parse_annotated(*it, "functional_groups");
    if (auto it = j.find("target"); it != j.end()) doc.target = parse_target(*it);
    validate_graph(doc.graph);
    return doc;
}

GraphDocument parse_graph(const std::string& text) { return parse_graph(parse_json_text(text)); }

json parse_json_text(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1, column = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') ++line, column = 1;
            else ++column;
        }
        throw error(errc::parse_error, origin + ":" + std::to_string(line) + ":" + std::to_string(column) +
                                           ": malformed JSON");
    }
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw error(errc::invalid_argument, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw error(errc::invalid_argument, "cannot write " + tmp.string());
        out << contents;
        if (!out.flush()) throw error(errc::invalid_argument, "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace etnn
