#ifndef ETNN_IO_HPP
#define ETNN_IO_HPP

#include "etnn/complex.hpp"
#include "etnn/lifts.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace etnn {

enum class TargetLevel { complex, node };

struct Target {
    TargetLevel level = TargetLevel::complex;
    std::vector<double> values;
};

/// Contents of a CC interchange file.
struct ComplexDocument {
    CombinatorialComplex complex;
    std::optional<Target> target;
};

/// Graph input for lifting: the CC layout with "edges" instead of "cells",
/// plus optional pre-annotated higher-order structures.
struct GraphDocument {
    GeometricGraph graph;
    std::vector<std::vector<double>> edge_features;
    std::vector<std::vector<NodeId>> hyperedges;
    std::vector<AnnotatedCell> rings;
    std::vector<AnnotatedCell> functional_groups;
    std::optional<Target> target;
};

/// Parses a CC document. Unknown keys and malformed values raise ParseError;
/// structural problems raise the cc-core errors.
ComplexDocument parse_complex(const nlohmann::json& j);
ComplexDocument parse_complex(const std::string& text);
nlohmann::json to_json(const CombinatorialComplex& cc, const std::optional<Target>& target = std::nullopt);

GraphDocument parse_graph(const nlohmann::json& j);
GraphDocument parse_graph(const std::string& text);

/// Parses text as JSON, turning syntax errors into ParseError with line info.
nlohmann::json parse_json_text(const std::string& text, const std::string& origin = "<input>");
std::string read_text_file(const std::filesystem::path& path);

/// Writes via a temporary sibling file and rename, so a failed run never
/// leaves a partial artifact at `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace etnn

#endif  // ETNN_IO_HPP
