#ifndef ETNN_CONFIG_HPP
#define ETNN_CONFIG_HPP

#include "etnn/model.hpp"
#include "etnn/training.hpp"

#include <map>
#include <string>

namespace etnn {

/// Flat `key = value` file with `#` comments and optional `[section]`
/// headers. Keys are stored as `section.key`. Values may be quoted.
struct ConfigFile {
    struct Value {
        std::string text;
        int line = 0;
    };
    std::string origin;
    std::map<std::string, Value> values;

    bool has(const std::string& key) const { return values.count(key) != 0; }
};

/// Throws ParseError ("origin:line: ...") for malformed lines or repeated keys.
ConfigFile parse_config(const std::string& text, const std::string& origin = "<config>");

/// Split fractions for a dataset directory.
struct SplitFractions {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

struct RunConfig {
    EtnnConfig model;
    TrainConfig train;
    SplitFractions split;
};

/// Reads the `model.*` and `train.*` keys (`split` lives under train).
/// Unknown keys and bad values raise ParseError with the line number.
RunConfig run_config(const ConfigFile& file);

/// Inverse of run_config; parsing the result yields the same settings.
std::string to_config_text(const RunConfig& config);

}  // namespace etnn

#endif  // ETNN_CONFIG_HPP
