#ifndef ETNN_ERROR_HPP
#define ETNN_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace etnn {

/// Failure categories raised across the library. Every thrown etnn::error
/// carries exactly one of these so callers (and tests) can branch on kind.
enum class errc {
    duplicate_cell,
    rank_violation,
    dimension_mismatch,
    out_of_range_node,
    invalid_permutation,
    unsupported_geometry,
    degenerate_footprint,
    empty_cell,
    unsupported_dimension,
    shape_mismatch,
    index_out_of_range,
    non_scalar_loss,
    config_mismatch,
    mode_mismatch,
    level_mismatch,
    empty_dataset,
    target_mismatch,
    empty_mask,
    bad_fractions,
    parse_error,
    unsupported_variant,
    invalid_argument,
    cycle_limit,
};

std::string_view to_string(errc code) noexcept;

class error : public std::runtime_error {
public:
    error(errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    errc code() const noexcept { return code_; }

private:
    errc code_;
};

}  // namespace etnn

#endif  // ETNN_ERROR_HPP
