#include "etnn/error.hpp"

namespace etnn {

std::string_view to_string(errc code) noexcept {
    switch (code) {
        case errc::duplicate_cell: return "DuplicateCell";
        case errc::rank_violation: return "RankViolation";
        case errc::dimension_mismatch: return "DimensionMismatch";
        case errc::out_of_range_node: return "OutOfRangeNode";
        case errc::invalid_permutation: return "InvalidPermutation";
        case errc::unsupported_geometry: return "UnsupportedGeometry";
        case errc::degenerate_footprint: return "DegenerateFootprint";
        case errc::empty_cell: return "EmptyCell";
        case errc::unsupported_dimension: return "UnsupportedDimension";
        case errc::shape_mismatch: return "ShapeMismatch";
        case errc::index_out_of_range: return "IndexOutOfRange";
        case errc::non_scalar_loss: return "NonScalarLoss";
        case errc::config_mismatch: return "ConfigMismatch";
        case errc::mode_mismatch: return "ModeMismatch";
        case errc::level_mismatch: return "LevelMismatch";
        case errc::empty_dataset: return "EmptyDataset";
        case errc::target_mismatch: return "TargetMismatch";
        case errc::empty_mask: return "EmptyMask";
        case errc::bad_fractions: return "BadFractions";
        case errc::parse_error: return "ParseError";
        case errc::unsupported_variant: return "UnsupportedVariant";
        case errc::invalid_argument: return "InvalidArgument";
        case errc::cycle_limit: return "CycleLimit";
    }
    return "Unknown";
}

}  // namespace etnn
