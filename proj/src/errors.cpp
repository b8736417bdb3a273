#include "patchaudit/errors.hpp"

namespace patchaudit {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_config: return "InvalidConfig";
    case ErrorCode::missing_path: return "MissingPath";
    case ErrorCode::empty_dataset: return "EmptyDataset";
    case ErrorCode::malformed_manifest_row: return "MalformedManifestRow";
    case ErrorCode::unsupported_format: return "UnsupportedFormat";
    case ErrorCode::corrupt_image: return "CorruptImage";
    case ErrorCode::unmapped_class: return "UnmappedClass";
    case ErrorCode::image_too_small: return "ImageTooSmall";
    case ErrorCode::io_failure: return "IoFailure";
    case ErrorCode::class_too_small: return "ClassTooSmall";
    case ErrorCode::degenerate_dataset: return "DegenerateDataset";
    case ErrorCode::unsupported_channel_count: return "UnsupportedChannelCount";
    case ErrorCode::shape_mismatch: return "ShapeMismatch";
    case ErrorCode::length_mismatch: return "LengthMismatch";
    case ErrorCode::non_finite_gradient: return "NonFiniteGradient";
    case ErrorCode::non_finite_loss: return "NonFiniteLoss";
    case ErrorCode::empty_matrix: return "EmptyMatrix";
    case ErrorCode::invalid_baseline: return "InvalidBaseline";
    case ErrorCode::infeasible_scene: return "InfeasibleScene";
  }
  return "Error";
}

}  // namespace patchaudit
