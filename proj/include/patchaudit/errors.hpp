#pragma once

#include <stdexcept>
#include <string>

namespace patchaudit {

enum class ErrorCode {
  invalid_config,
  missing_path,
  empty_dataset,
  malformed_manifest_row,
  unsupported_format,
  corrupt_image,
  unmapped_class,
  image_too_small,
  io_failure,
  class_too_small,
  degenerate_dataset,
  unsupported_channel_count,
  shape_mismatch,
  length_mismatch,
  non_finite_gradient,
  non_finite_loss,
  empty_matrix,
  invalid_baseline,
  infeasible_scene,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace patchaudit
