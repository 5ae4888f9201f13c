#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace commrl {

enum class ErrorCode {
  dimension_mismatch,
  index_out_of_range,
  empty_dataset,
  group_too_small,
  missing_advantages,
  empty_batch,
  empty_split,
  invalid_spec,
  invalid_config,
  backend_unavailable,
  malformed_reply,
  io_error,
  format_error,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::dimension_mismatch: return "dimension-mismatch";
    case ErrorCode::index_out_of_range: return "index-out-of-range";
    case ErrorCode::empty_dataset: return "empty-dataset";
    case ErrorCode::group_too_small: return "group-too-small";
    case ErrorCode::missing_advantages: return "missing-advantages";
    case ErrorCode::empty_batch: return "empty-batch";
    case ErrorCode::empty_split: return "empty-split";
    case ErrorCode::invalid_spec: return "invalid-spec";
    case ErrorCode::invalid_config: return "invalid-config";
    case ErrorCode::backend_unavailable: return "backend-unavailable";
    case ErrorCode::malformed_reply: return "malformed-reply";
    case ErrorCode::io_error: return "io-error";
    case ErrorCode::format_error: return "format-error";
  }
  return "unknown";
}

/// Single exception type for the library; `code()` identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace commrl
