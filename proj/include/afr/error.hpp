#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace afr {

enum class Errc {
  invalid_argument,
  io_error,
  malformed_taxonomy,
  empty_name,
  manifest_not_found,
  malformed_manifest,
  unknown_feature_name,
  duplicate_design_id,
  unsupported_format,
  corrupt_mesh,
  degenerate_mesh,
  unsupported_image,
  view_count_mismatch,
  missing_few_shot_example,
  missing_asset,
  auth_error,
  rate_limited,
  transport_error,
  malformed_provider_reply,
  script_not_found,
  no_json_found,
  no_feature_key,
  schema_error,
  empty_ground_truth,
  empty_index_set,
  too_many_failures,
  provider_unavailable,
  output_dir_not_writable,
  run_locked,
};

std::string_view to_string(Errc code);

// Broad category used for CLI exit codes.
enum class ErrorCategory { usage, data, provider, threshold };
ErrorCategory category_of(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace afr
