#include "afr/error.hpp"

namespace afr {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::io_error: return "IoError";
    case Errc::malformed_taxonomy: return "MalformedTaxonomy";
    case Errc::empty_name: return "EmptyName";
    case Errc::manifest_not_found: return "ManifestNotFound";
    case Errc::malformed_manifest: return "MalformedManifest";
    case Errc::unknown_feature_name: return "UnknownFeatureName";
    case Errc::duplicate_design_id: return "DuplicateDesignId";
    case Errc::unsupported_format: return "UnsupportedFormat";
    case Errc::corrupt_mesh: return "CorruptMesh";
    case Errc::degenerate_mesh: return "DegenerateMesh";
    case Errc::unsupported_image: return "UnsupportedImage";
    case Errc::view_count_mismatch: return "ViewCountMismatch";
    case Errc::missing_few_shot_example: return "MissingFewShotExample";
    case Errc::missing_asset: return "MissingAsset";
    case Errc::auth_error: return "AuthError";
    case Errc::rate_limited: return "RateLimited";
    case Errc::transport_error: return "TransportError";
    case Errc::malformed_provider_reply: return "MalformedProviderReply";
    case Errc::script_not_found: return "ScriptNotFound";
    case Errc::no_json_found: return "NoJsonFound";
    case Errc::no_feature_key: return "NoFeatureKey";
    case Errc::schema_error: return "SchemaError";
    case Errc::empty_ground_truth: return "EmptyGroundTruth";
    case Errc::empty_index_set: return "EmptyIndexSet";
    case Errc::too_many_failures: return "TooManyFailures";
    case Errc::provider_unavailable: return "ProviderUnavailable";
    case Errc::output_dir_not_writable: return "OutputDirNotWritable";
    case Errc::run_locked: return "RunLocked";
  }
  return "Unknown";
}

ErrorCategory category_of(Errc code) {
  switch (code) {
    case Errc::invalid_argument:
      return ErrorCategory::usage;
    case Errc::auth_error:
    case Errc::rate_limited:
    case Errc::transport_error:
    case Errc::malformed_provider_reply:
    case Errc::script_not_found:
    case Errc::provider_unavailable:
      return ErrorCategory::provider;
    case Errc::too_many_failures:
      return ErrorCategory::threshold;
    default:
      return ErrorCategory::data;
  }
}

}  // namespace afr
