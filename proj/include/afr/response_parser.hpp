#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "afr/error.hpp"
#include "afr/taxonomy.hpp"

namespace afr {

struct FeaturePrediction {
  bool exists = false;  // reconciled: exists OR quantity > 0
  std::int64_t quantity = 0;
  bool operator==(const FeaturePrediction&) const = default;
};

struct UnmatchedPrediction {
  std::string raw_name;
  bool exists = false;
  std::int64_t quantity = 0;
  bool operator==(const UnmatchedPrediction&) const = default;
};

struct ParsedPrediction {
  // Only entries other than (false, 0) are stored.
  std::map<std::string, FeaturePrediction> features;
  std::vector<UnmatchedPrediction> unmatched;
  std::vector<std::string> warnings;
  std::string raw_json;

  FeaturePrediction get(std::string_view id) const;

  // raw_json is provenance and does not take part in equality.
  bool operator==(const ParsedPrediction& o) const {
    return features == o.features && unmatched == o.unmatched && warnings == o.warnings;
  }
};

// First balanced {...} region that parses as JSON and carries a top-level
// "identified_features" key. Throws Error(no_json_found | no_feature_key).
std::string extract_json(std::string_view raw);

// Throws Error(schema_error) on structural problems.
ParsedPrediction parse_features(std::string_view json_text, const FeatureTaxonomy& t);

// Canonical prediction JSON in the output schema (taxonomy leaf order, then
// unmatched names in original order).
std::string serialize_prediction(const ParsedPrediction& p, const FeatureTaxonomy& t);

struct ParseOutcome {
  ParsedPrediction prediction;  // empty on failure
  bool ok = false;
  std::optional<Errc> error;
  std::string error_message;
};

// extract_json + parse_features without throwing.
ParseOutcome parse_response(std::string_view raw, const FeatureTaxonomy& t);

}  // namespace afr
