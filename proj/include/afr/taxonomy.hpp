#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace afr {

struct CanonicalFeature {
  std::string id;            // stable slug, e.g. "hole"
  std::string display_name;  // leaf string exactly as in the feature list
  std::set<std::string> aliases;
  std::vector<std::string> category_path;

  bool operator==(const CanonicalFeature&) const = default;
};

struct MatchResult {
  std::optional<std::string> feature_id;  // empty => unmatched
  std::string normalized_input;
  std::string note;

  bool matched() const { return feature_id.has_value(); }
};

// Hierarchical manufacturing feature list. Immutable after load.
class FeatureTaxonomy {
 public:
  // Parses the nested-object form (categories are objects, leaves are []).
  // `aliases` maps normalized alias -> leaf id; entries for ids not present
  // are dropped. Throws Error(malformed_taxonomy).
  static FeatureTaxonomy from_json_text(std::string_view text,
                                        const std::map<std::string, std::string>& aliases);

  const std::vector<CanonicalFeature>& leaves() const { return leaves_; }
  const std::string& version() const { return version_; }
  const nlohmann::ordered_json& tree() const { return tree_; }

  const CanonicalFeature* find(std::string_view id) const;
  std::size_t index_of(std::string_view id) const;  // npos if absent

  // Exact asset format: two-space indentation, trailing newline.
  std::string serialize() const;

  // Normalized-name -> leaf id (canonical names and aliases).
  const std::map<std::string, std::string>& lookup() const { return lookup_; }

  bool operator==(const FeatureTaxonomy& other) const {
    return tree_ == other.tree_ && leaves_ == other.leaves_ && version_ == other.version_;
  }

 private:
  nlohmann::ordered_json tree_;
  std::vector<CanonicalFeature> leaves_;
  std::map<std::string, std::string> lookup_;
  std::string version_;
};

// Built-in list (16 leaves) with the curated alias table.
const FeatureTaxonomy& builtin_taxonomy();

// Loads a taxonomy file. Aliases come from `alias_file` when given, else from
// the built-in alias table restricted to the leaves the file defines.
FeatureTaxonomy load_taxonomy(const std::filesystem::path& file,
                              const std::optional<std::filesystem::path>& alias_file = std::nullopt);

// Parses an alias table document: {"aliases": {"<alias>": "<leaf id>", ...}}.
std::map<std::string, std::string> parse_alias_table(std::string_view text);

const std::vector<CanonicalFeature>& leaf_features(const FeatureTaxonomy& t);

// Lowercase, drop parenthesized qualifiers, collapse punctuation and
// whitespace runs to single spaces.
std::string normalize_text(std::string_view raw);

// Derives the stable slug for a leaf display name.
std::string slug_for(std::string_view display_name);

// Throws Error(empty_name) for empty or all-whitespace input.
MatchResult normalize_name(std::string_view raw, const FeatureTaxonomy& t);

// Feature list JSON for interpolation into prompt templates (no trailing newline).
std::string render_feature_list_block(const FeatureTaxonomy& t);

}  // namespace afr
