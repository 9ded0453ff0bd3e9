#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "afr/taxonomy.hpp"

namespace afr {

enum class Difficulty { easy, medium, hard };

std::string_view to_string(Difficulty d);
std::optional<Difficulty> parse_difficulty(std::string_view s);

// Canonical feature id -> count. Absent key means 0.
using FeatureCounts = std::map<std::string, std::int64_t>;

std::int64_t total_count(const FeatureCounts& c);

struct DesignRecord {
  std::string id;
  Difficulty difficulty = Difficulty::easy;
  std::optional<std::filesystem::path> mesh_path;  // absolute
  std::vector<std::filesystem::path> view_paths;   // absolute, 1..3
  FeatureCounts ground_truth;                      // positive counts only
  std::string notes;

  bool operator==(const DesignRecord&) const = default;
};

struct Dataset {
  std::string name;
  std::vector<DesignRecord> designs;

  bool operator==(const Dataset&) const = default;
};

// Relative paths resolve against the manifest's directory. Ground-truth keys
// go through normalize_name; anything unresolved is an error.
Dataset load_manifest(const std::filesystem::path& path, const FeatureTaxonomy& t);
Dataset parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir,
                       const FeatureTaxonomy& t);

enum class IssueKind { missing_mesh, missing_view, empty_ground_truth, count_anomaly, empty_dataset };
enum class Severity { warning, error };

std::string_view to_string(IssueKind k);

struct ValidationIssue {
  std::string design_id;
  IssueKind kind;
  Severity severity;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  bool empty() const { return issues.empty(); }
  bool has_errors() const;
};

// Counts above this are flagged as anomalies (likely a labelling slip).
inline constexpr std::int64_t kCountAnomalyThreshold = 10000;

ValidationReport validate(const Dataset& d);

Dataset filter_by_difficulty(const Dataset& d, Difficulty level);

}  // namespace afr
