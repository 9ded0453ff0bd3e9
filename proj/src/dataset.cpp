#include "afr/dataset.hpp"

#include <set>

#include <json.hpp>

#include "afr/error.hpp"
#include "afr/util.hpp"

namespace afr {

std::string_view to_string(Difficulty d) {
  switch (d) {
    case Difficulty::easy: return "easy";
    case Difficulty::medium: return "medium";
    case Difficulty::hard: return "hard";
  }
  return "easy";
}

std::optional<Difficulty> parse_difficulty(std::string_view s) {
  if (s == "easy") return Difficulty::easy;
  if (s == "medium") return Difficulty::medium;
  if (s == "hard") return Difficulty::hard;
  return std::nullopt;
}

std::int64_t total_count(const FeatureCounts& c) {
  std::int64_t n = 0;
  for (const auto& [id, count] : c) n += count;
  return n;
}

std::string_view to_string(IssueKind k) {
  switch (k) {
    case IssueKind::missing_mesh: return "MissingMesh";
    case IssueKind::missing_view: return "MissingView";
    case IssueKind::empty_ground_truth: return "EmptyGroundTruth";
    case IssueKind::count_anomaly: return "CountAnomaly";
    case IssueKind::empty_dataset: return "EmptyDataset";
  }
  return "Unknown";
}

namespace {

[[noreturn]] void malformed(const std::string& what) { throw Error(Errc::malformed_manifest, what); }

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& rel) {
  std::filesystem::path p(rel);
  if (p.is_relative()) p = base / p;
  return p.lexically_normal();
}

DesignRecord parse_design(const nlohmann::json& j, const std::filesystem::path& base, const FeatureTaxonomy& t) {
  if (!j.is_object()) malformed("design entries must be objects");
  DesignRecord r;
  if (!j.contains("id") || !j["id"].is_string() || j["id"].get<std::string>().empty())
    malformed("design without a string id");
  r.id = j["id"].get<std::string>();

  if (!j.contains("difficulty") || !j["difficulty"].is_string()) malformed(r.id + ": missing difficulty");
  auto diff = parse_difficulty(j["difficulty"].get<std::string>());
  if (!diff) malformed(r.id + ": difficulty must be easy, medium or hard");
  r.difficulty = *diff;

  bool has_mesh = j.contains("mesh") && !j["mesh"].is_null();
  bool has_views = j.contains("views") && !j["views"].is_null();
  if (has_mesh == has_views) malformed(r.id + ": exactly one of \"mesh\" or \"views\" is required");
  if (has_mesh) {
    if (!j["mesh"].is_string()) malformed(r.id + ": mesh must be a path string");
    r.mesh_path = resolve(base, j["mesh"].get<std::string>());
  } else {
    const auto& views = j["views"];
    if (!views.is_array() || views.empty() || views.size() > 3) malformed(r.id + ": views must list 1 to 3 images");
    for (const auto& v : views) {
      if (!v.is_string()) malformed(r.id + ": view paths must be strings");
      r.view_paths.push_back(resolve(base, v.get<std::string>()));
    }
  }

  if (!j.contains("ground_truth") || !j["ground_truth"].is_object()) malformed(r.id + ": missing ground_truth object");
  std::set<std::string> seen;
  for (const auto& [name, value] : j["ground_truth"].items()) {
    if (!value.is_number_integer()) malformed(r.id + ": count for \"" + name + "\" must be an integer");
    auto count = value.get<std::int64_t>();
    if (count < 0) malformed(r.id + ": negative count for \"" + name + "\"");
    MatchResult m;
    try {
      m = normalize_name(name, t);
    } catch (const Error&) {
      malformed(r.id + ": empty feature name in ground truth");
    }
    if (!m.matched()) throw Error(Errc::unknown_feature_name, r.id + ": \"" + name + "\"");
    if (!seen.insert(*m.feature_id).second)
      malformed(r.id + ": \"" + name + "\" repeats feature " + *m.feature_id);
    if (count > 0) r.ground_truth[*m.feature_id] = count;
  }
  if (j.contains("notes") && j["notes"].is_string()) r.notes = j["notes"].get<std::string>();
  return r;
}

}  // namespace

Dataset parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir, const FeatureTaxonomy& t) {
  auto j = nlohmann::json::parse(json_text.begin(), json_text.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) malformed("manifest is not a JSON object");
  Dataset d;
  if (j.contains("name") && j["name"].is_string()) d.name = j["name"].get<std::string>();
  if (!j.contains("designs") || !j["designs"].is_array() || j["designs"].empty())
    malformed("manifest needs a non-empty \"designs\" array");
  std::set<std::string> ids;
  for (const auto& dj : j["designs"]) {
    DesignRecord r = parse_design(dj, base_dir, t);
    if (!ids.insert(r.id).second) throw Error(Errc::duplicate_design_id, r.id);
    d.designs.push_back(std::move(r));
  }
  return d;
}

Dataset load_manifest(const std::filesystem::path& path, const FeatureTaxonomy& t) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) throw Error(Errc::manifest_not_found, path.string());
  auto base = std::filesystem::absolute(path, ec).parent_path();
  return parse_manifest(read_file(path), base, t);
}

bool ValidationReport::has_errors() const {
  for (const auto& i : issues)
    if (i.severity == Severity::error) return true;
  return false;
}

ValidationReport validate(const Dataset& d) {
  ValidationReport rep;
  if (d.designs.empty()) rep.issues.push_back({"", IssueKind::empty_dataset, Severity::error, "dataset has no designs"});
  std::error_code ec;
  for (const auto& r : d.designs) {
    if (r.mesh_path && !std::filesystem::is_regular_file(*r.mesh_path, ec))
      rep.issues.push_back({r.id, IssueKind::missing_mesh, Severity::error, r.mesh_path->string()});
    for (const auto& v : r.view_paths)
      if (!std::filesystem::is_regular_file(v, ec))
        rep.issues.push_back({r.id, IssueKind::missing_view, Severity::error, v.string()});
    if (total_count(r.ground_truth) == 0)
      rep.issues.push_back({r.id, IssueKind::empty_ground_truth, Severity::warning, "no positive feature counts"});
    for (const auto& [id, count] : r.ground_truth)
      if (count > kCountAnomalyThreshold)
        rep.issues.push_back({r.id, IssueKind::count_anomaly, Severity::warning,
                              id + " = " + std::to_string(count) + " exceeds " +
                                  std::to_string(kCountAnomalyThreshold)});
  }
  return rep;
}

Dataset filter_by_difficulty(const Dataset& d, Difficulty level) {
  Dataset out;
  out.name = d.name;
  for (const auto& r : d.designs)
    if (r.difficulty == level) out.designs.push_back(r);
  return out;
}

}  // namespace afr
