#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "afr/dataset.hpp"
#include "afr/metrics.hpp"
#include "afr/prompt.hpp"
#include "afr/render.hpp"
#include "afr/response_parser.hpp"
#include "afr/vlm_client.hpp"

namespace afr {

struct RunOptions {
  std::vector<ExperimentId> experiments{std::begin(kAllExperiments), std::end(kAllExperiments)};
  int concurrency = 4;
  double failure_threshold_pct = 20.0;
  bool resume = false;
  MultiImageMode multi_image_mode = MultiImageMode::separate;
  MaeMode mae_mode = MaeMode::all_leaves;
  std::filesystem::path output_dir;  // the run directory, runs/<run_id>
  RenderParams render;
  std::function<void(const std::string&)> progress;  // optional
};

struct WorkUnit {
  std::string design_id;
  ExperimentId experiment;
  std::string request_digest;  // empty if the unit could not be prepared
  bool cached = false;         // reply present in the response cache
  bool result_exists = false;  // result file already written (resume)
  std::string prepare_error;
};

struct WorkManifest {
  std::vector<WorkUnit> units;
  std::size_t pending_network() const;
};

enum class UnitStatus { ok, failed };

struct UnitResult {
  std::string design_id;
  std::string experiment;  // "E3"
  Difficulty difficulty = Difficulty::easy;
  std::string model;
  UnitStatus status = UnitStatus::ok;
  std::string error_code;
  std::string error_message;
  std::string request_digest;
  bool from_cache = false;
  double latency_s = 0;
  std::string raw_text;
  FeatureCounts ground_truth;
  ParsedPrediction prediction;
  std::string parse_error;
  DesignMetrics metrics;
  MaeMode mae_mode = MaeMode::all_leaves;

  nlohmann::json to_json(const FeatureTaxonomy& t) const;
  static UnitResult from_json(const nlohmann::json& j, const FeatureTaxonomy& t);
};

struct RunResult {
  nlohmann::json manifest;
  std::vector<UnitResult> units;  // dataset order, then experiment order

  std::vector<ScoredDesign> scored() const;  // ok units only
  std::size_t failure_count() const;
};

// Lists every (design, experiment) unit with its cache status. Renders views
// (locally) so request digests are exact; never calls the provider.
WorkManifest plan(const Dataset& d, const FeatureTaxonomy& t, const VlmClient& client, const RunOptions& opts);

// render -> prompt -> send -> parse -> score for every unit. Results are written
// one file per unit as they complete. Throws Error(too_many_failures) after
// persisting everything if the failure share exceeds the threshold; also
// provider_unavailable, output_dir_not_writable, run_locked.
RunResult run(const Dataset& d, const FeatureTaxonomy& t, VlmClient& client, const RunOptions& opts);

// Reads manifest.json and every unit file under a run directory.
RunResult load_run(const std::filesystem::path& run_dir, const FeatureTaxonomy& t);

// Re-parses stored raw replies and recomputes metrics under `mode`, rewriting
// unit files and the index. No provider access.
RunResult rescore(const std::filesystem::path& run_dir, const FeatureTaxonomy& t, MaeMode mode);

std::filesystem::path unit_result_path(const std::filesystem::path& run_dir, std::string_view experiment,
                                       std::string_view design_id);

}  // namespace afr
