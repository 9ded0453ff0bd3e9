#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "afr/metrics.hpp"
#include "afr/runner.hpp"

namespace afr {

struct ReportProvenance {
  std::string manifest_digest;  // sha256 of the run manifest(s)
  std::string mae_mode;
  std::string parse_failure_policy = "unparseable replies scored as empty predictions";
  std::string aggregation = "macro mean over designs";
};

ReportProvenance provenance_for(const std::vector<RunResult>& runs);

std::string per_design_csv(const std::vector<RunResult>& runs, const ReportProvenance& prov);
std::string aggregate_csv(const std::vector<AggregateMetrics>& rows, const ReportProvenance& prov);
std::string aggregate_json(const std::vector<AggregateMetrics>& rows, const ReportProvenance& prov);

// per_design.csv, aggregate.csv, aggregate.json. Throws Error(invalid_argument)
// on an empty result set, Error(output_dir_not_writable) on I/O failure.
std::vector<std::filesystem::path> write_tables(const std::vector<RunResult>& runs,
                                                const std::filesystem::path& out);

enum class ChartMetric { fna, fqa, hr, mae };

std::string chart_svg(const std::vector<AggregateMetrics>& aggregates, ChartMetric metric,
                      const ReportProvenance& prov);

// One grouped-bar SVG per metric from the difficulty == "all" rows.
std::vector<std::filesystem::path> emit_charts(const std::vector<AggregateMetrics>& aggregates,
                                               const std::filesystem::path& out, const ReportProvenance& prov);

}  // namespace afr
