#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "afr/dataset.hpp"
#include "afr/response_parser.hpp"
#include "afr/taxonomy.hpp"

namespace afr {

enum class MaeMode { all_leaves, union_of_present };
enum class ParseStatus { ok, failed };

std::string_view to_string(MaeMode m);
MaeMode parse_mae_mode(std::string_view s);
std::string_view to_string(ParseStatus s);

struct DesignMetrics {
  double fna_pct = 0;
  double fqa_pct = 0;
  double hr_pct = 0;
  double mae = 0;
  std::int64_t gt_total = 0;
  std::int64_t pred_total = 0;
  std::int64_t tp_qty = 0;
  std::int64_t hallucinated_qty = 0;
  int n_features = 0;
  ParseStatus parse_status = ParseStatus::ok;
};

// Name accuracy: share of ground-truth features the prediction identifies.
// Throws Error(empty_ground_truth).
double feature_name_accuracy(const FeatureCounts& gt, const ParsedPrediction& pred);

// 100 * sum_i min(pred_i, gt_i) / gt_total. Throws Error(empty_ground_truth).
double feature_quantity_accuracy(const FeatureCounts& gt, const ParsedPrediction& pred);

// Overcounts on real features plus every quantity under an unmatched name,
// over the total predicted quantity. 0 when nothing was predicted.
double hallucination_rate(const FeatureCounts& gt, const ParsedPrediction& pred);

// all_leaves: n = number of taxonomy leaves, absent counts are 0.
// union_of_present: i ranges over features with gt > 0 or pred > 0.
// Throws Error(empty_index_set) when union mode has nothing to average.
double mean_absolute_error(const FeatureCounts& gt, const ParsedPrediction& pred, const FeatureTaxonomy& t,
                           MaeMode mode = MaeMode::all_leaves);

DesignMetrics evaluate_design(const FeatureCounts& gt, const ParsedPrediction& pred, const FeatureTaxonomy& t,
                              MaeMode mode = MaeMode::all_leaves, ParseStatus status = ParseStatus::ok);

struct ScoredDesign {
  std::string model;
  std::string experiment;
  Difficulty difficulty = Difficulty::easy;
  std::string design_id;
  DesignMetrics metrics;
};

struct AggregateMetrics {
  std::string model;
  std::string experiment;
  std::string difficulty;  // easy | medium | hard | all
  double fna_pct = 0;
  double fqa_pct = 0;
  double hr_pct = 0;
  double mae = 0;
  double gt_total = 0;
  double pred_total = 0;
  double tp_qty = 0;
  double hallucinated_qty = 0;
  int n_designs = 0;
  int n_parse_failures = 0;
};

// Macro means per (model, experiment, difficulty) plus an "all" row per
// (model, experiment). Ordered by model, experiment, then easy/medium/hard/all.
std::vector<AggregateMetrics> aggregate(const std::vector<ScoredDesign>& results);

}  // namespace afr
