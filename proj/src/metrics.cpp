#include "afr/metrics.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>

#include "afr/error.hpp"

namespace afr {

namespace {

std::int64_t gt_of(const FeatureCounts& gt, const std::string& id) {
  auto it = gt.find(id);
  return it == gt.end() ? 0 : it->second;
}

std::int64_t positive_total(const FeatureCounts& gt) {
  std::int64_t total = 0;
  for (const auto& [id, q] : gt)
    if (q > 0) total += q;
  return total;
}

void require_gt(const FeatureCounts& gt) {
  if (positive_total(gt) <= 0) throw Error(Errc::empty_ground_truth, "ground truth has no positive counts");
}

struct Tally {
  std::int64_t tp = 0, over = 0, pred_total = 0;
};

Tally tally(const FeatureCounts& gt, const ParsedPrediction& pred) {
  Tally t;
  for (const auto& [id, f] : pred.features) {
    std::int64_t g = gt_of(gt, id);
    t.pred_total += f.quantity;
    t.tp += std::min(f.quantity, g);
    t.over += std::max<std::int64_t>(f.quantity - g, 0);
  }
  for (const auto& u : pred.unmatched) {
    t.pred_total += u.quantity;
    t.over += u.quantity;
  }
  return t;
}

}  // namespace

std::string_view to_string(MaeMode m) { return m == MaeMode::all_leaves ? "all_leaves" : "union"; }

MaeMode parse_mae_mode(std::string_view s) {
  if (s == "all_leaves") return MaeMode::all_leaves;
  if (s == "union") return MaeMode::union_of_present;
  throw Error(Errc::invalid_argument, "mae mode must be all_leaves or union");
}

std::string_view to_string(ParseStatus s) { return s == ParseStatus::ok ? "ok" : "failed"; }

double feature_name_accuracy(const FeatureCounts& gt, const ParsedPrediction& pred) {
  require_gt(gt);
  int hit = 0, total = 0;
  for (const auto& [id, q] : gt) {
    if (q <= 0) continue;
    ++total;
    auto f = pred.get(id);
    if (f.exists || f.quantity > 0) ++hit;
  }
  return 100.0 * hit / total;
}

double feature_quantity_accuracy(const FeatureCounts& gt, const ParsedPrediction& pred) {
  require_gt(gt);
  return 100.0 * static_cast<double>(tally(gt, pred).tp) / static_cast<double>(positive_total(gt));
}

double hallucination_rate(const FeatureCounts& gt, const ParsedPrediction& pred) {
  Tally t = tally(gt, pred);
  if (t.pred_total == 0) return 0.0;
  return 100.0 * static_cast<double>(t.over) / static_cast<double>(t.pred_total);
}

double mean_absolute_error(const FeatureCounts& gt, const ParsedPrediction& pred, const FeatureTaxonomy& t,
                           MaeMode mode) {
  std::int64_t sum = 0;
  std::size_t n = 0;
  for (const auto& leaf : t.leaves()) {
    std::int64_t g = gt_of(gt, leaf.id), q = pred.get(leaf.id).quantity;
    if (mode == MaeMode::union_of_present && g <= 0 && q <= 0) continue;
    ++n;
    sum += std::llabs(g - q);
  }
  if (n == 0) throw Error(Errc::empty_index_set, "no feature is present in either ground truth or prediction");
  return static_cast<double>(sum) / static_cast<double>(n);
}

DesignMetrics evaluate_design(const FeatureCounts& gt, const ParsedPrediction& pred, const FeatureTaxonomy& t,
                              MaeMode mode, ParseStatus status) {
  const ParsedPrediction empty;
  const ParsedPrediction& p = status == ParseStatus::failed ? empty : pred;
  DesignMetrics m;
  m.parse_status = status;
  m.fna_pct = feature_name_accuracy(gt, p);
  m.fqa_pct = feature_quantity_accuracy(gt, p);
  m.hr_pct = hallucination_rate(gt, p);
  m.mae = mean_absolute_error(gt, p, t, mode);
  Tally tl = tally(gt, p);
  m.gt_total = positive_total(gt);
  m.pred_total = tl.pred_total;
  m.tp_qty = tl.tp;
  m.hallucinated_qty = tl.over;
  if (mode == MaeMode::all_leaves) {
    m.n_features = static_cast<int>(t.leaves().size());
  } else {
    for (const auto& leaf : t.leaves())
      if (gt_of(gt, leaf.id) > 0 || p.get(leaf.id).quantity > 0) ++m.n_features;
  }
  return m;
}

std::vector<AggregateMetrics> aggregate(const std::vector<ScoredDesign>& results) {
  // (model, experiment) -> difficulty rank (0..2, 3 = all) -> designs
  std::map<std::pair<std::string, std::string>, std::map<int, std::vector<const DesignMetrics*>>> groups;
  for (const auto& r : results) {
    auto& g = groups[{r.model, r.experiment}];
    g[static_cast<int>(r.difficulty)].push_back(&r.metrics);
    g[3].push_back(&r.metrics);
  }
  std::vector<AggregateMetrics> out;
  for (const auto& [key, by_level] : groups) {
    for (const auto& [level, items] : by_level) {
      AggregateMetrics a;
      a.model = key.first;
      a.experiment = key.second;
      a.difficulty = level == 3 ? "all" : std::string(to_string(static_cast<Difficulty>(level)));
      for (const auto* m : items) {
        a.fna_pct += m->fna_pct;
        a.fqa_pct += m->fqa_pct;
        a.hr_pct += m->hr_pct;
        a.mae += m->mae;
        a.gt_total += static_cast<double>(m->gt_total);
        a.pred_total += static_cast<double>(m->pred_total);
        a.tp_qty += static_cast<double>(m->tp_qty);
        a.hallucinated_qty += static_cast<double>(m->hallucinated_qty);
        if (m->parse_status == ParseStatus::failed) ++a.n_parse_failures;
      }
      const double n = static_cast<double>(items.size());
      a.n_designs = static_cast<int>(items.size());
      for (double* f : {&a.fna_pct, &a.fqa_pct, &a.hr_pct, &a.mae, &a.gt_total, &a.pred_total, &a.tp_qty,
                        &a.hallucinated_qty})
        *f /= n;
      out.push_back(std::move(a));
    }
  }
  return out;
}

}  // namespace afr
