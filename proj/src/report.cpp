#include "afr/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "afr/error.hpp"
#include "afr/util.hpp"

namespace afr {

using nlohmann::ordered_json;

namespace {

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string header_lines(const ReportProvenance& p, std::string_view prefix) {
  std::string out;
  out += std::string(prefix) + "manifest_digest: " + p.manifest_digest + "\n";
  out += std::string(prefix) + "mae_mode: " + p.mae_mode + "\n";
  out += std::string(prefix) + "parse_failure_policy: " + p.parse_failure_policy + "\n";
  out += std::string(prefix) + "aggregation: " + p.aggregation + "\n";
  return out;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

int experiment_rank(const std::string& e) {
  try {
    return to_number(parse_experiment(e));
  } catch (const Error&) {
    return 100;
  }
}

struct MetricInfo {
  const char* key;
  const char* title;
  const char* axis;
  bool percent;
};

MetricInfo info(ChartMetric m) {
  switch (m) {
    case ChartMetric::fna:
      return {"fna", "Feature name accuracy (FNA)", "FNA (%)", true};
    case ChartMetric::fqa:
      return {"fqa", "Feature quantity accuracy (FQA)", "FQA (%)", true};
    case ChartMetric::hr:
      return {"hr", "Hallucination rate (HR)", "HR (%)", true};
    case ChartMetric::mae:
      break;
  }
  return {"mae", "Mean absolute error (MAE)", "MAE (count)", false};
}

double value_of(const AggregateMetrics& a, ChartMetric m) {
  switch (m) {
    case ChartMetric::fna:
      return a.fna_pct;
    case ChartMetric::fqa:
      return a.fqa_pct;
    case ChartMetric::hr:
      return a.hr_pct;
    case ChartMetric::mae:
      break;
  }
  return a.mae;
}

// Smallest 1/2/5 x 10^k that is >= v.
double nice_ceiling(double v) {
  if (!(v > 0)) return 1.0;
  double p = std::pow(10.0, std::floor(std::log10(v)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * p >= v) return m * p;
  return 10.0 * p;
}

constexpr const char* kPalette[] = {"#4C72B0", "#DD8452", "#55A868", "#C44E52", "#8172B3",
                                    "#937860", "#DA8BC3", "#8C8C8C", "#CCB974", "#64B5CD"};

}  // namespace

ReportProvenance provenance_for(const std::vector<RunResult>& runs) {
  ReportProvenance p;
  Sha256 h;
  std::set<std::string> modes;
  for (const auto& r : runs) {
    h.add_field(r.manifest.dump());
    for (const auto& u : r.units)
      if (u.status == UnitStatus::ok) modes.insert(std::string(to_string(u.mae_mode)));
  }
  p.manifest_digest = "sha256:" + h.hex_digest();
  if (modes.empty() && !runs.empty() && runs.front().manifest.contains("mae_mode"))
    modes.insert(runs.front().manifest["mae_mode"].get<std::string>());
  for (const auto& m : modes) p.mae_mode += (p.mae_mode.empty() ? "" : "+") + m;
  if (p.mae_mode.empty()) p.mae_mode = "n/a";
  return p;
}

std::string per_design_csv(const std::vector<RunResult>& runs, const ReportProvenance& prov) {
  std::vector<const UnitResult*> rows;
  std::size_t failed = 0;
  for (const auto& r : runs) {
    for (const auto& u : r.units) {
      if (u.status == UnitStatus::ok) {
        rows.push_back(&u);
      } else {
        ++failed;
      }
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const UnitResult* a, const UnitResult* b) {
    if (a->model != b->model) return a->model < b->model;
    return experiment_rank(a->experiment) < experiment_rank(b->experiment);
  });
  std::string out = header_lines(prov, "# ");
  out += "# excluded_failed_units: " + std::to_string(failed) + "\n";
  out += "model,experiment,difficulty,design_id,fna,fqa,hr,mae,gt_total,pred_total,tp,hallucinated,parse_status\n";
  for (const auto* u : rows) {
    const auto& m = u->metrics;
    out += csv_field(u->model) + "," + csv_field(u->experiment) + "," + std::string(to_string(u->difficulty)) + "," +
           csv_field(u->design_id) + "," + format_sig4(m.fna_pct) + "," + format_sig4(m.fqa_pct) + "," +
           format_sig4(m.hr_pct) + "," + format_sig4(m.mae) + "," + std::to_string(m.gt_total) + "," +
           std::to_string(m.pred_total) + "," + std::to_string(m.tp_qty) + "," + std::to_string(m.hallucinated_qty) +
           "," + std::string(to_string(m.parse_status)) + "\n";
  }
  return out;
}

std::string aggregate_csv(const std::vector<AggregateMetrics>& rows, const ReportProvenance& prov) {
  std::string out = header_lines(prov, "# ");
  out += "model,experiment,difficulty,n_designs,n_parse_failures,fna,fqa,hr,mae,gt_total,pred_total,tp,hallucinated\n";
  for (const auto& a : rows) {
    out += csv_field(a.model) + "," + csv_field(a.experiment) + "," + a.difficulty + "," +
           std::to_string(a.n_designs) + "," + std::to_string(a.n_parse_failures) + "," + format_sig4(a.fna_pct) +
           "," + format_sig4(a.fqa_pct) + "," + format_sig4(a.hr_pct) + "," + format_sig4(a.mae) + "," +
           format_sig4(a.gt_total) + "," + format_sig4(a.pred_total) + "," + format_sig4(a.tp_qty) + "," +
           format_sig4(a.hallucinated_qty) + "\n";
  }
  return out;
}

std::string aggregate_json(const std::vector<AggregateMetrics>& rows, const ReportProvenance& prov) {
  ordered_json doc;
  doc["provenance"] = {{"manifest_digest", prov.manifest_digest},
                       {"mae_mode", prov.mae_mode},
                       {"parse_failure_policy", prov.parse_failure_policy},
                       {"aggregation", prov.aggregation}};
  ordered_json list = ordered_json::array();
  for (const auto& a : rows) {
    list.push_back({{"model", a.model},
                    {"experiment", a.experiment},
                    {"difficulty", a.difficulty},
                    {"n_designs", a.n_designs},
                    {"n_parse_failures", a.n_parse_failures},
                    {"fna_pct", a.fna_pct},
                    {"fqa_pct", a.fqa_pct},
                    {"hr_pct", a.hr_pct},
                    {"mae", a.mae},
                    {"gt_total", a.gt_total},
                    {"pred_total", a.pred_total},
                    {"tp_qty", a.tp_qty},
                    {"hallucinated_qty", a.hallucinated_qty}});
  }
  doc["rows"] = std::move(list);
  return doc.dump(2) + "\n";
}

std::vector<std::filesystem::path> write_tables(const std::vector<RunResult>& runs, const std::filesystem::path& out) {
  std::vector<ScoredDesign> scored;
  for (const auto& r : runs) {
    auto s = r.scored();
    scored.insert(scored.end(), s.begin(), s.end());
  }
  if (scored.empty()) throw Error(Errc::invalid_argument, "no scored results to report");
  auto prov = provenance_for(runs);
  auto rows = aggregate(scored);
  std::vector<std::filesystem::path> written{out / "per_design.csv", out / "aggregate.csv", out / "aggregate.json"};
  write_file_atomic(written[0], per_design_csv(runs, prov));
  write_file_atomic(written[1], aggregate_csv(rows, prov));
  write_file_atomic(written[2], aggregate_json(rows, prov));
  return written;
}

std::string chart_svg(const std::vector<AggregateMetrics>& aggregates, ChartMetric metric,
                      const ReportProvenance& prov) {
  const MetricInfo mi = info(metric);
  std::vector<const AggregateMetrics*> rows;
  for (const auto& a : aggregates)
    if (a.difficulty == "all") rows.push_back(&a);
  if (rows.empty()) throw Error(Errc::invalid_argument, "no aggregate rows to chart");

  std::vector<std::string> models, experiments;
  for (const auto* a : rows) {
    if (std::find(models.begin(), models.end(), a->model) == models.end()) models.push_back(a->model);
    if (std::find(experiments.begin(), experiments.end(), a->experiment) == experiments.end())
      experiments.push_back(a->experiment);
  }
  std::stable_sort(experiments.begin(), experiments.end(),
                   [](const std::string& a, const std::string& b) { return experiment_rank(a) < experiment_rank(b); });

  double ymax = 100.0;
  if (!mi.percent) {
    double hi = 0;
    for (const auto* a : rows) hi = std::max(hi, value_of(*a, metric));
    ymax = nice_ceiling(hi);
  }
  constexpr double kPlotH = 300, kLeft = 70, kTop = 50, kBarW = 18, kGroupPad = 16, kLegendW = 170;
  const double group_w = kBarW * static_cast<double>(models.size()) + kGroupPad;
  const double plot_w = group_w * static_cast<double>(experiments.size());
  const double width = kLeft + plot_w + kLegendW, height = kTop + kPlotH + 60;
  const double scale = kPlotH / ymax;
  const double base_y = kTop + kPlotH;

  std::ostringstream s;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << fixed(width) << "\" height=\""
    << fixed(height) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<desc>" << xml_escape(header_lines(prov, "")) << "</desc>\n";
  s << "<rect x=\"0\" y=\"0\" width=\"" << fixed(width) << "\" height=\"" << fixed(height) << "\" fill=\"#ffffff\"/>\n";
  s << "<text x=\"" << fixed(kLeft) << "\" y=\"24\" font-size=\"15\">" << mi.title << "</text>\n";
  // y axis with five ticks
  s << "<g class=\"axis\" stroke=\"#333333\">\n";
  s << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(kTop) << "\" x2=\"" << fixed(kLeft) << "\" y2=\""
    << fixed(base_y) << "\"/>\n";
  s << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(base_y) << "\" x2=\"" << fixed(kLeft + plot_w)
    << "\" y2=\"" << fixed(base_y) << "\"/>\n";
  s << "</g>\n<g class=\"ticks\" text-anchor=\"end\">\n";
  for (int i = 0; i <= 5; ++i) {
    double v = ymax * i / 5.0, y = base_y - v * scale;
    s << "<line x1=\"" << fixed(kLeft - 4) << "\" y1=\"" << fixed(y) << "\" x2=\"" << fixed(kLeft) << "\" y2=\""
      << fixed(y) << "\" stroke=\"#333333\"/>";
    s << "<text x=\"" << fixed(kLeft - 7) << "\" y=\"" << fixed(y + 4) << "\">" << format_sig4(v) << "</text>\n";
  }
  s << "</g>\n";
  s << "<text transform=\"translate(18," << fixed(kTop + kPlotH / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
    << mi.axis << "</text>\n";
  s << "<text x=\"" << fixed(kLeft + plot_w / 2) << "\" y=\"" << fixed(base_y + 45)
    << "\" text-anchor=\"middle\">Experiment</text>\n";

  s << "<g class=\"bars\" data-metric=\"" << mi.key << "\" data-scale=\"" << fixed(scale) << "\" data-baseline=\""
    << fixed(base_y) << "\">\n";
  for (std::size_t ei = 0; ei < experiments.size(); ++ei) {
    const double gx = kLeft + group_w * static_cast<double>(ei) + kGroupPad / 2;
    s << "<text x=\"" << fixed(gx + kBarW * static_cast<double>(models.size()) / 2) << "\" y=\"" << fixed(base_y + 18)
      << "\" text-anchor=\"middle\">" << xml_escape(experiments[ei]) << "</text>\n";
    for (std::size_t mi_idx = 0; mi_idx < models.size(); ++mi_idx) {
      auto it = std::find_if(rows.begin(), rows.end(), [&](const AggregateMetrics* a) {
        return a->model == models[mi_idx] && a->experiment == experiments[ei];
      });
      if (it == rows.end()) continue;
      const std::string label = format_sig4(value_of(**it, metric));
      const double v = std::stod(label);
      const double h = std::max(0.0, v) * scale;
      s << "<rect x=\"" << fixed(gx + kBarW * static_cast<double>(mi_idx)) << "\" y=\"" << fixed(base_y - h)
        << "\" width=\"" << fixed(kBarW - 2) << "\" height=\"" << fixed(h) << "\" fill=\""
        << kPalette[mi_idx % std::size(kPalette)] << "\" data-model=\"" << xml_escape(models[mi_idx])
        << "\" data-experiment=\"" << xml_escape(experiments[ei]) << "\" data-metric=\"" << mi.key
        << "\" data-value=\"" << label << "\"><title>" << xml_escape(models[mi_idx]) << " "
        << xml_escape(experiments[ei]) << ": " << label << "</title></rect>\n";
    }
  }
  s << "</g>\n<g class=\"legend\">\n";
  for (std::size_t k = 0; k < models.size(); ++k) {
    double y = kTop + 18.0 * static_cast<double>(k);
    s << "<rect x=\"" << fixed(kLeft + plot_w + 20) << "\" y=\"" << fixed(y) << "\" width=\"12\" height=\"12\" fill=\""
      << kPalette[k % std::size(kPalette)] << "\"/>";
    s << "<text x=\"" << fixed(kLeft + plot_w + 38) << "\" y=\"" << fixed(y + 10) << "\">" << xml_escape(models[k])
      << "</text>\n";
  }
  s << "</g>\n</svg>\n";
  return s.str();
}

std::vector<std::filesystem::path> emit_charts(const std::vector<AggregateMetrics>& aggregates,
                                               const std::filesystem::path& out, const ReportProvenance& prov) {
  std::vector<std::filesystem::path> written;
  for (auto m : {ChartMetric::fna, ChartMetric::fqa, ChartMetric::hr, ChartMetric::mae}) {
    auto path = out / (std::string(info(m).key) + ".svg");
    write_file_atomic(path, chart_svg(aggregates, m, prov));
    written.push_back(path);
  }
  return written;
}

}  // namespace afr
