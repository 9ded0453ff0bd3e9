#include <doctest.h>

#include <regex>

#include <json.hpp>

#include "afr/error.hpp"
#include "afr/report.hpp"
#include "support.hpp"

using namespace afr;

namespace {

const RunResult& six_experiment_run() {
  static afr_test::TempDir out;
  static const RunResult r = [] {
    RunOptions o;
    o.output_dir = out.path();
    o.render.width = 96;
    o.render.height = 96;
    VlmClient client(ProviderConfig{}, out / "cache", nullptr, mock_provider(afr_test::samples_dir() / "replies"));
    return run(load_manifest(afr_test::samples_dir() / "manifest.json", builtin_taxonomy()), builtin_taxonomy(), client, o);
  }();
  return r;
}

struct Bar {
  std::string experiment;
  double value, height;
};

std::vector<Bar> bars(const std::string& svg, double& scale) {
  std::smatch g;
  REQUIRE(std::regex_search(svg, g, std::regex(R"re(<g class="bars"[^>]*data-scale="([0-9.]+)")re")));
  scale = std::stod(g[1]);
  std::vector<Bar> out;
  std::regex rect(R"re(<rect[^>]*height="([0-9.]+)"[^>]*data-experiment="(E[1-6])"[^>]*data-value="([^"]+)")re");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), rect); it != std::sregex_iterator(); ++it)
    out.push_back({(*it)[2], std::stod((*it)[3]), std::stod((*it)[1])});
  return out;
}

}  // namespace

TEST_SUITE("report") {
  TEST_CASE("per-design table for an exact prediction") {
    const auto& r = six_experiment_run();
    auto csv = per_design_csv({r}, provenance_for({r}));
    CHECK(csv.rfind("# manifest_digest: sha256:", 0) == 0);
    CHECK(csv.find("model,experiment,difficulty,design_id,fna,fqa,hr,mae,gt_total,pred_total,tp,hallucinated,parse_status\n") !=
          std::string::npos);
    CHECK(csv.find("mock,E6,easy,part_001,100,100,0,0,5,5,5,0,ok\n") != std::string::npos);
    CHECK(csv.find("mock,E5,easy,part_001,100,100,70.59,0.75,5,17,5,12,ok\n") != std::string::npos);
    CHECK(csv.find("mock,E1,hard,part_003,0,0,0,7.812,125,0,0,0,failed\n") != std::string::npos);
  }

  TEST_CASE("aggregate tables and files") {
    const auto& r = six_experiment_run();
    auto prov = provenance_for({r});
    auto rows = aggregate(r.scored());
    CHECK(rows.size() == 6 * 4);
    auto csv = aggregate_csv(rows, prov);
    CHECK(csv.find("mock,E3,all,3,0,83.33,93.11,5.556,0.1458,") != std::string::npos);
    auto j = nlohmann::json::parse(aggregate_json(rows, prov));
    CHECK(j["provenance"]["mae_mode"] == "all_leaves");
    CHECK(j["rows"].size() == rows.size());

    afr_test::TempDir out;
    auto files = write_tables({r}, out.path());
    CHECK(files.size() == 3);
    for (const auto& f : files) CHECK(read_file(f).find(prov.manifest_digest) != std::string::npos);
    CHECK_THROWS_AS(write_tables({}, out / "empty"), Error);
    CHECK_FALSE(std::filesystem::exists(out / "empty" / "per_design.csv"));
  }

  TEST_CASE("two experiments on one design") {
    ScoredDesign a{"m", "E1", Difficulty::medium, "x", {}}, b{"m", "E2", Difficulty::medium, "x", {}};
    a.metrics.fqa_pct = 40;
    b.metrics.fqa_pct = 60;
    auto rows = aggregate({a, b});
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].difficulty == "medium");
    CHECK(rows[1].difficulty == "all");
    CHECK(rows[1].fqa_pct == 40);
    CHECK(rows[3].fqa_pct == 60);
  }

  TEST_CASE("charts match the aggregate table") {
    const auto& r = six_experiment_run();
    auto prov = provenance_for({r});
    auto rows = aggregate(r.scored());
    afr_test::TempDir out;
    auto files = emit_charts(rows, out.path(), prov);
    REQUIRE(files.size() == 4);
    for (auto metric : {ChartMetric::fna, ChartMetric::fqa, ChartMetric::hr, ChartMetric::mae}) {
      auto svg = chart_svg(rows, metric, prov);
      CHECK(svg == chart_svg(rows, metric, prov));
      CHECK(svg.find(prov.manifest_digest) != std::string::npos);
      double scale = 0;
      auto bs = bars(svg, scale);
      REQUIRE(bs.size() == 6);
      for (const auto& bar : bs) {
        const AggregateMetrics* row = nullptr;
        for (const auto& x : rows)
          if (x.experiment == bar.experiment && x.difficulty == "all") row = &x;
        REQUIRE(row);
        double table = metric == ChartMetric::fna   ? row->fna_pct
                       : metric == ChartMetric::fqa ? row->fqa_pct
                       : metric == ChartMetric::hr  ? row->hr_pct
                                                    : row->mae;
        CHECK(bar.value == std::stod(format_sig4(table)));
        CHECK(bar.height == doctest::Approx(bar.value * scale).epsilon(1e-4));
      }
    }
    CHECK(read_file(out / "fqa.svg").find("FQA (%)") != std::string::npos);
    CHECK(read_file(out / "mae.svg").find("MAE (count)") != std::string::npos);
  }
}
