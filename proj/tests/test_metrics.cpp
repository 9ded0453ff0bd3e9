#include <doctest.h>

#include <cmath>
#include <random>

#include "afr/error.hpp"
#include "afr/metrics.hpp"
#include "oracle/metrics_oracle.hpp"
#include "support.hpp"

using namespace afr;
using afr_test::prediction;

namespace {

const FeatureTaxonomy& tax() { return builtin_taxonomy(); }

bool close(double a, double b, double rel = 1e-12) {
  return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)});
}

oracle::Instance random_instance(std::mt19937_64& rng) {
  oracle::Instance x;
  bool any = false;
  while (!any) {
    for (int i = 0; i < oracle::kLeaves; ++i) {
      x.gt[i] = rng() % 3 == 0 ? static_cast<std::int64_t>(rng() % 150) : 0;
      any = any || x.gt[i] > 0;
    }
  }
  for (int i = 0; i < oracle::kLeaves; ++i) {
    x.pred[i] = rng() % 3 == 0 ? static_cast<std::int64_t>(rng() % 150) : 0;
    x.pred_exists[i] = x.pred[i] > 0 || rng() % 10 == 0;
  }
  x.unmatched_qty.clear();
  for (int k = static_cast<int>(rng() % 3); k > 0; --k) x.unmatched_qty.push_back(static_cast<std::int64_t>(rng() % 20));
  return x;
}

FeatureCounts gt_of(const oracle::Instance& x) {
  FeatureCounts c;
  for (int i = 0; i < oracle::kLeaves; ++i)
    if (x.gt[i] > 0) c[tax().leaves()[i].id] = x.gt[i];
  return c;
}

ParsedPrediction pred_of(const oracle::Instance& x) {
  ParsedPrediction p;
  for (int i = 0; i < oracle::kLeaves; ++i)
    if (x.pred_exists[i] || x.pred[i] > 0) p.features[tax().leaves()[i].id] = {x.pred_exists[i], x.pred[i]};
  for (std::size_t k = 0; k < x.unmatched_qty.size(); ++k)
    p.unmatched.push_back({"invented " + std::to_string(k), x.unmatched_qty[k] > 0, x.unmatched_qty[k]});
  return p;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("simple-block example: exact and over-counting predictions") {
    FeatureCounts gt{{"hole", 1}, {"fillet_round", 4}};
    auto exact = evaluate_design(gt, prediction({{"hole", 1}, {"fillet_round", 4}}), tax());
    CHECK(exact.fna_pct == 100);
    CHECK(exact.fqa_pct == 100);
    CHECK(exact.hr_pct == 0);
    CHECK(exact.mae == 0);

    auto over = evaluate_design(gt, prediction({{"hole", 1}, {"fillet_round", 8}, {"chamfer_bevel", 8}}), tax());
    CHECK(over.fna_pct == 100);
    CHECK(over.fqa_pct == 100);
    CHECK(over.hr_pct == doctest::Approx(100.0 * 12 / 17).epsilon(1e-12));
    CHECK(std::abs(over.hr_pct - 70.6) <= 0.1);
    CHECK(over.mae == 0.75);
    CHECK(over.tp_qty == 5);
    CHECK(over.hallucinated_qty == 12);
    CHECK(over.pred_total == 17);
  }

  TEST_CASE("perforated-bracket example") {
    FeatureCounts gt{{"hole", 119}, {"slot", 4}, {"step", 1}, {"sheet_metal", 1}};
    auto m = evaluate_design(gt, prediction({{"hole", 114}, {"slot", 4}, {"step", 1}, {"sheet_metal", 1}}), tax());
    CHECK(m.fqa_pct == 96.0);
    CHECK(m.hr_pct == 0);
    CHECK(m.mae == 0.3125);
    CHECK(m.fna_pct == 100);
  }

  TEST_CASE("flange example with a substituted feature") {
    FeatureCounts gt{{"hole", 5}, {"pipe_tube", 1}};
    auto m = evaluate_design(gt, prediction({{"hole", 5}, {"boss", 1}}), tax());
    CHECK(m.fna_pct == 50);
    CHECK(m.fqa_pct == doctest::Approx(500.0 / 6));
    CHECK(m.hr_pct == doctest::Approx(100.0 / 6));
    CHECK(m.mae == 0.125);
  }

  TEST_CASE("basic conventions") {
    FeatureCounts gt{{"hole", 2}};
    auto empty = evaluate_design(gt, ParsedPrediction{}, tax());
    CHECK(empty.fna_pct == 0);
    CHECK(empty.fqa_pct == 0);
    CHECK(empty.hr_pct == 0);
    CHECK(empty.mae == 2.0 / 16);
    CHECK(empty.n_features == 16);

    CHECK(feature_quantity_accuracy(gt, prediction({{"hole", 4}})) == 100);
    CHECK(hallucination_rate(gt, prediction({{"hole", 1}})) == 0);
    CHECK_THROWS_AS(feature_name_accuracy({}, ParsedPrediction{}), Error);
    CHECK_THROWS_AS(feature_quantity_accuracy({}, ParsedPrediction{}), Error);
    try {
      mean_absolute_error({}, ParsedPrediction{}, tax(), MaeMode::union_of_present);
      FAIL("expected EmptyIndexSet");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::empty_index_set);
    }
    CHECK(mean_absolute_error(gt, prediction({{"hole", 2}}), tax(), MaeMode::union_of_present) == 0);

    auto failed = evaluate_design(gt, prediction({{"hole", 2}}), tax(), MaeMode::all_leaves, ParseStatus::failed);
    CHECK(failed.parse_status == ParseStatus::failed);
    CHECK(failed.pred_total == 0);
    CHECK(failed.mae == 2.0 / 16);
  }

  TEST_CASE("unmatched names feed hallucination but never name accuracy") {
    FeatureCounts gt{{"hole", 2}};
    auto base = prediction({{"hole", 2}});
    auto with = prediction({{"hole", 2}}, {{"Mounting Flange", 3}});
    CHECK(feature_name_accuracy(gt, with) == feature_name_accuracy(gt, base));
    CHECK(feature_quantity_accuracy(gt, with) == feature_quantity_accuracy(gt, base));
    CHECK(hallucination_rate(gt, with) == 60);
    auto a = evaluate_design(gt, base, tax());
    auto b = evaluate_design(gt, with, tax());
    CHECK(b.hallucinated_qty >= a.hallucinated_qty);
  }

  TEST_CASE("agreement with the naive oracle") {
    std::mt19937_64 rng(42);
    for (int i = 0; i < 1000; ++i) {
      auto x = random_instance(rng);
      auto gt = gt_of(x);
      auto p = pred_of(x);
      REQUIRE(close(feature_name_accuracy(gt, p), oracle::fna(x)));
      REQUIRE(close(feature_quantity_accuracy(gt, p), oracle::fqa(x)));
      REQUIRE(close(hallucination_rate(gt, p), oracle::hr(x)));
      REQUIRE(close(mean_absolute_error(gt, p, tax()), oracle::mae_all(x)));
      REQUIRE(close(mean_absolute_error(gt, p, tax(), MaeMode::union_of_present), oracle::mae_union(x)));
    }
  }

  TEST_CASE("conservation, ranges, equivalent form and count scaling") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 2000; ++i) {
      auto x = random_instance(rng);
      auto gt = gt_of(x);
      auto p = pred_of(x);
      auto m = evaluate_design(gt, p, tax());
      REQUIRE(m.tp_qty + m.hallucinated_qty == m.pred_total);
      REQUIRE(m.tp_qty <= std::min(m.gt_total, m.pred_total));
      for (double v : {m.fna_pct, m.fqa_pct, m.hr_pct}) REQUIRE((v >= 0 && v <= 100));
      REQUIRE(m.mae >= 0);
      if (m.pred_total > 0)
        REQUIRE(close(m.hr_pct, 100.0 * (1.0 - static_cast<double>(m.tp_qty) / static_cast<double>(m.pred_total)),
                      1e-9));

      const std::int64_t k = 2 + static_cast<std::int64_t>(rng() % 5);
      auto y = x;
      for (int j = 0; j < oracle::kLeaves; ++j) {
        y.gt[j] *= k;
        y.pred[j] *= k;
      }
      for (auto& q : y.unmatched_qty) q *= k;
      auto s = evaluate_design(gt_of(y), pred_of(y), tax());
      REQUIRE(close(s.fna_pct, m.fna_pct));
      REQUIRE(close(s.fqa_pct, m.fqa_pct));
      REQUIRE(close(s.hr_pct, m.hr_pct));
      REQUIRE(s.mae == static_cast<double>(k) * m.mae);
    }
  }

  TEST_CASE("perfect scores iff exact prediction") {
    FeatureCounts gt{{"hole", 3}, {"rib", 2}};
    auto m = evaluate_design(gt, prediction({{"hole", 3}, {"rib", 2}}), tax());
    CHECK((m.fna_pct == 100 && m.fqa_pct == 100 && m.hr_pct == 0 && m.mae == 0));
    for (auto p : {prediction({{"hole", 3}, {"rib", 2}}, {{"Knurl", 1}}), prediction({{"hole", 3}, {"rib", 1}}),
                   prediction({{"hole", 3}, {"rib", 2}, {"draft", 1}})}) {
      auto n = evaluate_design(gt, p, tax());
      CHECK_FALSE((n.fna_pct == 100 && n.fqa_pct == 100 && n.hr_pct == 0 && n.mae == 0));
    }
  }

  TEST_CASE("the two MAE modes differ by the index-set size") {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 500; ++i) {
      auto x = random_instance(rng);
      int n_union = 0;
      for (int j = 0; j < oracle::kLeaves; ++j) n_union += (x.gt[j] > 0 || x.pred[j] > 0) ? 1 : 0;
      auto gt = gt_of(x);
      auto p = pred_of(x);
      double all = mean_absolute_error(gt, p, tax());
      double uni = mean_absolute_error(gt, p, tax(), MaeMode::union_of_present);
      REQUIRE(close(all * 16, uni * n_union, 1e-12));
      REQUIRE(close(uni, oracle::mae_union(x)));
    }
  }

  TEST_CASE("aggregation") {
    auto mk = [](std::string exp, Difficulty d, std::string id, double mae, ParseStatus st = ParseStatus::ok) {
      ScoredDesign s{"m", std::move(exp), d, std::move(id), {}};
      s.metrics.mae = mae;
      s.metrics.fna_pct = mae * 10;
      s.metrics.parse_status = st;
      return s;
    };
    auto rows = aggregate({mk("E1", Difficulty::easy, "a", 0.0), mk("E1", Difficulty::easy, "b", 1.0)});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].difficulty == "easy");
    CHECK(rows[0].mae == 0.5);
    CHECK(rows[1].difficulty == "all");
    CHECK(rows[1].n_designs == 2);

    auto single = aggregate({mk("E2", Difficulty::hard, "a", 0.3)});
    CHECK(single.size() == 2);
    CHECK(single[0].mae == 0.3);
    CHECK(single[1].mae == 0.3);

    auto tiers = aggregate({mk("E3", Difficulty::hard, "c", 3.0, ParseStatus::failed), mk("E3", Difficulty::easy, "a", 1.0),
                            mk("E3", Difficulty::medium, "b", 2.0), mk("E1", Difficulty::easy, "a", 1.0)});
    REQUIRE(tiers.size() == 6);
    CHECK(tiers[0].experiment == "E1");
    CHECK(tiers[2].difficulty == "easy");
    CHECK(tiers[3].difficulty == "medium");
    CHECK(tiers[4].difficulty == "hard");
    CHECK(tiers[4].n_parse_failures == 1);
    CHECK(tiers[5].difficulty == "all");
    CHECK(tiers[5].mae == 2.0);
    CHECK(tiers[5].n_parse_failures == 1);
  }
}
