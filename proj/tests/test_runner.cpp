#include <doctest.h>

#include <fstream>

#include <json.hpp>

#include "afr/error.hpp"
#include "afr/runner.hpp"
#include "support.hpp"

using namespace afr;
using nlohmann::json;

namespace {

RunOptions options(const std::filesystem::path& out, std::vector<ExperimentId> exps = {ExperimentId::E3}) {
  RunOptions o;
  o.experiments = std::move(exps);
  o.output_dir = out;
  o.render.width = 128;
  o.render.height = 128;
  o.concurrency = 3;
  return o;
}

Dataset samples() { return load_manifest(afr_test::samples_dir() / "manifest.json", builtin_taxonomy()); }

VlmClient mock_client(const std::filesystem::path& cache, MockFallback fb = MockFallback::error) {
  return VlmClient(ProviderConfig{}, cache, nullptr, mock_provider(afr_test::samples_dir() / "replies", fb));
}

const UnitResult& unit(const RunResult& r, const std::string& design, const std::string& exp) {
  for (const auto& u : r.units)
    if (u.design_id == design && u.experiment == exp) return u;
  FAIL("unit not found");
  return r.units.front();
}

// Unit JSON without fields that legitimately vary between runs.
json stable(json j) {
  j.erase("latency_s");
  j.erase("from_cache");
  return j;
}

}  // namespace

TEST_SUITE("runner") {
  TEST_CASE("three-design mock run") {
    afr_test::TempDir out;
    auto client = mock_client(out / "cache");
    auto r = run(samples(), builtin_taxonomy(), client, options(out.path()));
    REQUIRE(r.units.size() == 3);
    CHECK(r.failure_count() == 0);
    CHECK(r.scored().size() == 3);
    const auto& p3 = unit(r, "part_003", "E3").metrics;
    CHECK(p3.fqa_pct == 96.0);
    CHECK(p3.hr_pct == 0);
    CHECK(p3.mae == 0.3125);
    const auto& p1 = unit(r, "part_001", "E3").metrics;
    CHECK((p1.fna_pct == 100 && p1.fqa_pct == 100 && p1.hr_pct == 0 && p1.mae == 0));
    CHECK(std::filesystem::is_regular_file(unit_result_path(out.path(), "E3", "part_002")));
    CHECK(std::filesystem::is_regular_file(out / "manifest.json"));
    CHECK(std::filesystem::is_regular_file(out / "index.json"));
    CHECK(std::filesystem::is_regular_file(out / "views/part_001/iso.png"));
    CHECK_FALSE(std::filesystem::exists(out / ".lock"));

    auto manifest = json::parse(read_file(out / "manifest.json"));
    CHECK(manifest["mae_mode"] == "all_leaves");
    CHECK(manifest["template_digests"]["E3"] == template_digest(ExperimentId::E3));
    CHECK(manifest["render_params"]["digest"] == options(out.path()).render.digest());

    auto loaded = load_run(out.path(), builtin_taxonomy());
    REQUIRE(loaded.units.size() == 3);
    CHECK(loaded.units[2].metrics.fqa_pct == 96.0);
    CHECK(loaded.units[0].prediction == r.units[0].prediction);
  }

  TEST_CASE("prose reply is a parse failure, not a run failure") {
    afr_test::TempDir out;
    auto client = mock_client(out / "cache");
    auto r = run(samples(), builtin_taxonomy(), client, options(out.path(), {ExperimentId::E1}));
    CHECK(r.failure_count() == 0);
    const auto& u = unit(r, "part_003", "E1");
    CHECK(u.status == UnitStatus::ok);
    CHECK(u.metrics.parse_status == ParseStatus::failed);
    CHECK(u.parse_error.find("NoJsonFound") != std::string::npos);
    CHECK(u.metrics.fqa_pct == 0);
    CHECK(u.metrics.mae == 125.0 / 16);
  }

  TEST_CASE("rerun is served from cache with identical metrics") {
    afr_test::TempDir a, b;
    auto opts = options(a.path(), {ExperimentId::E1, ExperimentId::E5});
    auto c1 = mock_client(a / "cache");
    auto first = run(samples(), builtin_taxonomy(), c1, opts);
    CHECK(c1.provider_calls() == 6);

    auto c2 = mock_client(a / "cache");
    auto second = run(samples(), builtin_taxonomy(), c2, opts);
    CHECK(c2.provider_calls() == 0);
    CHECK(c2.cache_hits() == 6);
    for (std::size_t i = 0; i < first.units.size(); ++i)
      CHECK(stable(first.units[i].to_json(builtin_taxonomy())) == stable(second.units[i].to_json(builtin_taxonomy())));

    // Independent run directory, same inputs: same payloads.
    auto c3 = mock_client(b / "cache");
    auto third = run(samples(), builtin_taxonomy(), c3, options(b.path(), {ExperimentId::E1, ExperimentId::E5}));
    for (std::size_t i = 0; i < first.units.size(); ++i)
      CHECK(stable(first.units[i].to_json(builtin_taxonomy())) == stable(third.units[i].to_json(builtin_taxonomy())));
  }

  TEST_CASE("resume touches only the missing unit") {
    afr_test::TempDir out;
    auto opts = options(out.path());
    auto c1 = mock_client(out / "cache");
    auto first = run(samples(), builtin_taxonomy(), c1, opts);
    std::filesystem::remove(unit_result_path(out.path(), "E3", "part_002"));
    opts.resume = true;
    auto c2 = mock_client(out / "cache");
    auto p = plan(samples(), builtin_taxonomy(), c2, opts);
    CHECK(p.pending_network() == 0);
    auto second = run(samples(), builtin_taxonomy(), c2, opts);
    CHECK(c2.cache_lookups() == 1);
    CHECK(c2.provider_calls() == 0);
    CHECK(second.units.size() == 3);
    CHECK(second.units[1].metrics.fqa_pct == first.units[1].metrics.fqa_pct);
  }

  TEST_CASE("too many failures") {
    afr_test::TempDir out, scripts;
    write_file_atomic(scripts / "part_001.txt", read_file(afr_test::samples_dir() / "replies" / "part_001.txt"));
    VlmClient client(ProviderConfig{}, out / "cache", nullptr, mock_provider(scripts.path()));
    try {
      run(samples(), builtin_taxonomy(), client, options(out.path()));
      FAIL("expected TooManyFailures");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::too_many_failures);
    }
    auto loaded = load_run(out.path(), builtin_taxonomy());
    CHECK(loaded.failure_count() == 2);
    CHECK(loaded.units[0].status == UnitStatus::ok);
    CHECK(loaded.units[1].error_code == "ScriptNotFound");

    afr_test::TempDir lenient;
    auto opts = options(lenient.path());
    opts.failure_threshold_pct = 70;
    VlmClient c2(ProviderConfig{}, lenient / "cache", nullptr, mock_provider(scripts.path()));
    CHECK(run(samples(), builtin_taxonomy(), c2, opts).failure_count() == 2);
  }

  TEST_CASE("provider unavailable, lock and bad options") {
    afr_test::TempDir out;
    ProviderConfig cfg;
    cfg.kind = ProviderKind::openai_compatible;
    cfg.model_id = "gpt-test";
    cfg.api_key_env = "AFR_TEST_DEFINITELY_UNSET";
    VlmClient offline(cfg, out / "cache");
    try {
      run(samples(), builtin_taxonomy(), offline, options(out.path()));
      FAIL("expected ProviderUnavailable");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::provider_unavailable);
    }

    afr_test::TempDir locked;
    write_file_atomic(locked / ".lock", "");
    auto client = mock_client(locked / "cache");
    try {
      run(samples(), builtin_taxonomy(), client, options(locked.path()));
      FAIL("expected RunLocked");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::run_locked);
    }

    auto bad = options(out.path());
    bad.concurrency = 0;
    CHECK_THROWS_AS(run(samples(), builtin_taxonomy(), client, bad), Error);
    bad = options(out.path());
    bad.failure_threshold_pct = 101;
    CHECK_THROWS_AS(run(samples(), builtin_taxonomy(), client, bad), Error);
  }

  TEST_CASE("rescore switches the MAE mode without provider access") {
    afr_test::TempDir out;
    auto client = mock_client(out / "cache");
    run(samples(), builtin_taxonomy(), client, options(out.path()));
    auto r = rescore(out.path(), builtin_taxonomy(), MaeMode::union_of_present);
    CHECK(unit(r, "part_003", "E3").metrics.mae == 5.0 / 4);
    CHECK(unit(r, "part_003", "E3").mae_mode == MaeMode::union_of_present);
    CHECK(json::parse(read_file(out / "manifest.json"))["mae_mode"] == "union");
    auto back = rescore(out.path(), builtin_taxonomy(), MaeMode::all_leaves);
    CHECK(unit(back, "part_003", "E3").metrics.mae == 0.3125);
  }

  TEST_CASE("plan sizes") {
    afr_test::TempDir dir;
    write_file_atomic(dir / "v.png", encode_png(Image(64, 64, {200, 10, 10})));
    write_file_atomic(dir / "w.png", encode_png(Image(64, 64, {10, 200, 10})));
    json m{{"name", "hundred"}, {"designs", json::array()}};
    for (int i = 0; i < 100; ++i) {
      std::string tier = i < 33 ? "easy" : i < 66 ? "medium" : "hard";
      m["designs"].push_back({{"id", "d" + std::to_string(i)},
                              {"difficulty", tier},
                              {"views", {"v.png", "w.png", i % 2 ? "v.png" : "w.png"}},
                              {"ground_truth", {{"hole", 1 + i % 4}}}});
    }
    write_file_atomic(dir / "manifest.json", m.dump());
    auto d = load_manifest(dir / "manifest.json", builtin_taxonomy());
    auto client = mock_client(dir / "cache");
    RunOptions all;
    auto p = plan(d, builtin_taxonomy(), client, all);
    CHECK(p.units.size() == 600);
    CHECK(p.pending_network() == 600);
    for (const auto& u : p.units) CHECK(u.prepare_error.empty());

    RunOptions e1;
    e1.experiments = {ExperimentId::E1};
    CHECK(plan(filter_by_difficulty(d, Difficulty::easy), builtin_taxonomy(), client, e1).units.size() == 33);
  }

  TEST_CASE("warm cache leaves nothing pending") {
    afr_test::TempDir out;
    auto opts = options(out.path(), {ExperimentId::E2, ExperimentId::E3});
    auto client = mock_client(out / "cache");
    CHECK(plan(samples(), builtin_taxonomy(), client, opts).pending_network() == 6);
    run(samples(), builtin_taxonomy(), client, opts);
    auto p = plan(samples(), builtin_taxonomy(), client, opts);
    CHECK(p.units.size() == 6);
    CHECK(p.pending_network() == 0);
  }
}
