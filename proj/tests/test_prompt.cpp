#include <doctest.h>

#include <json.hpp>

#include "afr/assets.hpp"
#include "afr/error.hpp"
#include "afr/prompt.hpp"
#include "afr/response_parser.hpp"
#include "support.hpp"

using namespace afr;

namespace {

RenderParams small() {
  RenderParams p;
  p.width = 96;
  p.height = 96;
  return p;
}

RenderedViewSet views(std::size_t n) {
  auto all = default_views();
  all.resize(n);
  return render_view_set(afr_test::box_mesh({2, 1, 1}), all, small());
}

std::size_t occurrences(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto i = hay.find(needle); i != std::string::npos; i = hay.find(needle, i + 1)) ++n;
  return n;
}

const FewShotExample& exemplar() {
  static const FewShotExample ex = builtin_fewshot_example(small());
  return ex;
}

}  // namespace

TEST_SUITE("prompt") {
  TEST_CASE("experiment table") {
    CHECK(experiment_spec(ExperimentId::E1).shots == Shots::zero);
    CHECK(experiment_spec(ExperimentId::E1).views == ViewMode::single);
    CHECK(experiment_spec(ExperimentId::E1).structure == PromptStructure::parallel);
    CHECK(experiment_spec(ExperimentId::E2).structure == PromptStructure::sequential);
    CHECK(experiment_spec(ExperimentId::E3).views == ViewMode::multi);
    CHECK(experiment_spec(ExperimentId::E4).shots == Shots::few);
    CHECK(experiment_spec(ExperimentId::E4).views == ViewMode::multi);
    CHECK(experiment_spec(ExperimentId::E4).structure == PromptStructure::sequential);
    CHECK(experiment_spec(ExperimentId::E5).structure == PromptStructure::cot);
    CHECK(experiment_spec(ExperimentId::E5).shots == Shots::zero);
    CHECK(experiment_spec(ExperimentId::E6).shots == Shots::few);
    CHECK(experiment_spec(ExperimentId::E6).structure == PromptStructure::cot);
    CHECK(parse_experiment("4") == ExperimentId::E4);
    CHECK(parse_experiment("E6") == ExperimentId::E6);
    CHECK_THROWS_AS(parse_experiment("7"), Error);
    CHECK_THROWS_AS(parse_experiment("x"), Error);
  }

  TEST_CASE("template fidelity for all six experiments") {
    const auto& t = builtin_taxonomy();
    const std::string block = render_feature_list_block(t);
    for (auto id : kAllExperiments) {
      std::string text = build_prompt_text(id, t);
      CHECK(occurrences(text, block) == 1);
      auto at = text.find(block);
      std::string stripped = text.substr(0, at) + std::string(kFeaturePlaceholder) + text.substr(at + block.size());
      CHECK_MESSAGE(stripped == embedded_asset(experiment_spec(id).template_asset), to_string(id));
      CHECK(template_text(id) == embedded_asset(experiment_spec(id).template_asset));
      CHECK(occurrences(std::string(template_text(id)), std::string(kFeaturePlaceholder)) == 1);
      CHECK(template_digest(id) == "sha256:" + sha256_hex(template_text(id)));
    }
  }

  TEST_CASE("wording anchors") {
    const auto& t = builtin_taxonomy();
    CHECK(build_prompt_text(ExperimentId::E1, t).rfind("You are provided with a CAD image.", 0) == 0);
    CHECK(build_prompt_text(ExperimentId::E5, t).find("Count the occurrences of this feature in the image.") !=
          std::string::npos);
    CHECK(build_prompt_text(ExperimentId::E2, t).find(
              "Go through the COMPLETE list of manufacturing features one by one.") != std::string::npos);
    CHECK(build_prompt_text(ExperimentId::E3, t).find("Examine **each views** of the part") != std::string::npos);
  }

  TEST_CASE("bundles carry the right attachments") {
    const auto& t = builtin_taxonomy();
    auto one = views(1), three = views(3);
    auto b1 = build_prompt(ExperimentId::E1, t, one, std::nullopt);
    CHECK(b1.image_count(ImageRole::query) == 1);
    CHECK(b1.template_segment() == build_prompt_text(ExperimentId::E1, t));
    CHECK(b1.schema_id == "identified_features/v1");

    auto b3 = build_prompt(ExperimentId::E3, t, three, std::nullopt);
    CHECK(b3.image_count(ImageRole::query) == 3);
    auto m3 = build_prompt(ExperimentId::E3, t, three, std::nullopt, MultiImageMode::montage);
    CHECK(m3.image_count(ImageRole::query) == 1);
    CHECK(m3.delivery == MultiImageMode::montage);
    CHECK(m3.segments.back().text == compose_montage(three, MontageLayout::horizontal));

    auto b4 = build_prompt(ExperimentId::E4, t, three, exemplar());
    CHECK(b4.image_count(ImageRole::example) == 2);
    CHECK(b4.image_count(ImageRole::query) == 3);
    // Example block precedes the query images.
    std::size_t answer_at = 0, first_query = 0;
    for (std::size_t i = 0; i < b4.segments.size(); ++i) {
      const auto& s = b4.segments[i];
      if (s.kind == PromptSegment::Kind::text && s.text.rfind(std::string(kExampleAnswerLabel), 0) == 0) answer_at = i;
      if (s.kind == PromptSegment::Kind::image && s.role == ImageRole::query && first_query == 0) first_query = i;
    }
    CHECK(answer_at > 0);
    CHECK(answer_at < first_query);
    CHECK(occurrences(b4.full_text(), render_feature_list_block(t)) == 1);

    CHECK(build_prompt(ExperimentId::E1, t, one, std::nullopt).full_text() == b1.full_text());
  }

  TEST_CASE("precondition errors") {
    const auto& t = builtin_taxonomy();
    auto code = [&](auto f) {
      try {
        f();
      } catch (const Error& e) {
        return e.code();
      }
      return Errc::invalid_argument;
    };
    CHECK(code([&] { build_prompt(ExperimentId::E1, t, views(3), std::nullopt); }) == Errc::view_count_mismatch);
    CHECK(code([&] { build_prompt(ExperimentId::E3, t, views(1), std::nullopt); }) == Errc::view_count_mismatch);
    CHECK(code([&] { build_prompt(ExperimentId::E6, t, views(3), std::nullopt); }) == Errc::missing_few_shot_example);
    CHECK_THROWS_AS(build_prompt(ExperimentId::E5, t, views(3), exemplar()), Error);
  }

  TEST_CASE("built-in few-shot exemplar") {
    const auto& t = builtin_taxonomy();
    const auto& ex = exemplar();
    CHECK(ex.images.size() == 2);
    auto j = nlohmann::json::parse(ex.answer_json);
    bool found = false;
    for (const auto& e : j["identified_features"])
      if (e["feature_name"] == "Hole (Through / Blind Hole)") found = e["quantity"] == 2;
    CHECK(found);
    auto p = parse_features(ex.answer_json, t);
    CHECK(p.unmatched.empty());
    CHECK(p.warnings.empty());
    CHECK(p.features.size() >= 10);
    CHECK(builtin_fewshot_example(small()).images == ex.images);
  }
}
