#include "afr/prompt.hpp"

#include <array>
#include <filesystem>

#include "afr/assets.hpp"
#include "afr/error.hpp"
#include "afr/util.hpp"

namespace afr {

namespace {

const std::array<ExperimentSpec, 6>& spec_table() {
  static const std::array<ExperimentSpec, 6> table{{
      {ExperimentId::E1, Shots::zero, ViewMode::single, PromptStructure::parallel, "templates/prompt1.txt"},
      {ExperimentId::E2, Shots::zero, ViewMode::single, PromptStructure::sequential, "templates/prompt2.txt"},
      {ExperimentId::E3, Shots::zero, ViewMode::multi, PromptStructure::sequential, "templates/prompt3.txt"},
      {ExperimentId::E4, Shots::few, ViewMode::multi, PromptStructure::sequential, "templates/prompt4.txt"},
      {ExperimentId::E5, Shots::zero, ViewMode::multi, PromptStructure::cot, "templates/prompt5.txt"},
      {ExperimentId::E6, Shots::few, ViewMode::multi, PromptStructure::cot, "templates/prompt6.txt"},
  }};
  return table;
}

}  // namespace

int to_number(ExperimentId id) { return static_cast<int>(id); }

std::string to_string(ExperimentId id) { return "E" + std::to_string(to_number(id)); }

ExperimentId parse_experiment(std::string_view s) {
  std::string_view digits = s;
  if (!digits.empty() && (digits.front() == 'E' || digits.front() == 'e')) digits.remove_prefix(1);
  if (digits.size() == 1 && digits[0] >= '1' && digits[0] <= '6') return static_cast<ExperimentId>(digits[0] - '0');
  throw Error(Errc::invalid_argument, "unknown experiment \"" + std::string(s) + "\" (expected 1-6)");
}

const ExperimentSpec& experiment_spec(ExperimentId id) { return spec_table().at(to_number(id) - 1); }

std::string_view template_text(ExperimentId id) { return embedded_asset(experiment_spec(id).template_asset); }

std::string template_digest(ExperimentId id) { return "sha256:" + sha256_hex(template_text(id)); }

std::string build_prompt_text(ExperimentId id, const FeatureTaxonomy& t) {
  std::string text(template_text(id));
  auto pos = text.find(kFeaturePlaceholder);
  if (pos == std::string::npos || text.find(kFeaturePlaceholder, pos + 1) != std::string::npos)
    throw Error(Errc::missing_asset, experiment_spec(id).template_asset + " must contain the placeholder exactly once");
  text.replace(pos, kFeaturePlaceholder.size(), render_feature_list_block(t));
  return text;
}

std::string_view to_string(MultiImageMode m) { return m == MultiImageMode::separate ? "separate" : "montage"; }

MultiImageMode parse_multi_image_mode(std::string_view s) {
  if (s == "separate") return MultiImageMode::separate;
  if (s == "montage") return MultiImageMode::montage;
  throw Error(Errc::invalid_argument, "multi-image mode must be separate or montage");
}

PromptSegment PromptSegment::make_text(std::string s) {
  PromptSegment seg;
  seg.kind = Kind::text;
  seg.text = std::move(s);
  return seg;
}

PromptSegment PromptSegment::make_image(std::string bytes, std::string media_type, ImageRole role) {
  PromptSegment seg;
  seg.kind = Kind::image;
  seg.text = std::move(bytes);
  seg.media_type = std::move(media_type);
  seg.role = role;
  return seg;
}

std::string PromptBundle::full_text() const {
  std::string out;
  for (const auto& s : segments) {
    if (s.kind != PromptSegment::Kind::text) continue;
    if (!out.empty()) out += "\n\n";
    out += s.text;
  }
  return out;
}

std::size_t PromptBundle::image_count(ImageRole role) const {
  std::size_t n = 0;
  for (const auto& s : segments)
    if (s.kind == PromptSegment::Kind::image && s.role == role) ++n;
  return n;
}

PromptBundle build_prompt(ExperimentId id, const FeatureTaxonomy& t, const RenderedViewSet& images,
                          const std::optional<FewShotExample>& fewshot, MultiImageMode mode) {
  const auto& spec = experiment_spec(id);
  const std::size_t want = spec.views == ViewMode::single ? 1 : 3;
  if (images.views.size() != want)
    throw Error(Errc::view_count_mismatch, to_string(id) + " needs " + std::to_string(want) + " view(s), got " +
                                               std::to_string(images.views.size()));
  if (spec.shots == Shots::few && !fewshot)
    throw Error(Errc::missing_few_shot_example, to_string(id) + " is a few-shot experiment");
  if (spec.shots == Shots::zero && fewshot)
    throw Error(Errc::invalid_argument, to_string(id) + " is zero-shot; no example may be supplied");

  PromptBundle b;
  b.experiment = id;
  b.schema_id = "identified_features/v1";
  b.delivery = spec.views == ViewMode::multi ? mode : MultiImageMode::separate;
  b.segments.push_back(PromptSegment::make_text(build_prompt_text(id, t)));

  if (fewshot) {
    if (fewshot->images.empty() || fewshot->images.size() > 2)
      throw Error(Errc::invalid_argument, "few-shot example carries 1 or 2 images");
    for (const auto& img : fewshot->images)
      b.segments.push_back(PromptSegment::make_image(img, std::string(sniff_media_type(img)), ImageRole::example));
    b.segments.push_back(PromptSegment::make_text(std::string(kExampleAnswerLabel) + fewshot->answer_json));
  }

  if (b.delivery == MultiImageMode::montage) {
    b.segments.push_back(
        PromptSegment::make_image(compose_montage(images, MontageLayout::horizontal), "image/png", ImageRole::query));
  } else {
    for (const auto& v : images.views) b.segments.push_back(PromptSegment::make_image(v.bytes, v.media_type, ImageRole::query));
  }
  return b;
}

FewShotExample builtin_fewshot_example(const RenderParams& params) {
  FewShotExample ex;
  const auto dir = asset_dir() / "fewshot";
  for (const char* name : {"exemplar_plate.stl", "exemplar_base.stl"}) {
    auto path = dir / name;
    if (!std::filesystem::exists(path)) throw Error(Errc::missing_asset, path.string());
    ex.images.push_back(render_view(load_mesh(path), view_by_name("iso"), params));
  }
  ex.answer_json = std::string(embedded_asset("fewshot/answer.json"));
  return ex;
}

}  // namespace afr
