#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "afr/render.hpp"
#include "afr/taxonomy.hpp"

namespace afr {

enum class ExperimentId { E1 = 1, E2, E3, E4, E5, E6 };

inline constexpr ExperimentId kAllExperiments[] = {ExperimentId::E1, ExperimentId::E2, ExperimentId::E3,
                                                   ExperimentId::E4, ExperimentId::E5, ExperimentId::E6};

int to_number(ExperimentId id);
std::string to_string(ExperimentId id);  // "E3"
// Accepts 1..6 or "E1".."E6". Throws Error(invalid_argument).
ExperimentId parse_experiment(std::string_view s);

enum class Shots { zero, few };
enum class ViewMode { single, multi };
enum class PromptStructure { parallel, sequential, cot };

struct ExperimentSpec {
  ExperimentId id;
  Shots shots;
  ViewMode views;
  PromptStructure structure;
  std::string template_asset;  // e.g. "templates/prompt1.txt"
};

const ExperimentSpec& experiment_spec(ExperimentId id);

inline constexpr std::string_view kFeaturePlaceholder = "{manufacturing_features_names}";

std::string_view template_text(ExperimentId id);
std::string template_digest(ExperimentId id);

// Template with the feature-list block interpolated.
std::string build_prompt_text(ExperimentId id, const FeatureTaxonomy& t);

struct FewShotExample {
  std::vector<std::string> images;  // PNG bytes, 1..2
  std::string answer_json;
};

enum class MultiImageMode { separate, montage };

std::string_view to_string(MultiImageMode m);
MultiImageMode parse_multi_image_mode(std::string_view s);

enum class ImageRole { query, example };

struct PromptSegment {
  enum class Kind { text, image };
  Kind kind = Kind::text;
  std::string text;   // prompt text, or raw image bytes for image segments
  std::string media_type;
  ImageRole role = ImageRole::query;

  static PromptSegment make_text(std::string s);
  static PromptSegment make_image(std::string bytes, std::string media_type, ImageRole role);
};

struct PromptBundle {
  ExperimentId experiment = ExperimentId::E1;
  std::vector<PromptSegment> segments;
  std::string schema_id;
  MultiImageMode delivery = MultiImageMode::separate;
  std::string design_id;  // routing metadata only, not part of the request digest

  std::string full_text() const;
  const std::string& template_segment() const { return segments.front().text; }
  std::size_t image_count(ImageRole role) const;
};

inline constexpr std::string_view kExampleAnswerLabel = "Example answer:\n";

// Throws Error(view_count_mismatch | missing_few_shot_example | invalid_argument).
PromptBundle build_prompt(ExperimentId id, const FeatureTaxonomy& t, const RenderedViewSet& images,
                          const std::optional<FewShotExample>& fewshot,
                          MultiImageMode mode = MultiImageMode::separate);

// Renders the two repo-authored exemplar parts (isometric view) and pairs them
// with the hand-labelled answer. Throws Error(missing_asset).
FewShotExample builtin_fewshot_example(const RenderParams& params);

}  // namespace afr
