#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "asmvlm/image.hpp"
#include "asmvlm/marking.hpp"
#include "asmvlm/skill.hpp"

namespace asmvlm {

inline constexpr std::size_t kMaxHistoryEntries = 20;

// Five-part reasoning prompt: task context, state description, skill catalog,
// decision logic, output format. Parts may use the placeholders
// {object_markers}, {location_markers}, {skills} and {output_grammar}.
struct PromptTemplate {
  std::string task_context;
  std::string state_description_template;
  std::string skill_catalog_text;
  std::string decision_logic_text;
  std::string output_format_text;

  /// Throws InvalidTemplate if a part is empty or the output format cannot
  /// carry the canonical grammar.
  void validate() const;

  friend bool operator==(const PromptTemplate&, const PromptTemplate&) = default;
};

PromptTemplate default_template();

/// Text file with `### <part>` headings (task_context, state_description,
/// skill_catalog, decision_logic, output_format).
PromptTemplate parse_template(std::string_view text);
PromptTemplate load_template(const std::filesystem::path& path);
std::string template_to_text(const PromptTemplate& tmpl);

enum class ImageRole { Object, Current, Goal };
std::string_view to_string(ImageRole role);

struct TextPart {
  std::string text;
  friend bool operator==(const TextPart&, const TextPart&) = default;
};

struct ImagePart {
  ImageRole role = ImageRole::Current;
  RasterImage image;
  friend bool operator==(const ImagePart&, const ImagePart&) = default;
};

using PromptPart = std::variant<TextPart, ImagePart>;

struct MultiModalPrompt {
  std::vector<PromptPart> parts;

  /// Text parts joined with blank lines; the T_task text.
  std::string text() const;
  /// Text verbatim, images as `[image:<role> <w>x<h> sha256:<hex>]`.
  std::string serialize() const;

  friend bool operator==(const MultiModalPrompt&, const MultiModalPrompt&) = default;
};

/// Throws EmptyLabelSet. Duplicate labels are dropped, first occurrence kept.
std::string build_recognition_prompt(const std::vector<std::string>& object_labels);

std::string render_history(const std::vector<Skill>& history);

/// Throws MissingAnnotations when the current or goal image carries no markers.
MultiModalPrompt build_reasoning_prompt(const PromptTemplate& tmpl, const MarkedTriplet& marked,
                                        const std::vector<Skill>& history);

}  // namespace asmvlm
