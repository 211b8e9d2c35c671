#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace asmvlm {

enum class SkillName { Pick, Place, Insert, Done, Init };

enum class MarkerParam { None, Object, Location };

struct SkillSignature {
  SkillName name;
  std::string_view keyword;
  MarkerParam param;
  std::string_view param_name;  // as shown in the grammar and JSON fallback
  std::string_view description;
};

// The one definition both the prompt's output-format section and the parser use.
inline constexpr std::array<SkillSignature, 5> kSkillTable{{
    {SkillName::Pick, "pick", MarkerParam::Object, "object_id",
     "Grasps an object identified by its numerical marker"},
    {SkillName::Place, "place", MarkerParam::Location, "target_id",
     "Places the currently held object at the marked target location"},
    {SkillName::Insert, "insert", MarkerParam::Location, "target_id",
     "Inserts the currently held object at the marked target location"},
    {SkillName::Done, "done", MarkerParam::None, "", "Signals that the assembly task is complete"},
    {SkillName::Init, "init", MarkerParam::None, "",
     "Returns the robot to its starting configuration with the gripper open"},
}};

const SkillSignature& signature(SkillName name);
std::optional<SkillName> skill_from_keyword(std::string_view keyword);

struct Skill {
  SkillName name = SkillName::Done;
  int marker = 0;  // object marker for Pick, location marker for Place/Insert, 0 otherwise

  static Skill pick(int object_marker) { return {SkillName::Pick, object_marker}; }
  static Skill place(int target_marker) { return {SkillName::Place, target_marker}; }
  static Skill insert(int target_marker) { return {SkillName::Insert, target_marker}; }
  static Skill done() { return {SkillName::Done, 0}; }
  static Skill init() { return {SkillName::Init, 0}; }

  /// Namespace check: Pick carries 1..99, Place/Insert 101..199, Done/Init none.
  bool valid() const noexcept;

  friend bool operator==(const Skill&, const Skill&) = default;
};

enum class ExtractionMode { Strict, Tolerant };

struct SkillDecision {
  Skill skill;
  std::string raw_text;
  ExtractionMode extraction_mode = ExtractionMode::Strict;

  friend bool operator==(const SkillDecision&, const SkillDecision&) = default;
};

enum class ParseErrorKind { NoDecisionFound, UnknownSkillName, MissingId, IdOutOfNamespace, AmbiguousDecision };

std::string_view to_string(ParseErrorKind kind);

struct ParseError {
  ParseErrorKind kind = ParseErrorKind::NoDecisionFound;
  std::optional<std::pair<std::size_t, std::size_t>> span;  // [begin, end) into raw_text
  std::string message;

  friend bool operator==(const ParseError&, const ParseError&) = default;
};

using ParseResult = std::variant<SkillDecision, ParseError>;

/// Total over arbitrary bytes. Strict `DECISION:` lines win; otherwise the
/// last JSON object carrying a "skill" field is used.
ParseResult parse_decision(std::string_view raw_text, const std::set<int>& known_markers);

/// `DECISION: pick(3)`, `DECISION: done`, ...
std::string format_decision(const Skill& skill);

/// Human-readable form used in prompt history: "pick object 3", "insert at location 101".
std::string describe_skill(const Skill& skill);

/// The accepted reply grammar, one line per skill, embedded verbatim in prompts.
std::string canonical_grammar_text();

}  // namespace asmvlm
