#include "asmvlm/skill.hpp"

#include <algorithm>
#include <cctype>
#include <string>
#include <vector>

#include "asmvlm/annotation.hpp"
#include "json_util.hpp"

namespace asmvlm {

using detail::Json;

const SkillSignature& signature(SkillName name) {
  for (const auto& s : kSkillTable) {
    if (s.name == name) return s;
  }
  return kSkillTable.back();  // unreachable for valid enum values
}

std::optional<SkillName> skill_from_keyword(std::string_view keyword) {
  for (const auto& s : kSkillTable) {
    if (s.keyword.size() != keyword.size()) continue;
    const bool same = std::equal(s.keyword.begin(), s.keyword.end(), keyword.begin(), [](char a, char b) {
      return a == std::tolower(static_cast<unsigned char>(b));
    });
    if (same) return s.name;
  }
  return std::nullopt;
}

bool Skill::valid() const noexcept {
  switch (signature(name).param) {
    case MarkerParam::Object:
      return is_object_marker(marker);
    case MarkerParam::Location:
      return is_location_marker(marker);
    case MarkerParam::None:
      return marker == 0;
  }
  return false;
}

std::string_view to_string(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::NoDecisionFound:
      return "NoDecisionFound";
    case ParseErrorKind::UnknownSkillName:
      return "UnknownSkillName";
    case ParseErrorKind::MissingId:
      return "MissingId";
    case ParseErrorKind::IdOutOfNamespace:
      return "IdOutOfNamespace";
    case ParseErrorKind::AmbiguousDecision:
      return "AmbiguousDecision";
  }
  return "Unknown";
}

namespace {

using Span = std::pair<std::size_t, std::size_t>;

constexpr std::string_view kPrefix = "DECISION:";
constexpr std::size_t kMaxIdDigits = 9;

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

ParseError error(ParseErrorKind kind, std::optional<Span> span, std::string message) {
  return {kind, span, std::move(message)};
}

// Marker range and membership check shared by both extraction modes.
std::optional<ParseError> check_marker(const Skill& skill, const std::set<int>& known, std::optional<Span> span) {
  const SkillSignature& sig = signature(skill.name);
  if (!skill.valid()) {
    if (sig.param == MarkerParam::None) {
      return error(ParseErrorKind::IdOutOfNamespace, span, std::string(sig.keyword) + " takes no marker");
    }
    return error(ParseErrorKind::IdOutOfNamespace, span,
                 "marker " + std::to_string(skill.marker) + " is outside the " +
                     (sig.param == MarkerParam::Object ? "object range 1..99" : "location range 101..199"));
  }
  if (sig.param != MarkerParam::None && !known.count(skill.marker)) {
    return error(ParseErrorKind::IdOutOfNamespace, span,
                 "marker " + std::to_string(skill.marker) + " is not shown in the images");
  }
  return std::nullopt;
}

// One `DECISION:` line. The id is kept raw (-1 when absent) so that range
// errors are reported after ambiguity is settled.
struct StrictCandidate {
  Span span;
  std::optional<ParseError> error;
  SkillName name = SkillName::Done;
  long id = -1;
};

std::optional<StrictCandidate> scan_line(std::string_view line, std::size_t offset) {
  std::string_view body = trim(line);
  if (body.size() < kPrefix.size()) return std::nullopt;
  for (std::size_t i = 0; i < kPrefix.size(); ++i) {
    if (std::toupper(static_cast<unsigned char>(body[i])) != kPrefix[i]) return std::nullopt;
  }
  StrictCandidate c;
  c.span = {offset, offset + line.size()};
  body = trim(body.substr(kPrefix.size()));

  std::size_t k = 0;
  while (k < body.size() && (std::isalpha(static_cast<unsigned char>(body[k])) || body[k] == '_')) ++k;
  const std::string_view keyword = body.substr(0, k);
  std::string_view rest = trim(body.substr(k));
  const auto name = skill_from_keyword(keyword);
  if (keyword.empty() || !name) {
    c.error = error(ParseErrorKind::UnknownSkillName, c.span, "unknown skill '" + std::string(keyword) + "'");
    return c;
  }
  c.name = *name;

  if (!rest.empty()) {
    if (rest.front() != '(' || rest.back() != ')') {
      c.error = error(ParseErrorKind::MissingId, c.span, "expected '(<id>)' after the skill name");
      return c;
    }
    const std::string_view inner = trim(rest.substr(1, rest.size() - 2));
    if (inner.empty() || !std::all_of(inner.begin(), inner.end(), is_digit)) {
      c.error = error(ParseErrorKind::MissingId, c.span, "marker id must be a non-negative integer");
      return c;
    }
    if (inner.size() > kMaxIdDigits) {
      c.error = error(ParseErrorKind::IdOutOfNamespace, c.span, "marker id too large");
      return c;
    }
    c.id = std::stol(std::string(inner));
  }
  if (signature(c.name).param != MarkerParam::None && c.id < 0) {
    c.error = error(ParseErrorKind::MissingId, c.span, std::string(signature(c.name).keyword) + " needs a marker id");
  }
  return c;
}

std::optional<ParseResult> parse_strict(std::string_view text, const std::set<int>& known) {
  std::vector<StrictCandidate> candidates;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    if (auto c = scan_line(text.substr(start, end - start), start)) candidates.push_back(std::move(*c));
    start = end + 1;
  }
  if (candidates.empty()) return std::nullopt;

  const StrictCandidate* chosen = nullptr;
  for (const auto& c : candidates) {
    if (c.error) continue;
    if (chosen == nullptr) {
      chosen = &c;
    } else if (chosen->name != c.name || chosen->id != c.id) {
      return ParseResult{error(ParseErrorKind::AmbiguousDecision, c.span, "conflicting DECISION lines")};
    }
  }
  if (chosen == nullptr) return ParseResult{*candidates.front().error};

  Skill skill{chosen->name, 0};
  if (chosen->id >= 0) {
    // A bare done(5) lands here too and is rejected by the range check.
    skill.marker = chosen->id > 1'000'000 ? -1 : static_cast<int>(chosen->id);
    if (signature(chosen->name).param == MarkerParam::None && skill.marker == 0) skill.marker = -1;
  }
  if (auto err = check_marker(skill, known, chosen->span)) return ParseResult{*err};
  return ParseResult{SkillDecision{skill, std::string(text), ExtractionMode::Strict}};
}

// Matched {...} pairs, ignoring braces inside JSON strings.
struct BracePair {
  std::size_t open = 0;
  std::size_t close = 0;
  std::vector<std::size_t> children;  // indices into the pair list
};

std::vector<BracePair> brace_pairs(std::string_view text, std::vector<std::size_t>& roots) {
  std::vector<BracePair> pairs;
  std::vector<std::size_t> stack;  // open positions
  std::vector<std::vector<std::size_t>> child_stack;
  bool in_string = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_string) {
      if (ch == '\\') {
        ++i;
      } else if (ch == '"') {
        in_string = false;
      }
      continue;
    }
    if (ch == '"' && !stack.empty()) {
      in_string = true;
    } else if (ch == '{') {
      stack.push_back(i);
      child_stack.emplace_back();
    } else if (ch == '}' && !stack.empty()) {
      BracePair p{stack.back(), i, std::move(child_stack.back())};
      stack.pop_back();
      child_stack.pop_back();
      pairs.push_back(std::move(p));
      (child_stack.empty() ? roots : child_stack.back()).push_back(pairs.size() - 1);
    }
  }
  return pairs;
}

struct JsonCandidate {
  std::size_t offset;
  Span span;
  Json object;
};

void collect_skill_objects(const Json& node, std::size_t offset, Span span, std::vector<JsonCandidate>& out) {
  if (node.is_object()) {
    if (node.contains("skill")) out.push_back({offset, span, node});
    for (const auto& [key, value] : node.items()) collect_skill_objects(value, offset, span, out);
  } else if (node.is_array()) {
    for (const auto& value : node) collect_skill_objects(value, offset, span, out);
  }
}

void try_pair(std::string_view text, const std::vector<BracePair>& pairs, std::size_t index,
              std::vector<JsonCandidate>& out) {
  const BracePair& p = pairs[index];
  const std::string_view slice = text.substr(p.open, p.close - p.open + 1);
  Json parsed = Json::parse(slice.begin(), slice.end(), nullptr, false);
  if (!parsed.is_discarded()) {
    collect_skill_objects(parsed, p.open, {p.open, p.close + 1}, out);
    return;
  }
  for (std::size_t child : p.children) try_pair(text, pairs, child, out);
}

std::optional<long> json_id(const Json& value) {
  if (value.is_number_unsigned()) {
    const auto v = value.get<std::uint64_t>();
    return v > 1'000'000 ? 1'000'001L : static_cast<long>(v);
  }
  if (value.is_number_integer()) {
    const auto v = value.get<std::int64_t>();
    return v < 0 ? -1L : (v > 1'000'000 ? 1'000'001L : static_cast<long>(v));
  }
  if (value.is_string()) {
    const std::string_view s = trim(value.get_ref<const std::string&>());
    if (s.empty() || s.size() > kMaxIdDigits || !std::all_of(s.begin(), s.end(), is_digit)) return std::nullopt;
    return std::stol(std::string(s));
  }
  return std::nullopt;
}

ParseResult parse_tolerant(std::string_view text, const std::set<int>& known) {
  std::vector<std::size_t> roots;
  const std::vector<BracePair> pairs = brace_pairs(text, roots);
  std::vector<JsonCandidate> found;
  for (std::size_t r : roots) try_pair(text, pairs, r, found);
  if (found.empty()) return error(ParseErrorKind::NoDecisionFound, std::nullopt, "no DECISION line or skill object");

  const JsonCandidate& last = found.back();
  const Json& skill_field = last.object["skill"];
  std::optional<SkillName> name;
  if (skill_field.is_string()) name = skill_from_keyword(trim(skill_field.get_ref<const std::string&>()));
  if (!name) return error(ParseErrorKind::UnknownSkillName, last.span, "unknown skill in JSON object");

  const SkillSignature& sig = signature(*name);
  Skill skill{*name, 0};
  if (sig.param != MarkerParam::None) {
    const std::string key(sig.param_name);
    if (!last.object.contains(key)) return error(ParseErrorKind::MissingId, last.span, "missing '" + key + "'");
    const auto id = json_id(last.object[key]);
    if (!id || *id < 0) return error(ParseErrorKind::MissingId, last.span, "'" + key + "' is not an integer id");
    skill.marker = static_cast<int>(*id);
  }
  if (auto err = check_marker(skill, known, last.span)) return *err;
  return SkillDecision{skill, std::string(text), ExtractionMode::Tolerant};
}

}  // namespace

ParseResult parse_decision(std::string_view raw_text, const std::set<int>& known_markers) {
  if (auto strict = parse_strict(raw_text, known_markers)) return std::move(*strict);
  return parse_tolerant(raw_text, known_markers);
}

std::string format_decision(const Skill& skill) {
  const SkillSignature& sig = signature(skill.name);
  std::string out = "DECISION: " + std::string(sig.keyword);
  if (sig.param != MarkerParam::None) out += "(" + std::to_string(skill.marker) + ")";
  return out;
}

std::string describe_skill(const Skill& skill) {
  const SkillSignature& sig = signature(skill.name);
  switch (sig.param) {
    case MarkerParam::Object:
      return std::string(sig.keyword) + " object " + std::to_string(skill.marker);
    case MarkerParam::Location:
      return std::string(sig.keyword) + " at location " + std::to_string(skill.marker);
    case MarkerParam::None:
      break;
  }
  return std::string(sig.keyword);
}

std::string canonical_grammar_text() {
  std::string out;
  for (const auto& s : kSkillTable) {
    out += std::string(kPrefix) + " " + std::string(s.keyword);
    if (s.param != MarkerParam::None) out += "(<" + std::string(s.param_name) + ">)";
    out += "\n";
  }
  return out;
}

}  // namespace asmvlm
