#include "asmvlm/prompting.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <sstream>

#include "asmvlm/error.hpp"

namespace asmvlm {

namespace {

constexpr std::array<std::string_view, 5> kPartNames{"task_context", "state_description", "skill_catalog",
                                                     "decision_logic", "output_format"};

std::string* part_field(PromptTemplate& t, std::string_view name) {
  if (name == "task_context") return &t.task_context;
  if (name == "state_description") return &t.state_description_template;
  if (name == "skill_catalog") return &t.skill_catalog_text;
  if (name == "decision_logic") return &t.decision_logic_text;
  if (name == "output_format") return &t.output_format_text;
  return nullptr;
}

const std::string& part_field(const PromptTemplate& t, std::string_view name) {
  return *part_field(const_cast<PromptTemplate&>(t), name);
}

void replace_all(std::string& text, std::string_view key, const std::string& value) {
  std::size_t pos = 0;
  while ((pos = text.find(key, pos)) != std::string::npos) {
    text.replace(pos, key.size(), value);
    pos += value.size();
  }
}

std::string strip_blank_lines(std::string_view s) {
  while (!s.empty() && (s.front() == '\n' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  return std::string(s);
}

std::string skill_catalog_lines() {
  std::string out;
  for (const auto& s : kSkillTable) {
    out += "- " + std::string(s.keyword);
    if (s.param != MarkerParam::None) out += "(" + std::string(s.param_name) + ")";
    out += ": " + std::string(s.description) + "\n";
  }
  if (!out.empty()) out.pop_back();
  return out;
}

std::string marker_list(const TripletAnnotations& ann, bool objects) {
  std::map<int, std::string> labels;
  for (const AnnotationSet* set : {&ann.object, &ann.current, &ann.goal}) {
    for (const auto& a : *set) {
      if (objects ? is_object_marker(a.marker_id) : is_location_marker(a.marker_id)) labels.emplace(a.marker_id, a.label);
    }
  }
  if (labels.empty()) return "none";
  std::string out;
  for (const auto& [id, label] : labels) {
    if (!out.empty()) out += ", ";
    out += std::to_string(id) + " (" + label + ")";
  }
  return out;
}

std::string substitute(std::string text, const TripletAnnotations& ann) {
  replace_all(text, "{object_markers}", marker_list(ann, true));
  replace_all(text, "{location_markers}", marker_list(ann, false));
  replace_all(text, "{skills}", skill_catalog_lines());
  std::string grammar = canonical_grammar_text();
  if (!grammar.empty()) grammar.pop_back();
  replace_all(text, "{output_grammar}", grammar);
  return text;
}

}  // namespace

void PromptTemplate::validate() const {
  for (auto name : kPartNames) {
    if (part_field(*this, name).empty()) throw Error(ErrorCode::InvalidTemplate, "empty part " + std::string(name));
  }
  std::string grammar = canonical_grammar_text();
  grammar.pop_back();
  if (output_format_text.find("{output_grammar}") == std::string::npos &&
      output_format_text.find(grammar) == std::string::npos) {
    throw Error(ErrorCode::InvalidTemplate, "output_format must contain {output_grammar} or the canonical grammar");
  }
}

PromptTemplate default_template() {
  PromptTemplate t;
  t.task_context =
      "You control a robot arm that assembles gears onto shafts on a base plate.\n"
      "Image 1 shows the object to work with, Image 2 the current workspace and Image 3 the goal state.\n"
      "Numbered markers identify graspable objects (1-99) and target locations (101-199).";
  t.state_description_template =
      "Object markers: {object_markers}\n"
      "Location markers: {location_markers}\n"
      "Compare Image 2 with Image 3 to see which gears still have to be mounted.";
  t.skill_catalog_text = "{skills}";
  t.decision_logic_text =
      "- If the current state already matches the goal, choose done.\n"
      "- If the gripper is empty, pick the gear that must be mounted next; respect the required order.\n"
      "- If a gear is held, insert it at the shaft it occupies in the goal image.\n"
      "- If the robot is in a bad state, choose init.\n"
      "- Choose exactly one skill.";
  t.output_format_text =
      "Reply with exactly one line in one of these forms, using a marker number from the images:\n"
      "{output_grammar}";
  return t;
}

PromptTemplate parse_template(std::string_view text) {
  PromptTemplate t;
  std::string* current = nullptr;
  std::map<std::string, std::string> seen;
  std::string buffer;
  const auto flush = [&] {
    if (current != nullptr) *current = strip_blank_lines(buffer);
    buffer.clear();
  };
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.rfind("### ", 0) == 0) {
      flush();
      const std::string name(line.substr(4));
      current = part_field(t, name);
      if (current == nullptr) throw Error(ErrorCode::InvalidTemplate, "unknown template part '" + name + "'");
      if (!seen.emplace(name, name).second) throw Error(ErrorCode::InvalidTemplate, "part '" + name + "' repeated");
    } else if (current != nullptr) {
      buffer.append(line);
      buffer.push_back('\n');
    } else if (!strip_blank_lines(line).empty()) {
      throw Error(ErrorCode::InvalidTemplate, "text before the first ### heading");
    }
    start = end + 1;
  }
  flush();
  t.validate();
  return t;
}

PromptTemplate load_template(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read template " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_template(buffer.str());
}

std::string template_to_text(const PromptTemplate& tmpl) {
  std::string out;
  for (auto name : kPartNames) {
    if (!out.empty()) out += "\n";
    out += "### " + std::string(name) + "\n" + part_field(tmpl, name) + "\n";
  }
  return out;
}

std::string_view to_string(ImageRole role) {
  switch (role) {
    case ImageRole::Object:
      return "object";
    case ImageRole::Current:
      return "current";
    case ImageRole::Goal:
      return "goal";
  }
  return "unknown";
}

std::string MultiModalPrompt::text() const {
  std::string out;
  for (const auto& part : parts) {
    if (const auto* t = std::get_if<TextPart>(&part)) {
      if (!out.empty()) out += "\n\n";
      out += t->text;
    }
  }
  return out;
}

std::string MultiModalPrompt::serialize() const {
  std::string out;
  for (const auto& part : parts) {
    if (!out.empty()) out += "\n\n";
    if (const auto* t = std::get_if<TextPart>(&part)) {
      out += t->text;
    } else {
      const auto& img = std::get<ImagePart>(part);
      out += "[image:" + std::string(to_string(img.role)) + " " + std::to_string(img.image.width()) + "x" +
             std::to_string(img.image.height()) + " sha256:" + img.image.content_hash() + "]";
    }
  }
  return out;
}

std::string build_recognition_prompt(const std::vector<std::string>& object_labels) {
  std::vector<std::string> labels;
  for (const auto& l : object_labels) {
    if (l.empty()) continue;
    if (std::find(labels.begin(), labels.end(), l) == labels.end()) labels.push_back(l);
  }
  if (labels.empty()) throw Error(ErrorCode::EmptyLabelSet, "recognition needs at least one label");
  std::string list;
  for (const auto& l : labels) {
    if (!list.empty()) list += "; ";
    list += l;
  }
  return "Point to every visible instance of these objects: " + list +
         ".\n"
         "Answer with one line per instance in the form\n"
         "Point: (x, y) <name>\n"
         "where x and y are pixel coordinates in the image and <name> is the object name as listed.\n"
         "If none of the objects is visible, answer with the single word none.";
}

std::string render_history(const std::vector<Skill>& history) {
  if (history.empty()) return "none";
  const std::size_t first = history.size() > kMaxHistoryEntries ? history.size() - kMaxHistoryEntries : 0;
  std::string out;
  for (std::size_t i = first; i < history.size(); ++i) {
    if (!out.empty()) out += "\n";
    out += "step " + std::to_string(i + 1) + ": " + describe_skill(history[i]);
  }
  return out;
}

MultiModalPrompt build_reasoning_prompt(const PromptTemplate& tmpl, const MarkedTriplet& marked,
                                        const std::vector<Skill>& history) {
  tmpl.validate();
  if (marked.annotations.current.empty() || marked.annotations.goal.empty()) {
    throw Error(ErrorCode::MissingAnnotations, "current and goal images need markers");
  }
  const TripletAnnotations& ann = marked.annotations;
  MultiModalPrompt p;
  p.parts.emplace_back(TextPart{"## Task context\n" + substitute(tmpl.task_context, ann)});
  p.parts.emplace_back(TextPart{"Image 1 (task object):"});
  p.parts.emplace_back(ImagePart{ImageRole::Object, marked.images.object_img});
  p.parts.emplace_back(TextPart{"Image 2 (current state):"});
  p.parts.emplace_back(ImagePart{ImageRole::Current, marked.images.current_img});
  p.parts.emplace_back(TextPart{"Image 3 (goal state):"});
  p.parts.emplace_back(ImagePart{ImageRole::Goal, marked.images.goal_img});
  p.parts.emplace_back(TextPart{"## Current state\n" + substitute(tmpl.state_description_template, ann)});
  p.parts.emplace_back(TextPart{"## History\n" + render_history(history)});
  p.parts.emplace_back(TextPart{"## Available skills\n" + substitute(tmpl.skill_catalog_text, ann)});
  p.parts.emplace_back(TextPart{"## Decision logic\n" + substitute(tmpl.decision_logic_text, ann)});
  p.parts.emplace_back(TextPart{"## Output format\n" + substitute(tmpl.output_format_text, ann)});
  return p;
}

}  // namespace asmvlm
