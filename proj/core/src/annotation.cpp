#include "asmvlm/annotation.hpp"

#include "asmvlm/error.hpp"
#include "json_util.hpp"

namespace asmvlm {

using detail::Json;

std::set<int> TripletAnnotations::marker_ids() const {
  std::set<int> ids;
  for (const auto* set : {&object, &current, &goal}) {
    for (const auto& a : *set) ids.insert(a.marker_id);
  }
  return ids;
}

std::optional<PointAnnotation> find_marker(const AnnotationSet& set, int marker_id) {
  for (const auto& a : set) {
    if (a.marker_id == marker_id) return a;
  }
  return std::nullopt;
}

namespace {

Json set_to_json(const AnnotationSet& set) {
  Json array = Json::array();
  for (const auto& a : set) {
    array.push_back(Json{{"id", a.marker_id}, {"x", a.pixel.x}, {"y", a.pixel.y}, {"label", a.label}});
  }
  return array;
}

AnnotationSet set_from_json(const Json& array) {
  if (!array.is_array()) throw Error(ErrorCode::ConfigError, "annotation set must be a JSON array");
  AnnotationSet set;
  for (const auto& item : array) {
    PointAnnotation a;
    a.marker_id = detail::require_int(item, "id");
    a.pixel.x = detail::require_int(item, "x");
    a.pixel.y = detail::require_int(item, "y");
    a.label = detail::require_string(item, "label");
    set.push_back(std::move(a));
  }
  return set;
}

}  // namespace

std::string annotations_to_json(const AnnotationSet& set) { return set_to_json(set).dump(); }

AnnotationSet annotations_from_json(std::string_view text) {
  return set_from_json(detail::parse_json(text, "annotation set"));
}

std::string triplet_annotations_to_json(const TripletAnnotations& triplet) {
  Json doc{{"object", set_to_json(triplet.object)},
           {"current", set_to_json(triplet.current)},
           {"goal", set_to_json(triplet.goal)}};
  return doc.dump();
}

TripletAnnotations triplet_annotations_from_json(std::string_view text) {
  const Json doc = detail::parse_json(text, "triplet annotations");
  if (!doc.is_object()) throw Error(ErrorCode::ConfigError, "triplet annotations must be an object");
  TripletAnnotations t;
  t.object = set_from_json(doc.value("object", Json::array()));
  t.current = set_from_json(doc.value("current", Json::array()));
  t.goal = set_from_json(doc.value("goal", Json::array()));
  return t;
}

}  // namespace asmvlm
