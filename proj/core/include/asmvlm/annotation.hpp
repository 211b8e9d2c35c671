#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "asmvlm/geometry.hpp"

namespace asmvlm {

// Marker namespace: pickable objects and target locations use disjoint ranges
// so a bare integer in a reply is unambiguous.
inline constexpr int kObjectMarkerMin = 1;
inline constexpr int kObjectMarkerMax = 99;
inline constexpr int kLocationMarkerMin = 101;
inline constexpr int kLocationMarkerMax = 199;

inline constexpr bool is_object_marker(int id) noexcept {
  return id >= kObjectMarkerMin && id <= kObjectMarkerMax;
}
inline constexpr bool is_location_marker(int id) noexcept {
  return id >= kLocationMarkerMin && id <= kLocationMarkerMax;
}

struct PointAnnotation {
  int marker_id = 0;
  PixelCoord pixel;
  std::string label;

  friend bool operator==(const PointAnnotation&, const PointAnnotation&) = default;
};

using AnnotationSet = std::vector<PointAnnotation>;

/// Per-image annotation sets for the object / current / goal triplet.
struct TripletAnnotations {
  AnnotationSet object;
  AnnotationSet current;
  AnnotationSet goal;

  /// Union of all marker ids across the three sets.
  std::set<int> marker_ids() const;

  friend bool operator==(const TripletAnnotations&, const TripletAnnotations&) = default;
};

std::optional<PointAnnotation> find_marker(const AnnotationSet& set, int marker_id);

/// `[{"id":1,"x":120,"y":88,"label":"red gear"}]`
std::string annotations_to_json(const AnnotationSet& set);
AnnotationSet annotations_from_json(std::string_view text);

/// `{"current":[...],"goal":[...],"object":[...]}`
std::string triplet_annotations_to_json(const TripletAnnotations& triplet);
TripletAnnotations triplet_annotations_from_json(std::string_view text);

}  // namespace asmvlm
