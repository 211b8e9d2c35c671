#pragma once

#include "asmvlm/annotation.hpp"
#include "asmvlm/image.hpp"

namespace asmvlm {

enum class DiscColorRule {
  ByNamespace,  // object markers and location markers get distinct disc colours
  Uniform,
};

struct MarkStyle {
  int disc_radius_px = 11;
  int font_scale = 1;
  DiscColorRule disc_color_rule = DiscColorRule::ByNamespace;
  Rgb object_disc_color{255, 214, 10};
  Rgb location_disc_color{40, 200, 255};
  Rgb text_color{0, 0, 0};

  /// Half-diagonal of the widest (three digit) label box plus a one pixel margin.
  int min_disc_radius() const;
  /// Throws InvalidStyle when the digits would spill outside the disc.
  void validate() const;
};

struct ImageTriplet {
  RasterImage object_img;
  RasterImage current_img;
  RasterImage goal_img;

  friend bool operator==(const ImageTriplet&, const ImageTriplet&) = default;
};

/// A marked triplet always carries the annotations that produced it.
struct MarkedTriplet {
  ImageTriplet images;
  TripletAnnotations annotations;

  friend bool operator==(const MarkedTriplet&, const MarkedTriplet&) = default;
};

/// Pixels whose centre lies within `radius` of the annotation pixel centre.
bool in_marker_disc(int px, int py, PixelCoord center, int radius);

/// Draws numbered discs; overlapping markers are painted in ascending id order.
RasterImage mark_image(const RasterImage& image, const AnnotationSet& annotations,
                       const MarkStyle& style = {});

MarkedTriplet mark_triplet(const ImageTriplet& triplet, const TripletAnnotations& annotations,
                           const MarkStyle& style = {});

}  // namespace asmvlm
