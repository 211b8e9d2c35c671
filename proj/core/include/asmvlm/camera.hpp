#pragma once

#include <cmath>

#include "asmvlm/geometry.hpp"

namespace asmvlm {

enum class CameraView {
  TopCurrent,
  TopGoal,
  ObjectCloseup,
  Wrist,  // tool-centred close-up used as the policy observation
};

// Orthographic top-down camera. (origin_x, origin_y) is the world position of
// the top-left corner of pixel (0,0); image x grows with world x and image y
// grows with decreasing world y. Pixel (i,j) covers [i,i+1) x [j,j+1) in
// continuous image coordinates and is sampled at its centre.
struct Camera {
  CameraView view = CameraView::TopCurrent;
  int object_id = 0;  // ObjectCloseup only
  double origin_x = 0.0;
  double origin_y = 0.0;
  double meters_per_pixel = 0.001;
  int width_px = 1;
  int height_px = 1;

  friend bool operator==(const Camera&, const Camera&) = default;

  bool valid() const noexcept {
    return meters_per_pixel > 0.0 && width_px > 0 && height_px > 0 && std::isfinite(origin_x) &&
           std::isfinite(origin_y) && (view != CameraView::ObjectCloseup || object_id > 0);
  }

  SubPixel project(double x, double y) const noexcept {
    return {(x - origin_x) / meters_per_pixel, (origin_y - y) / meters_per_pixel};
  }

  WorldPoint unproject(double u, double v) const noexcept {
    return {origin_x + u * meters_per_pixel, origin_y - v * meters_per_pixel};
  }

  PixelCoord pixel_of(double x, double y) const noexcept {
    const SubPixel p = project(x, y);
    return {static_cast<int>(std::floor(p.u)), static_cast<int>(std::floor(p.v))};
  }

  /// World position of a pixel centre.
  WorldPoint pixel_center(PixelCoord px) const noexcept { return unproject(px.x + 0.5, px.y + 0.5); }

  bool in_frame(double x, double y) const noexcept {
    const SubPixel p = project(x, y);
    return p.u >= 0.0 && p.v >= 0.0 && p.u < width_px && p.v < height_px;
  }

  /// Same geometry, different view tag.
  Camera with_view(CameraView v, int id = 0) const {
    Camera c = *this;
    c.view = v;
    c.object_id = id;
    return c;
  }

  /// Camera of the given size centred on a world point.
  static Camera centered(CameraView view, double cx, double cy, double meters_per_pixel, int width_px,
                         int height_px, int object_id = 0) {
    Camera c;
    c.view = view;
    c.object_id = object_id;
    c.meters_per_pixel = meters_per_pixel;
    c.width_px = width_px;
    c.height_px = height_px;
    c.origin_x = cx - 0.5 * width_px * meters_per_pixel;
    c.origin_y = cy + 0.5 * height_px * meters_per_pixel;
    return c;
  }
};

}  // namespace asmvlm
