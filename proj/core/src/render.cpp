#include "asmvlm/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "asmvlm/error.hpp"

namespace asmvlm {

namespace {

constexpr std::array<Rgb, 6> kGearPalette{{
    {200, 40, 40},
    {40, 160, 60},
    {40, 70, 200},
    {230, 120, 20},
    {140, 60, 170},
    {200, 50, 140},
}};

constexpr std::array<Rgb, 3> kShaftPalette{{
    {90, 94, 100},
    {112, 114, 120},
    {76, 80, 88},
}};

Rgb darken(Rgb c) {
  return {static_cast<std::uint8_t>(c.r * 6 / 10), static_cast<std::uint8_t>(c.g * 6 / 10),
          static_cast<std::uint8_t>(c.b * 6 / 10)};
}

// Pixel range covering a world-space box, clipped to the image.
struct PixelBox {
  int x0, y0, x1, y1;  // inclusive
};

PixelBox box_for(const Camera& camera, double cx, double cy, double half_w, double half_h) {
  const PixelCoord a = camera.pixel_of(cx - half_w, cy + half_h);
  const PixelCoord b = camera.pixel_of(cx + half_w, cy - half_h);
  return {std::max(a.x, 0), std::max(a.y, 0), std::min(b.x, camera.width_px - 1),
          std::min(b.y, camera.height_px - 1)};
}

template <typename Shade>
void fill(RasterImage& image, const Camera& camera, const PixelBox& box, Shade shade) {
  for (int py = box.y0; py <= box.y1; ++py) {
    for (int px = box.x0; px <= box.x1; ++px) {
      const WorldPoint p = camera.pixel_center({px, py});
      if (auto c = shade(p.x, p.y)) image.set(px, py, *c);
    }
  }
}

void draw_object(RasterImage& image, const Camera& camera, const SceneObject& o) {
  const double cx = o.pose.x;
  const double cy = o.pose.y;
  if (const auto* plate = std::get_if<BasePlate>(&o.kind)) {
    const double hw = 0.5 * plate->width_m;
    const double hd = 0.5 * plate->depth_m;
    fill(image, camera, box_for(camera, cx, cy, hw, hd), [&](double x, double y) -> std::optional<Rgb> {
      if (std::abs(x - cx) <= hw && std::abs(y - cy) <= hd) return kPlateColor;
      return std::nullopt;
    });
    return;
  }
  if (const auto* shaft = std::get_if<Shaft>(&o.kind)) {
    const double r = shaft->radius_m;
    const Rgb color = body_color(o);
    fill(image, camera, box_for(camera, cx, cy, r, r), [&](double x, double y) -> std::optional<Rgb> {
      if (std::hypot(x - cx, y - cy) <= r) return color;
      return std::nullopt;
    });
    return;
  }
  const auto& gear = std::get<Gear>(o.kind);
  const double outer = gear.outer_radius_m;
  const double bore = gear.bore_radius_m;
  const double pitch = 2.0 * std::numbers::pi / gear.tooth_count;
  const Rgb body = body_color(o);
  const Rgb tooth = tooth_color(o);
  fill(image, camera, box_for(camera, cx, cy, outer, outer), [&](double x, double y) -> std::optional<Rgb> {
    const double d = std::hypot(x - cx, y - cy);
    if (d > outer || d < bore) return std::nullopt;
    if (d >= 0.8 * outer) {
      const double rel = std::atan2(y - cy, x - cx) - o.pose.yaw;
      const double phase = rel / pitch - std::round(rel / pitch);
      if (std::abs(phase) < 0.2) return tooth;
    }
    return body;
  });
}

}  // namespace

Rgb body_color(const SceneObject& object) {
  const auto id = static_cast<std::size_t>(std::max(object.object_id, 0));
  if (object.is_plate()) return kPlateColor;
  if (object.is_shaft()) return kShaftPalette[id % kShaftPalette.size()];
  return kGearPalette[(id + kGearPalette.size() - 1) % kGearPalette.size()];
}

Rgb tooth_color(const SceneObject& object) { return darken(body_color(object)); }

RasterImage render(const WorldState& world, const Camera& camera) {
  if (!camera.valid()) throw Error(ErrorCode::InvalidScenario, "invalid camera");
  const WorldState scene = camera.view == CameraView::TopGoal ? goal_world(world) : world;
  const bool top = camera.view == CameraView::TopCurrent || camera.view == CameraView::TopGoal;
  if (top) {
    for (const auto& o : scene.objects) {
      if (o.status.state == ObjectStatus::State::Grasped) continue;
      if (!camera.in_frame(o.pose.x, o.pose.y)) {
        throw Error(ErrorCode::ObjectOutOfFrame, "object " + std::to_string(o.object_id) + " outside the frame");
      }
    }
  }

  RasterImage image(camera.width_px, camera.height_px, kTableColor);
  const SceneObject* held = nullptr;
  const auto draw_pass = [&](auto pred) {
    for (const auto& o : scene.objects) {
      if (o.status.state == ObjectStatus::State::Grasped) {
        held = &o;
        continue;
      }
      if (pred(o)) draw_object(image, camera, o);
    }
  };
  draw_pass([](const SceneObject& o) { return o.is_plate(); });
  draw_pass([](const SceneObject& o) { return o.is_shaft(); });
  draw_pass([](const SceneObject& o) { return o.is_gear(); });
  if (held != nullptr && camera.view != CameraView::Wrist) draw_object(image, camera, *held);
  return image;
}

Camera object_closeup_camera(const WorldState& world, int object_id, double meters_per_pixel, int width_px,
                             int height_px) {
  const SceneObject& o = world.get(object_id);
  return Camera::centered(CameraView::ObjectCloseup, o.pose.x, o.pose.y, meters_per_pixel, width_px, height_px,
                          object_id);
}

Camera wrist_camera(const WorldState& world, double meters_per_pixel, int width_px, int height_px) {
  const Pose& t = world.robot.tool_pose;
  return Camera::centered(CameraView::Wrist, t.x, t.y, meters_per_pixel, width_px, height_px);
}

}  // namespace asmvlm
