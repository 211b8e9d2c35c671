#pragma once

#include <cmath>
#include <numbers>

namespace asmvlm {

/// Wraps an angle into [-pi, pi).
inline double normalize_yaw(double yaw) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double wrapped = std::fmod(yaw + std::numbers::pi, two_pi);
  if (wrapped < 0.0) wrapped += two_pi;
  wrapped -= std::numbers::pi;
  // fmod can land exactly on +pi after the shift for inputs like -pi - 2k*pi.
  if (wrapped >= std::numbers::pi) wrapped -= two_pi;
  return wrapped;
}

struct Pose {
  double x = 0.0;  // meters
  double y = 0.0;
  double z = 0.0;  // table surface is z = 0
  double yaw = 0.0;

  friend bool operator==(const Pose&, const Pose&) = default;
};

inline double planar_distance(double ax, double ay, double bx, double by) {
  return std::hypot(ax - bx, ay - by);
}

inline double planar_distance(const Pose& a, const Pose& b) {
  return planar_distance(a.x, a.y, b.x, b.y);
}

struct PixelCoord {
  int x = 0;
  int y = 0;

  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

struct SubPixel {
  double u = 0.0;
  double v = 0.0;
};

struct WorldPoint {
  double x = 0.0;
  double y = 0.0;
};

}  // namespace asmvlm
