#pragma once

#include "asmvlm/camera.hpp"
#include "asmvlm/image.hpp"
#include "asmvlm/world.hpp"

namespace asmvlm {

inline constexpr Rgb kTableColor{214, 208, 196};
inline constexpr Rgb kPlateColor{150, 156, 168};

/// Fixed per-object palette. Gears draw from a saturated set, shafts from a
/// steel set, so colour alone separates the two classes.
Rgb body_color(const SceneObject& object);
Rgb tooth_color(const SceneObject& object);

/// Orthographic flat-shaded rendering without anti-aliasing.
///
/// TopGoal renders `goal_world(world)`. Wrist hides the held object. For the
/// two top views every Free/Inserted object centre must land inside the frame,
/// otherwise ObjectOutOfFrame is thrown.
RasterImage render(const WorldState& world, const Camera& camera);

/// Close-up centred on an object (the I_object view).
Camera object_closeup_camera(const WorldState& world, int object_id, double meters_per_pixel = 0.00025,
                             int width_px = 200, int height_px = 200);

/// Tool-centred close-up for policy observations.
Camera wrist_camera(const WorldState& world, double meters_per_pixel = 0.0001, int width_px = 256,
                    int height_px = 256);

}  // namespace asmvlm
