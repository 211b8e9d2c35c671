#include "asmvlm/marking.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <string>

#include "asmvlm/error.hpp"

namespace asmvlm {

namespace {

constexpr int kGlyphW = 5;
constexpr int kGlyphH = 7;
constexpr int kMaxDigits = 3;

// 5x7 digit glyphs, one byte per row, bit 4 is the leftmost column.
constexpr std::array<std::array<std::uint8_t, kGlyphH>, 10> kDigits{{
    {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E},
    {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E},
    {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F},
    {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E},
    {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02},
    {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E},
    {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E},
    {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},
    {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E},
    {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C},
}};

int text_width(int digits, int scale) { return (digits * kGlyphW + (digits - 1)) * scale; }

void draw_text(RasterImage& image, const std::string& text, PixelCoord center, int scale, Rgb color) {
  const int w = text_width(static_cast<int>(text.size()), scale);
  const int h = kGlyphH * scale;
  const int left = center.x - (w - 1) / 2;
  const int top = center.y - (h - 1) / 2;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto& glyph = kDigits[static_cast<std::size_t>(text[i] - '0')];
    const int gx = left + static_cast<int>(i) * (kGlyphW + 1) * scale;
    for (int row = 0; row < kGlyphH; ++row) {
      for (int col = 0; col < kGlyphW; ++col) {
        if (!(glyph[static_cast<std::size_t>(row)] & (0x10 >> col))) continue;
        for (int sy = 0; sy < scale; ++sy) {
          for (int sx = 0; sx < scale; ++sx) {
            const int x = gx + col * scale + sx;
            const int y = top + row * scale + sy;
            if (image.contains(x, y)) image.set(x, y, color);
          }
        }
      }
    }
  }
}

Rgb disc_color(const MarkStyle& style, int marker_id) {
  if (style.disc_color_rule == DiscColorRule::Uniform) return style.object_disc_color;
  return is_object_marker(marker_id) ? style.object_disc_color : style.location_disc_color;
}

}  // namespace

int MarkStyle::min_disc_radius() const {
  const double half_w = 0.5 * text_width(kMaxDigits, std::max(font_scale, 1));
  const double half_h = 0.5 * kGlyphH * std::max(font_scale, 1);
  return static_cast<int>(std::ceil(std::hypot(half_w, half_h) + 1.0));
}

void MarkStyle::validate() const {
  if (font_scale < 1) throw Error(ErrorCode::InvalidStyle, "font_scale must be >= 1");
  if (disc_radius_px < min_disc_radius()) {
    throw Error(ErrorCode::InvalidStyle, "disc radius " + std::to_string(disc_radius_px) + " below minimum " +
                                             std::to_string(min_disc_radius()));
  }
  if (text_color == object_disc_color || text_color == location_disc_color) {
    throw Error(ErrorCode::InvalidStyle, "text colour must differ from the disc colours");
  }
}

bool in_marker_disc(int px, int py, PixelCoord center, int radius) {
  const long dx = px - center.x;
  const long dy = py - center.y;
  return dx * dx + dy * dy <= static_cast<long>(radius) * radius;
}

RasterImage mark_image(const RasterImage& image, const AnnotationSet& annotations, const MarkStyle& style) {
  style.validate();
  std::vector<const PointAnnotation*> ordered;
  std::set<int> seen;
  for (const auto& a : annotations) {
    if (!seen.insert(a.marker_id).second) {
      throw Error(ErrorCode::DuplicateMarkerId, "marker " + std::to_string(a.marker_id) + " appears twice");
    }
    if (!image.contains(a.pixel.x, a.pixel.y)) {
      throw Error(ErrorCode::AnnotationOutOfBounds, "marker " + std::to_string(a.marker_id) + " outside the image");
    }
    if (a.marker_id < 0 || a.marker_id > 999) {
      throw Error(ErrorCode::InvalidStyle, "marker " + std::to_string(a.marker_id) + " does not fit in the disc");
    }
    ordered.push_back(&a);
  }
  std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->marker_id < b->marker_id; });

  RasterImage out = image;
  const int r = style.disc_radius_px;
  for (const auto* a : ordered) {
    const Rgb fill = disc_color(style, a->marker_id);
    for (int y = a->pixel.y - r; y <= a->pixel.y + r; ++y) {
      for (int x = a->pixel.x - r; x <= a->pixel.x + r; ++x) {
        if (out.contains(x, y) && in_marker_disc(x, y, a->pixel, r)) out.set(x, y, fill);
      }
    }
    draw_text(out, std::to_string(a->marker_id), a->pixel, style.font_scale, style.text_color);
  }
  return out;
}

MarkedTriplet mark_triplet(const ImageTriplet& triplet, const TripletAnnotations& annotations,
                           const MarkStyle& style) {
  std::map<int, std::string> labels;
  for (const AnnotationSet* set : {&annotations.object, &annotations.current, &annotations.goal}) {
    for (const auto& a : *set) {
      auto [it, inserted] = labels.emplace(a.marker_id, a.label);
      if (!inserted && it->second != a.label) {
        throw Error(ErrorCode::DuplicateMarkerIdAcrossTriplet,
                    "marker " + std::to_string(a.marker_id) + " names both '" + it->second + "' and '" + a.label + "'");
      }
    }
  }
  MarkedTriplet out;
  out.annotations = annotations;
  out.images.object_img = mark_image(triplet.object_img, annotations.object, style);
  out.images.current_img = mark_image(triplet.current_img, annotations.current, style);
  out.images.goal_img = mark_image(triplet.goal_img, annotations.goal, style);
  return out;
}

}  // namespace asmvlm
