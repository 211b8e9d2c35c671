#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace asmvlm {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Row-major 8-bit RGB raster. Pixel (0,0) is the top-left corner.
class RasterImage {
 public:
  RasterImage() = default;
  RasterImage(int width_px, int height_px, Rgb fill = {});

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return pixels_.empty(); }

  bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  Rgb at(int x, int y) const;
  void set(int x, int y, Rgb color);

  std::span<const std::uint8_t> bytes() const noexcept { return pixels_; }

  /// Lower-case hex SHA-256 of the dimensions and pixel bytes.
  std::string content_hash() const;

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// Binary PPM (P6, maxval 255).
std::string encode_ppm(const RasterImage& image);
RasterImage decode_ppm(std::string_view data);
void write_ppm(const RasterImage& image, const std::filesystem::path& path);
RasterImage read_ppm(const std::filesystem::path& path);

/// 8-bit RGB PNG, used for data-URI image parts and for viewing.
std::string encode_png(const RasterImage& image);
void write_png(const RasterImage& image, const std::filesystem::path& path);

std::string base64_encode(std::string_view data);

}  // namespace asmvlm
