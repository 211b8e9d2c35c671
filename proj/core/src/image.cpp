#include "asmvlm/image.hpp"

#include <openssl/evp.h>
#include <zlib.h>

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "asmvlm/error.hpp"
#include "asmvlm/hash.hpp"

namespace asmvlm {

RasterImage::RasterImage(int width_px, int height_px, Rgb fill) : width_(width_px), height_(height_px) {
  if (width_px <= 0 || height_px <= 0) {
    throw std::invalid_argument("RasterImage dimensions must be positive");
  }
  pixels_.resize(static_cast<std::size_t>(width_px) * height_px * 3);
  for (std::size_t i = 0; i < pixels_.size(); i += 3) {
    pixels_[i] = fill.r;
    pixels_[i + 1] = fill.g;
    pixels_[i + 2] = fill.b;
  }
}

Rgb RasterImage::at(int x, int y) const {
  if (!contains(x, y)) throw std::out_of_range("pixel outside image");
  const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
  return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
}

void RasterImage::set(int x, int y, Rgb color) {
  if (!contains(x, y)) throw std::out_of_range("pixel outside image");
  const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
  pixels_[i] = color.r;
  pixels_[i + 1] = color.g;
  pixels_[i + 2] = color.b;
}

std::string RasterImage::content_hash() const {
  std::string buffer = std::to_string(width_) + "x" + std::to_string(height_) + "\n";
  buffer.append(reinterpret_cast<const char*>(pixels_.data()), pixels_.size());
  return sha256_hex(buffer);
}

std::string encode_ppm(const RasterImage& image) {
  std::string out = "P6\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
  const auto bytes = image.bytes();
  out.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  return out;
}

namespace {

std::size_t skip_ppm_space(std::string_view data, std::size_t pos) {
  while (pos < data.size()) {
    if (data[pos] == '#') {
      while (pos < data.size() && data[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(data[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
  return pos;
}

int read_ppm_int(std::string_view data, std::size_t& pos) {
  pos = skip_ppm_space(data, pos);
  int value = 0;
  std::size_t digits = 0;
  while (pos < data.size() && std::isdigit(static_cast<unsigned char>(data[pos])) && digits < 9) {
    value = value * 10 + (data[pos] - '0');
    ++pos;
    ++digits;
  }
  if (digits == 0) throw Error(ErrorCode::IoError, "malformed PPM header");
  return value;
}

}  // namespace

RasterImage decode_ppm(std::string_view data) {
  if (data.size() < 2 || data.substr(0, 2) != "P6") throw Error(ErrorCode::IoError, "not a binary PPM");
  std::size_t pos = 2;
  const int width = read_ppm_int(data, pos);
  const int height = read_ppm_int(data, pos);
  const int maxval = read_ppm_int(data, pos);
  if (maxval != 255 || width <= 0 || height <= 0) throw Error(ErrorCode::IoError, "unsupported PPM");
  if (pos >= data.size() || !std::isspace(static_cast<unsigned char>(data[pos]))) {
    throw Error(ErrorCode::IoError, "malformed PPM header");
  }
  ++pos;
  const std::size_t expected = static_cast<std::size_t>(width) * height * 3;
  if (data.size() - pos != expected) throw Error(ErrorCode::IoError, "PPM payload size mismatch");
  RasterImage image(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t i = pos + (static_cast<std::size_t>(y) * width + x) * 3;
      image.set(x, y,
                {static_cast<std::uint8_t>(data[i]), static_cast<std::uint8_t>(data[i + 1]),
                 static_cast<std::uint8_t>(data[i + 2])});
    }
  }
  return image;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

void put_chunk(std::string& out, const char* type, const std::string& payload) {
  put_u32(out, static_cast<std::uint32_t>(payload.size()));
  std::string body(type, 4);
  body += payload;
  out += body;
  const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

void write_ppm(const RasterImage& image, const std::filesystem::path& path) { write_file(path, encode_ppm(image)); }

RasterImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return decode_ppm(buffer.str());
}

std::string encode_png(const RasterImage& image) {
  const int w = image.width();
  const int h = image.height();
  const auto bytes = image.bytes();
  std::string raw;
  raw.reserve(static_cast<std::size_t>(h) * (w * 3 + 1));
  for (int y = 0; y < h; ++y) {
    raw.push_back('\0');  // filter: none
    raw.append(reinterpret_cast<const char*>(bytes.data()) + static_cast<std::size_t>(y) * w * 3,
               static_cast<std::size_t>(w) * 3);
  }
  uLongf compressed_size = compressBound(static_cast<uLong>(raw.size()));
  std::string compressed(compressed_size, '\0');
  if (compress2(reinterpret_cast<Bytef*>(compressed.data()), &compressed_size,
                reinterpret_cast<const Bytef*>(raw.data()), static_cast<uLong>(raw.size()), 6) != Z_OK) {
    throw Error(ErrorCode::IoError, "zlib compression failed");
  }
  compressed.resize(compressed_size);

  std::string out("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(w));
  put_u32(ihdr, static_cast<std::uint32_t>(h));
  ihdr += std::string("\x08\x02\x00\x00\x00", 5);  // 8-bit, truecolour, deflate, no filter, no interlace
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", compressed);
  put_chunk(out, "IEND", "");
  return out;
}

void write_png(const RasterImage& image, const std::filesystem::path& path) { write_file(path, encode_png(image)); }

std::string base64_encode(std::string_view data) {
  std::string out(4 * ((data.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(data.data()), static_cast<int>(data.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

}  // namespace asmvlm
