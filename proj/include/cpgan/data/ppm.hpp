#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cpgan/data/image.hpp"
#include "cpgan/error.hpp"

namespace cpgan::data {

/// [-1, 1] -> [0, 255], linear with rounding.
inline std::uint8_t to_byte(float v) {
  const float scaled = (std::clamp(v, -1.0f, 1.0f) + 1.0f) * 0.5f * 255.0f;
  return static_cast<std::uint8_t>(std::lround(scaled));
}

inline float from_byte(std::uint8_t b) { return static_cast<float>(b) / 255.0f * 2.0f - 1.0f; }

/// Binary P6 encoding of a 3-channel image.
inline std::string encode_ppm(const Image& img) {
  if (img.channels != 3) throw ShapeError("encode_ppm: P6 needs 3 channels");
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  const std::size_t header = out.size();
  out.resize(header + img.plane() * 3);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        out[header + (y * img.width + x) * 3 + c] = static_cast<char>(to_byte(img.at(c, y, x)));
  return out;
}

inline Image decode_ppm(const std::string& bytes, const std::string& what = "ppm") {
  std::istringstream is(bytes);
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  is >> magic;
  auto skip_comments = [&] {
    is >> std::ws;
    while (is.peek() == '#') {
      std::string line;
      std::getline(is, line);
      is >> std::ws;
    }
  };
  skip_comments();
  is >> w;
  skip_comments();
  is >> h;
  skip_comments();
  is >> maxval;
  if (magic != "P6" || !is || w == 0 || h == 0 || maxval != 255)
    throw FormatError(what + ": not an 8-bit binary P6 image");
  is.get();  // single whitespace after maxval
  const auto offset = static_cast<std::size_t>(is.tellg());
  if (bytes.size() < offset + w * h * 3) throw FormatError(what + ": truncated pixel data");
  Image img = Image::filled(3, h, w, 0.0f);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        img.at(c, y, x) = from_byte(static_cast<std::uint8_t>(bytes[offset + (y * w + x) * 3 + c]));
  return img;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

inline void write_ppm(const std::filesystem::path& path, const Image& img) {
  write_file(path, encode_ppm(img));
}

inline Image read_ppm(const std::filesystem::path& path) {
  return decode_ppm(read_file(path), path.string());
}

}  // namespace cpgan::data
