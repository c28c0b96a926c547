#include "cgt/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>

#include "cgt/rng.hpp"

namespace cgt::io {

namespace {

std::uint8_t to_byte(float v) {
  const float c = v < 0 ? 0.0f : (v > 1 ? 1.0f : v);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

}  // namespace

std::vector<std::uint8_t> to_bytes(const Image& image) {
  if (image.channels() != 3) throw ArgumentError("expected an RGB image, got " + image.shape().str());
  std::vector<std::uint8_t> bytes(image.size());
  auto d = image.data();
  for (std::size_t i = 0; i < d.size(); ++i) bytes[i] = to_byte(d[i]);
  return bytes;
}

Image from_bytes(const std::vector<std::uint8_t>& bytes, int height, int width) {
  Image img(Shape{height, width, 3});
  if (bytes.size() != img.size()) throw ArgumentError("pixel buffer size mismatch");
  auto d = img.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<float>(bytes[i]) / 255.0f;
  return img;
}

Image quantize(const Image& image) {
  return from_bytes(to_bytes(image), image.height(), image.width());
}

std::string image_hash(const Image& image) {
  const auto bytes = to_bytes(image);
  std::uint64_t h = fnv1a(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  h = mix64(h ^ (static_cast<std::uint64_t>(image.height()) << 32 | image.width()));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Image read_png(const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str()))
    throw IoError("cannot read PNG " + path.string() + ": " + png.message);
  png.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&png);
    throw IoError("cannot decode PNG " + path.string() + ": " + png.message);
  }
  return from_bytes(buf, static_cast<int>(png.height), static_cast<int>(png.width));
}

void write_png(const Image& image, const std::filesystem::path& path) {
  const auto bytes = to_bytes(image);
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width());
  png.height = static_cast<png_uint_32>(image.height());
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, bytes.data(), 0, nullptr))
    throw IoError("cannot write PNG " + path.string() + ": " + png.message);
}

}  // namespace cgt::io
