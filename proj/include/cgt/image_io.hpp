#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cgt/tensor.hpp"

namespace cgt::io {

/// Reads an 8-bit RGB PNG into a [0,1] HxWx3 tensor.
Image read_png(const std::filesystem::path& path);

/// Writes a [0,1] HxWx3 tensor as 8-bit RGB PNG (values rounded).
void write_png(const Image& image, const std::filesystem::path& path);

/// 8-bit representation as stored on disk.
std::vector<std::uint8_t> to_bytes(const Image& image);
Image from_bytes(const std::vector<std::uint8_t>& bytes, int height, int width);

/// Rounds every channel to the nearest 1/255 step, i.e. what a PNG round trip yields.
Image quantize(const Image& image);

/// FNV-1a over the 8-bit pixel bytes, as 16 hex digits.
std::string image_hash(const Image& image);

}  // namespace cgt::io
