#pragma once

#include <filesystem>

#include "mcpnet/image.hpp"

namespace mcpnet {

// Decodes a PNG into raw RGB, compositing any alpha over white. No palette
// snapping happens here. Throws UnreadableImage on any decode failure.
SketchImage read_png(const std::filesystem::path& path);

// Writes 8-bit RGB.
void write_png(const SketchImage& img, const std::filesystem::path& path);

}  // namespace mcpnet
