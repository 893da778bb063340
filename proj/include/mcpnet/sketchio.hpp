#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "mcpnet/image.hpp"
#include "mcpnet/pointset.hpp"

namespace mcpnet {

// Decodes a PNG (8-bit RGB or RGBA; alpha is composited over white) and snaps
// every pixel to the spec palette. A pixel must be exactly white or within a
// per-channel distance of 8 of some component color; anything else throws
// UnknownColor.
SketchImage load_sketch(const std::filesystem::path& path, const CategorySpec& spec);

// Places the foreground bounding box at the center of a fresh canvas x canvas
// image without scaling. Off-by-one slack goes to the top-left margin.
SketchImage crop_and_center(const SketchImage& img, int canvas);

// Morphological thinning of the foreground mask down to 1-pixel-wide lines
// (two-subcycle boundary peeling plus a residual 2x2-block cleanup).
// Surviving pixels keep their original color.
SketchImage thin(const SketchImage& img);

// Enumerates foreground pixels in scan order (ascending row, then column),
// normalizes coordinates to [0,1], and resizes the sequence to n_points by
// uniform-stride subsampling or cyclic repetition padding.
LabeledPointSet extract_points(const SketchImage& img, const CategorySpec& spec, Index n_points);

// Noise model: optionally blanks one component, then stamps dot_count
// single-pixel dots at seeded-random background positions with seeded-random
// component colors.
SketchImage perturb(const SketchImage& img, const CategorySpec& spec,
                    std::optional<int> drop_component, int dot_count, std::uint64_t seed);

// Renders the original (non-padded) points of a labeled point set onto a
// white canvas in their component colors.
SketchImage labels_to_image(const LabeledPointSet& pts, const CategorySpec& spec, int canvas);

}  // namespace mcpnet
