#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mcpnet/common.hpp"

namespace mcpnet {

struct Rgb {
  std::uint8_t r = 255, g = 255, b = 255;

  bool operator==(const Rgb& o) const { return r == o.r && g == o.g && b == o.b; }
  bool operator!=(const Rgb& o) const { return !(*this == o); }
};

inline constexpr Rgb kWhite{255, 255, 255};

inline int chebyshev_distance(Rgb a, Rgb b) {
  const int dr = std::abs(int(a.r) - int(b.r));
  const int dg = std::abs(int(a.g) - int(b.g));
  const int db = std::abs(int(a.b) - int(b.b));
  return std::max(dr, std::max(dg, db));
}

// RGB raster with white background; any non-white pixel is stroke foreground.
class SketchImage {
 public:
  SketchImage() = default;
  SketchImage(int width, int height, Rgb fill = kWhite)
      : width_(width), height_(height), pixels_(static_cast<std::size_t>(width) * height, fill) {
    if (width < 1 || height < 1) throw Error("image dimensions must be >= 1");
  }

  int width() const { return width_; }
  int height() const { return height_; }

  Rgb at(int row, int col) const { return pixels_[idx(row, col)]; }
  void set(int row, int col, Rgb c) { pixels_[idx(row, col)] = c; }

  bool is_foreground(int row, int col) const { return at(row, col) != kWhite; }

  std::size_t foreground_count() const {
    std::size_t n = 0;
    for (const Rgb& p : pixels_)
      if (p != kWhite) ++n;
    return n;
  }

  const std::vector<Rgb>& pixels() const { return pixels_; }

  bool operator==(const SketchImage& o) const {
    return width_ == o.width_ && height_ == o.height_ && pixels_ == o.pixels_;
  }

 private:
  std::size_t idx(int row, int col) const {
    return static_cast<std::size_t>(row) * width_ + col;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<Rgb> pixels_;
};

struct ComponentDef {
  std::string name;
  Rgb color;
};

// Named semantic components of one sketch category, each with a unique stroke
// color. Component ids are positions in this list.
struct CategorySpec {
  std::string category;
  std::vector<ComponentDef> components;

  int num_components() const { return static_cast<int>(components.size()); }

  // Index of the component with exactly this color, or -1.
  int component_of(Rgb color) const {
    for (std::size_t i = 0; i < components.size(); ++i)
      if (components[i].color == color) return static_cast<int>(i);
    return -1;
  }

  void validate() const;
};

CategorySpec load_category_spec(const std::filesystem::path& path);
void save_category_spec(const CategorySpec& spec, const std::filesystem::path& path);

}  // namespace mcpnet
