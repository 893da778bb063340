#include "mcpnet/sketchio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "mcpnet/png_io.hpp"

namespace mcpnet {

namespace {

constexpr int kColorTolerance = 8;  // per-channel slack for anti-aliased strokes

struct Bounds {
  int top, left, bottom, right;  // inclusive
  int height() const { return bottom - top + 1; }
  int width() const { return right - left + 1; }
};

std::optional<Bounds> foreground_bounds(const SketchImage& img) {
  Bounds b{img.height(), img.width(), -1, -1};
  for (int r = 0; r < img.height(); ++r) {
    for (int c = 0; c < img.width(); ++c) {
      if (!img.is_foreground(r, c)) continue;
      b.top = std::min(b.top, r);
      b.left = std::min(b.left, c);
      b.bottom = std::max(b.bottom, r);
      b.right = std::max(b.right, c);
    }
  }
  if (b.bottom < 0) return std::nullopt;
  return b;
}

}  // namespace

void CategorySpec::validate() const {
  if (components.size() < 3)
    throw Error("category '" + category + "' needs at least 3 components, has " +
                std::to_string(components.size()));
  std::set<std::array<std::uint8_t, 3>> seen;
  for (const ComponentDef& comp : components) {
    if (comp.color == kWhite)
      throw Error("component '" + comp.name + "' may not use white");
    if (!seen.insert({comp.color.r, comp.color.g, comp.color.b}).second)
      throw Error("duplicate component color in category '" + category + "'");
  }
}

CategorySpec load_category_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open category spec: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad category spec JSON (" + path.string() + "): " + e.what());
  }
  CategorySpec spec;
  try {
    spec.category = j.at("category").get<std::string>();
    for (const auto& comp : j.at("components")) {
      const auto rgb = comp.at("rgb");
      spec.components.push_back({comp.at("name").get<std::string>(),
                                 Rgb{rgb.at(0).get<std::uint8_t>(), rgb.at(1).get<std::uint8_t>(),
                                     rgb.at(2).get<std::uint8_t>()}});
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad category spec JSON (" + path.string() + "): " + e.what());
  }
  spec.validate();
  return spec;
}

void save_category_spec(const CategorySpec& spec, const std::filesystem::path& path) {
  nlohmann::json comps = nlohmann::json::array();
  for (const ComponentDef& comp : spec.components)
    comps.push_back({{"name", comp.name}, {"rgb", {comp.color.r, comp.color.g, comp.color.b}}});
  nlohmann::json j{{"category", spec.category}, {"components", comps}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write category spec: " + path.string());
  out << j.dump(2) << '\n';
}

SketchImage load_sketch(const std::filesystem::path& path, const CategorySpec& spec) {
  spec.validate();
  SketchImage img = read_png(path);
  for (int r = 0; r < img.height(); ++r) {
    for (int c = 0; c < img.width(); ++c) {
      const Rgb px = img.at(r, c);
      if (px == kWhite) continue;
      int best = -1, best_dist = kColorTolerance + 1;
      for (int i = 0; i < spec.num_components(); ++i) {
        const int d = chebyshev_distance(px, spec.components[static_cast<std::size_t>(i)].color);
        if (d < best_dist) {
          best = i;
          best_dist = d;
        }
      }
      if (best < 0)
        throw UnknownColor("pixel (" + std::to_string(c) + ", " + std::to_string(r) + ") color (" +
                           std::to_string(px.r) + "," + std::to_string(px.g) + "," +
                           std::to_string(px.b) + ") matches no component of '" + spec.category +
                           "'");
      img.set(r, c, spec.components[static_cast<std::size_t>(best)].color);
    }
  }
  return img;
}

SketchImage crop_and_center(const SketchImage& img, int canvas) {
  const auto bounds = foreground_bounds(img);
  if (!bounds) throw EmptySketch("crop_and_center: no foreground pixels");
  if (bounds->height() > canvas || bounds->width() > canvas)
    throw SketchLargerThanCanvas("sketch " + std::to_string(bounds->width()) + "x" +
                                 std::to_string(bounds->height()) + " exceeds canvas " +
                                 std::to_string(canvas));

  const int row0 = (canvas - bounds->height() + 1) / 2;
  const int col0 = (canvas - bounds->width() + 1) / 2;
  SketchImage out(canvas, canvas);
  for (int r = bounds->top; r <= bounds->bottom; ++r)
    for (int c = bounds->left; c <= bounds->right; ++c)
      if (img.is_foreground(r, c))
        out.set(row0 + (r - bounds->top), col0 + (c - bounds->left), img.at(r, c));
  return out;
}

namespace {

class Mask {
 public:
  explicit Mask(const SketchImage& img)
      : w_(img.width()), h_(img.height()), on_(static_cast<std::size_t>(w_) * h_) {
    for (int r = 0; r < h_; ++r)
      for (int c = 0; c < w_; ++c) on_[idx(r, c)] = img.is_foreground(r, c);
  }

  bool at(int r, int c) const {
    if (r < 0 || r >= h_ || c < 0 || c >= w_) return false;
    return on_[idx(r, c)];
  }
  void clear(int r, int c) { on_[idx(r, c)] = false; }

  int width() const { return w_; }
  int height() const { return h_; }

  // Neighbors p2..p9 clockwise from north.
  std::array<int, 8> ring(int r, int c) const {
    return {at(r - 1, c), at(r - 1, c + 1), at(r, c + 1), at(r + 1, c + 1),
            at(r + 1, c), at(r + 1, c - 1), at(r, c - 1), at(r - 1, c - 1)};
  }

  static int neighbor_count(const std::array<int, 8>& p) {
    int b = 0;
    for (int v : p) b += v;
    return b;
  }

  static int transitions(const std::array<int, 8>& p) {
    int a = 0;
    for (int i = 0; i < 8; ++i)
      if (p[static_cast<std::size_t>(i)] == 0 && p[static_cast<std::size_t>((i + 1) % 8)] == 1)
        ++a;
    return a;
  }

  bool in_full_block(int r, int c) const {
    for (int dr : {-1, 0})
      for (int dc : {-1, 0})
        if (at(r + dr, c + dc) && at(r + dr, c + dc + 1) && at(r + dr + 1, c + dc) &&
            at(r + dr + 1, c + dc + 1))
          return true;
    return false;
  }

 private:
  std::size_t idx(int r, int c) const { return static_cast<std::size_t>(r) * w_ + c; }

  int w_, h_;
  std::vector<char> on_;
};

}  // namespace

SketchImage thin(const SketchImage& img) {
  Mask mask(img);

  // Two-subcycle boundary peeling; all deletions of a subcycle are decided on
  // the same snapshot, so the pass is order-independent.
  bool changed = true;
  while (changed) {
    changed = false;
    for (int phase = 0; phase < 2; ++phase) {
      std::vector<std::pair<int, int>> kill;
      for (int r = 0; r < mask.height(); ++r) {
        for (int c = 0; c < mask.width(); ++c) {
          if (!mask.at(r, c)) continue;
          const auto p = mask.ring(r, c);
          const int b = Mask::neighbor_count(p);
          if (b < 2 || b > 6) continue;
          if (Mask::transitions(p) != 1) continue;
          // p[0]=N, p[2]=E, p[4]=S, p[6]=W
          const bool cond = phase == 0 ? (p[0] * p[2] * p[4] == 0 && p[2] * p[4] * p[6] == 0)
                                       : (p[0] * p[2] * p[6] == 0 && p[0] * p[4] * p[6] == 0);
          if (cond) kill.emplace_back(r, c);
        }
      }
      for (auto [r, c] : kill) mask.clear(r, c);
      changed = changed || !kill.empty();
    }
  }

  // Peeling can leave a 2x2 block where thick regions meet. Remove members
  // that are 8-simple (one neighborhood transition) until no block remains.
  changed = true;
  while (changed) {
    changed = false;
    for (int r = 0; r < mask.height(); ++r) {
      for (int c = 0; c < mask.width(); ++c) {
        if (!mask.at(r, c) || !mask.in_full_block(r, c)) continue;
        const auto p = mask.ring(r, c);
        if (Mask::transitions(p) == 1 && Mask::neighbor_count(p) >= 2) {
          mask.clear(r, c);
          changed = true;
        }
      }
    }
  }

  SketchImage out(img.width(), img.height());
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c)
      if (mask.at(r, c)) out.set(r, c, img.at(r, c));
  return out;
}

LabeledPointSet extract_points(const SketchImage& img, const CategorySpec& spec, Index n_points) {
  if (n_points < 1) throw Error("extract_points: n_points must be >= 1");

  std::vector<std::pair<int, int>> scan;  // (row, col) ascending
  std::vector<int> scan_labels;
  for (int r = 0; r < img.height(); ++r) {
    for (int c = 0; c < img.width(); ++c) {
      if (!img.is_foreground(r, c)) continue;
      const int comp = spec.component_of(img.at(r, c));
      if (comp < 0)
        throw UnknownColor("extract_points: pixel (" + std::to_string(c) + ", " +
                           std::to_string(r) + ") has a color outside the spec");
      scan.emplace_back(r, c);
      scan_labels.push_back(comp);
    }
  }
  const Index count = static_cast<Index>(scan.size());
  if (count == 0) throw EmptySketch("extract_points: no foreground pixels");

  auto normalized = [&](int v, int extent) {
    return extent > 1 ? static_cast<float>(double(v) / double(extent - 1)) : 0.0f;
  };

  LabeledPointSet out;
  out.base.points.resize(n_points, 2);
  out.labels.resize(static_cast<std::size_t>(n_points));
  out.base.n_original = std::min(count, n_points);

  for (Index i = 0; i < n_points; ++i) {
    // Subsample by uniform stride when oversized, repeat cyclically when
    // undersized; both collapse to the identity when count == n_points.
    const Index src = count > n_points ? (i * count) / n_points : i % count;
    const auto [row, col] = scan[static_cast<std::size_t>(src)];
    out.base.points(i, 0) = normalized(col, img.width());
    out.base.points(i, 1) = normalized(row, img.height());
    out.labels[static_cast<std::size_t>(i)] = scan_labels[static_cast<std::size_t>(src)];
  }
  return out;
}

SketchImage perturb(const SketchImage& img, const CategorySpec& spec,
                    std::optional<int> drop_component, int dot_count, std::uint64_t seed) {
  if (drop_component && (*drop_component < 0 || *drop_component >= spec.num_components()))
    throw UnknownComponent("component id " + std::to_string(*drop_component) +
                           " outside spec '" + spec.category + "'");

  SketchImage out = img;
  if (drop_component) {
    const Rgb color = spec.components[static_cast<std::size_t>(*drop_component)].color;
    for (int r = 0; r < out.height(); ++r)
      for (int c = 0; c < out.width(); ++c)
        if (out.at(r, c) == color) out.set(r, c, kWhite);
  }

  Rng rng(seed);
  for (int placed = 0; placed < dot_count;) {
    const int r = static_cast<int>(rng.index(static_cast<std::size_t>(out.height())));
    const int c = static_cast<int>(rng.index(static_cast<std::size_t>(out.width())));
    if (out.is_foreground(r, c)) continue;  // resample until a background cell
    const int comp = static_cast<int>(rng.index(static_cast<std::size_t>(spec.num_components())));
    out.set(r, c, spec.components[static_cast<std::size_t>(comp)].color);
    ++placed;
  }
  return out;
}

SketchImage labels_to_image(const LabeledPointSet& pts, const CategorySpec& spec, int canvas) {
  SketchImage out(canvas, canvas);
  for (Index i = 0; i < pts.base.n_original; ++i) {
    const int col = static_cast<int>(std::lround(double(pts.base.points(i, 0)) * (canvas - 1)));
    const int row = static_cast<int>(std::lround(double(pts.base.points(i, 1)) * (canvas - 1)));
    const int label = pts.labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= spec.num_components())
      throw UnknownComponent("label " + std::to_string(label) + " outside spec '" +
                             spec.category + "'");
    out.set(row, col, spec.components[static_cast<std::size_t>(label)].color);
  }
  return out;
}

}  // namespace mcpnet
