#include <algorithm>
#include <cmath>

#include "mcpnet/data.hpp"
#include "mcpnet/png_io.hpp"

namespace mcpnet {

namespace {

// All template geometry lives in unit coordinates with y pointing down;
// pixels are produced with 1-px Bresenham strokes so thinning is a near
// no-op on generated sketches.
class StrokeCanvas {
 public:
  explicit StrokeCanvas(int canvas) : img_(canvas, canvas), canvas_(canvas) {}

  void line(double x0, double y0, double x1, double y1, Rgb color) {
    int c0 = px(x0), r0 = px(y0), c1 = px(x1), r1 = px(y1);
    const int dc = std::abs(c1 - c0), dr = -std::abs(r1 - r0);
    const int sc = c0 < c1 ? 1 : -1, sr = r0 < r1 ? 1 : -1;
    int err = dc + dr;
    while (true) {
      img_.set(r0, c0, color);
      if (c0 == c1 && r0 == r1) break;
      const int e2 = 2 * err;
      if (e2 >= dr) {
        err += dr;
        c0 += sc;
      }
      if (e2 <= dc) {
        err += dc;
        r0 += sr;
      }
    }
  }

  void polyline(const std::vector<std::pair<double, double>>& pts, Rgb color) {
    for (std::size_t i = 1; i < pts.size(); ++i)
      line(pts[i - 1].first, pts[i - 1].second, pts[i].first, pts[i].second, color);
  }

  // Quadratic bezier, drawn as short chords.
  void arc(double x0, double y0, double cx, double cy, double x1, double y1, Rgb color) {
    const int steps = 24;
    double px_prev = x0, py_prev = y0;
    for (int s = 1; s <= steps; ++s) {
      const double t = double(s) / steps;
      const double u = 1.0 - t;
      const double x = u * u * x0 + 2 * u * t * cx + t * t * x1;
      const double y = u * u * y0 + 2 * u * t * cy + t * t * y1;
      line(px_prev, py_prev, x, y, color);
      px_prev = x;
      py_prev = y;
    }
  }

  SketchImage take() { return std::move(img_); }

 private:
  int px(double v) const {
    const int p = static_cast<int>(std::lround(v * (canvas_ - 1)));
    return std::clamp(p, 0, canvas_ - 1);
  }

  SketchImage img_;
  int canvas_;
};

constexpr Rgb kRed{255, 0, 0};
constexpr Rgb kGreen{0, 255, 0};
constexpr Rgb kBlue{0, 0, 255};
constexpr Rgb kMagenta{255, 0, 255};

void draw_lamp(StrokeCanvas& canvas, Rng& rng, double jitter, double noise) {
  auto j = [&](double amp) { return rng.uniform(-amp, amp) * jitter; };

  const double cx = 0.5 + j(0.06);
  const double shade_top = 0.16 + j(0.04);
  const double shade_bottom = shade_top + 0.2 + j(0.04);
  const double top_hw = 0.07 + rng.uniform(0.0, 0.04) * jitter;
  const double bottom_hw = 0.19 + j(0.05);
  // shade: trapezoid outline
  canvas.polyline({{cx - top_hw, shade_top},
                   {cx + top_hw, shade_top},
                   {cx + bottom_hw, shade_bottom},
                   {cx - bottom_hw, shade_bottom},
                   {cx - top_hw, shade_top}},
                  kBlue);

  // tube: near-vertical stroke with a little curvature
  const double tube_bottom = shade_bottom + 0.24 + j(0.05);
  const double lean = j(0.02);
  canvas.arc(cx, shade_bottom, cx + lean + rng.uniform(-0.03, 0.03) * noise,
             (shade_bottom + tube_bottom) / 2, cx + lean, tube_bottom, kRed);

  // base: shallow arc resting under the tube
  const double base_hw = 0.15 + j(0.04);
  const double base_y = tube_bottom;
  canvas.arc(cx - base_hw, base_y + 0.05, cx, base_y - 0.04 * noise, cx + base_hw, base_y + 0.05,
             kGreen);
}

void draw_chair(StrokeCanvas& canvas, Rng& rng, double jitter, double noise) {
  auto j = [&](double amp) { return rng.uniform(-amp, amp) * jitter; };

  const double cx = 0.5 + j(0.05);
  const double back_top = 0.14 + j(0.04);
  const double seat_y = 0.52 + j(0.04);
  const double back_hw = 0.13 + j(0.03);
  // back: rectangle outline
  canvas.polyline({{cx - back_hw, back_top},
                   {cx + back_hw, back_top},
                   {cx + back_hw, seat_y},
                   {cx - back_hw, seat_y},
                   {cx - back_hw, back_top}},
                  kRed);

  // seat: wider stroke with slight sag
  const double seat_hw = back_hw + 0.1 + rng.uniform(0.0, 0.04) * jitter;
  canvas.arc(cx - seat_hw, seat_y, cx, seat_y + 0.03 * noise, cx + seat_hw, seat_y, kGreen);

  // legs: two near-vertical strokes
  const double leg_bottom = 0.86 + j(0.03);
  const double splay = rng.uniform(0.0, 0.04) * jitter;
  canvas.line(cx - seat_hw + 0.02, seat_y, cx - seat_hw + 0.02 - splay, leg_bottom, kBlue);
  canvas.line(cx + seat_hw - 0.02, seat_y, cx + seat_hw - 0.02 + splay, leg_bottom, kBlue);

  // stretcher: bar between the legs
  const double bar_y = seat_y + (leg_bottom - seat_y) * (0.55 + j(0.1));
  canvas.line(cx - seat_hw + 0.03, bar_y, cx + seat_hw - 0.03, bar_y, kMagenta);
}

void draw_rifle(StrokeCanvas& canvas, Rng& rng, double jitter, double noise) {
  auto j = [&](double amp) { return rng.uniform(-amp, amp) * jitter; };

  const double y = 0.45 + j(0.05);
  const double x0 = 0.12 + j(0.03);
  const double x1 = 0.9 + j(0.02);
  const double stock_x = x0 + 0.18 + j(0.03);

  // stock: quadrilateral outline at the rear
  canvas.polyline({{stock_x, y},
                   {x0, y + 0.02 + rng.uniform(0.0, 0.03) * jitter},
                   {x0 + 0.02, y + 0.16 + j(0.03)},
                   {stock_x, y + 0.07 + j(0.02)},
                   {stock_x, y}},
                  kGreen);

  // barrel: long horizontal stroke
  canvas.line(stock_x, y, x1, y + j(0.02), kRed);

  // trigger: small hook under the barrel
  const double trig_x = stock_x + 0.12 + j(0.02);
  canvas.arc(trig_x, y + 0.03, trig_x + 0.04 * noise, y + 0.1, trig_x + 0.06, y + 0.05, kBlue);

  // magazine: slanted box outline
  const double mag_x = trig_x + 0.12 + j(0.02);
  const double drop = 0.12 + j(0.03);
  canvas.polyline({{mag_x, y + 0.02},
                   {mag_x + 0.03, y + 0.02 + drop},
                   {mag_x + 0.1, y + 0.02 + drop},
                   {mag_x + 0.07, y + 0.02},
                   {mag_x, y + 0.02}},
                  kMagenta);
}

}  // namespace

CategorySpec synth_category_spec(const std::string& template_id) {
  if (template_id == "lamp")
    return {"lamp", {{"tube", kRed}, {"base", kGreen}, {"shade", kBlue}}};
  if (template_id == "chair")
    return {"chair", {{"back", kRed}, {"seat", kGreen}, {"legs", kBlue}, {"stretcher", kMagenta}}};
  if (template_id == "rifle")
    return {"rifle",
            {{"barrel", kRed}, {"stock", kGreen}, {"trigger", kBlue}, {"magazine", kMagenta}}};
  throw Error("unknown synthetic template '" + template_id + "' (lamp|chair|rifle)");
}

Manifest gen_synthetic(const SynthConfig& cfg, const std::filesystem::path& out_dir,
                       double train_fraction) {
  if (cfg.count < 1) throw Error("synthetic count must be >= 1");
  if (cfg.canvas < 64) throw Error("synthetic canvas must be >= 64");
  const CategorySpec spec = synth_category_spec(cfg.template_id);

  std::filesystem::create_directories(out_dir);

  Manifest manifest;
  manifest.root = out_dir;
  manifest.specs.emplace(spec.category, spec);

  for (int i = 0; i < cfg.count; ++i) {
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(i)));
    StrokeCanvas canvas(cfg.canvas);
    if (cfg.template_id == "lamp")
      draw_lamp(canvas, rng, cfg.jitter, cfg.noise);
    else if (cfg.template_id == "chair")
      draw_chair(canvas, rng, cfg.jitter, cfg.noise);
    else
      draw_rifle(canvas, rng, cfg.jitter, cfg.noise);

    char name[64];
    std::snprintf(name, sizeof(name), "%s_%04d.png", spec.category.c_str(), i);
    write_png(canvas.take(), out_dir / name);
    manifest.records.push_back({name, spec.category, "train"});
  }

  manifest = split(manifest, train_fraction, mix_seed(cfg.seed, 0x5117));
  save_manifest(manifest);
  return manifest;
}

}  // namespace mcpnet
