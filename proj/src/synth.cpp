#include "cgt/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cgt/det_eval.hpp"
#include "cgt/image_io.hpp"
#include "cgt/rng.hpp"

namespace cgt::synth {

namespace {

struct Rect {
  double x0, y0, x1, y1;
  bool contains(double x, double y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
};

/// Geometric parts of a figure; all in pixel coordinates.
struct Figure {
  double head_cx, head_cy, head_r;
  Rect torso, arm_l, arm_r, leg_l, leg_r;
};

Figure layout(const PersonSpec& p) {
  const double h = p.height;
  const double w = p.width_ratio * h;
  const double top = p.foot_y - h;
  const double r = p.head_ratio * h;
  const double tw = 0.6 * w;
  const double lw = tw * (1.0 - p.leg_gap) / 2.0;
  const double hip = top + 0.58 * h;
  Figure f{};
  f.head_cx = p.center_x;
  f.head_cy = top + r;
  f.head_r = r;
  f.torso = {p.center_x - tw / 2, top + 2 * r, p.center_x + tw / 2, hip};
  f.arm_l = {p.center_x - w / 2, top + 2 * r + 0.02 * h, p.center_x - tw / 2, top + 0.52 * h};
  f.arm_r = {p.center_x + tw / 2, top + 2 * r + 0.02 * h, p.center_x + w / 2, top + 0.52 * h};
  f.leg_l = {p.center_x - tw / 2, hip, p.center_x - tw / 2 + lw, p.foot_y};
  f.leg_r = {p.center_x + tw / 2 - lw, hip, p.center_x + tw / 2, p.foot_y};
  return f;
}

enum class Part { none, head, body, legs };

Part part_at(const Figure& f, double x, double y) {
  const double dx = x - f.head_cx, dy = y - f.head_cy;
  if (dx * dx + dy * dy <= f.head_r * f.head_r) return Part::head;
  if (f.torso.contains(x, y) || f.arm_l.contains(x, y) || f.arm_r.contains(x, y)) return Part::body;
  if (f.leg_l.contains(x, y) || f.leg_r.contains(x, y)) return Part::legs;
  return Part::none;
}

Rgb hsv(double h, double s, double v) {
  const double c = v * s;
  const double hp = std::fmod(h * 6.0, 6.0);
  const double x = c * (1 - std::abs(std::fmod(hp, 2.0) - 1));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp)) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  const double m = v - c;
  return {static_cast<float>(r + m), static_cast<float>(g + m), static_cast<float>(b + m)};
}

Box person_extent(const PersonSpec& p) {
  const double w = p.width_ratio * p.height;
  return {p.center_x - w / 2, p.foot_y - p.height, p.center_x + w / 2, p.foot_y};
}

}  // namespace

SceneSpec sample_scene(std::uint64_t seed) {
  Rng rng(derive_seed({seed, 0x7363656eULL}));
  auto uni = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  SceneSpec s;
  s.seed = seed;
  for (int c = 0; c < 3; ++c) {
    s.background_top[c] = static_cast<float>(uni(0.15, 0.85));
    s.background_bottom[c] = static_cast<float>(uni(0.15, 0.85));
  }
  s.noise_sigma = uni(0.01, 0.04);
  const int count = std::uniform_int_distribution<int>(1, 6)(rng);
  std::vector<Box> placed;
  for (int i = 0; i < count; ++i) {
    PersonSpec p;
    for (int attempt = 0; attempt < 50; ++attempt) {
      p.height = uni(12.0, 48.0);
      p.width_ratio = uni(0.38, 0.46);
      const double w = p.width_ratio * p.height;
      p.center_x = uni(w / 2 + 1, s.width - w / 2 - 1);
      p.foot_y = uni(p.height + 1, s.height - 1);
      const Box b = person_extent(p);
      bool ok = true;
      for (const Box& o : placed)
        if (eval::iou(b, o) > 0.35) ok = false;
      if (ok) break;
    }
    p.head_ratio = uni(0.11, 0.14);
    p.leg_gap = uni(0.2, 0.4);
    p.body = hsv(uni(0, 1), uni(0.5, 1.0), uni(0.4, 1.0));
    const double skin = uni(-0.1, 0.1);
    p.head = {static_cast<float>(0.85 + skin), static_cast<float>(0.65 + skin),
              static_cast<float>(0.50 + skin)};
    p.legs = {static_cast<float>(uni(0.05, 0.35)), static_cast<float>(uni(0.05, 0.35)),
              static_cast<float>(uni(0.05, 0.35))};
    placed.push_back(person_extent(p));
    s.persons.push_back(p);
  }
  // Farther (higher) figures are painted first.
  std::stable_sort(s.persons.begin(), s.persons.end(),
                   [](const PersonSpec& a, const PersonSpec& b) { return a.foot_y < b.foot_y; });
  return s;
}

Tensor person_mask(const PersonSpec& p, int height, int width) {
  Tensor mask(Shape{height, width, 1});
  const Figure f = layout(p);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      if (part_at(f, x + 0.5, y + 0.5) != Part::none) mask.at(y, x, 0) = 1.0f;
  return mask;
}

Box mask_box(const Tensor& mask, float level) {
  int x0 = mask.width(), y0 = mask.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask.at(y, x, 0) > level) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
  if (x1 < 0) return Box{};
  return Box{static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x1 + 1),
             static_cast<double>(y1 + 1)};
}

RenderedScene render(const SceneSpec& spec) {
  RenderedScene out;
  out.image = Image(Shape{spec.height, spec.width, 3});
  for (int y = 0; y < spec.height; ++y) {
    const float t = spec.height > 1 ? static_cast<float>(y) / (spec.height - 1) : 0.0f;
    for (int x = 0; x < spec.width; ++x)
      for (int c = 0; c < 3; ++c)
        out.image.at(y, x, c) = (1 - t) * spec.background_top[c] + t * spec.background_bottom[c];
  }
  for (const PersonSpec& p : spec.persons) {
    const Figure f = layout(p);
    for (int y = 0; y < spec.height; ++y)
      for (int x = 0; x < spec.width; ++x) {
        const Part part = part_at(f, x + 0.5, y + 0.5);
        if (part == Part::none) continue;
        const Rgb& col = part == Part::head ? p.head : (part == Part::body ? p.body : p.legs);
        for (int c = 0; c < 3; ++c) out.image.at(y, x, c) = col[c];
      }
    out.boxes.push_back(mask_box(person_mask(p, spec.height, spec.width)));
  }
  Rng rng(derive_seed({spec.seed, 0x6e6f6973ULL}));
  std::normal_distribution<float> noise(0.0f, static_cast<float>(spec.noise_sigma));
  for (float& v : out.image.storage()) v += noise(rng);
  clamp01(out.image);
  return out;
}

GeneratedData generate_synthetic_dataset(int n_train_val, int n_test, std::uint64_t seed,
                                         const std::filesystem::path& out_dir) {
  if (n_train_val <= 0 || n_test <= 0) throw ArgumentError("dataset sizes must be positive");
  namespace fs = std::filesystem;
  GeneratedData g;
  auto write_split = [&](const char* split, const char* prefix, int n, std::uint64_t tag) {
    const fs::path dir = out_dir / "images" / split;
    fs::create_directories(dir);
    data::Manifest m;
    for (int i = 0; i < n; ++i) {
      char id[32];
      std::snprintf(id, sizeof id, "%s%05d", prefix, i);
      const auto scene = render(sample_scene(derive_seed({seed, tag, static_cast<std::uint64_t>(i)})));
      const std::string rel = std::string("images/") + split + "/" + id + ".png";
      io::write_png(scene.image, out_dir / rel);
      m.push_back(data::ManifestEntry{id, rel, scene.boxes});
    }
    const fs::path manifest = out_dir / (std::string(split) + ".jsonl");
    data::write_manifest(m, manifest);
    return manifest;
  };
  g.train_val_manifest = write_split("train_val", "tv", n_train_val, 1);
  g.test_manifest = write_split("test", "te", n_test, 2);
  return g;
}

}  // namespace cgt::synth
