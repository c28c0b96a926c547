#include "cgt/mutation.hpp"

#include <algorithm>
#include <cmath>

#include "cgt/image_io.hpp"

namespace cgt::mutate {

using json = nlohmann::json;

std::string to_string(Enhancement e) {
  switch (e) {
    case Enhancement::brightness: return "brightness";
    case Enhancement::contrast: return "contrast";
    case Enhancement::color: return "color";
    case Enhancement::sharpness: return "sharpness";
  }
  return "?";
}

std::string to_string(Filter f) {
  switch (f) {
    case Filter::detail: return "detail";
    case Filter::edge_enhance: return "edge_enhance";
    case Filter::smooth: return "smooth";
    case Filter::sharpen: return "sharpen";
  }
  return "?";
}

Enhancement enhancement_from_string(const std::string& s) {
  for (auto e : kEnhancements)
    if (to_string(e) == s) return e;
  throw ArgumentError("unknown enhancement '" + s + "'");
}

Filter filter_from_string(const std::string& s) {
  for (auto f : kFilters)
    if (to_string(f) == s) return f;
  throw ArgumentError("unknown filter '" + s + "'");
}

Image convolve3x3(const Image& image, const std::array<float, 9>& kernel, float divisor) {
  Image out(image.shape());
  const int H = image.height(), W = image.width(), C = image.channels();
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < C; ++c) {
        float acc = 0;
        for (int ky = -1; ky <= 1; ++ky) {
          const int sy = std::clamp(y + ky, 0, H - 1);
          for (int kx = -1; kx <= 1; ++kx) {
            const int sx = std::clamp(x + kx, 0, W - 1);
            acc += kernel[(ky + 1) * 3 + (kx + 1)] * image.at(sy, sx, c);
          }
        }
        out.at(y, x, c) = acc / divisor;
      }
  clamp01(out);
  return out;
}

namespace {

constexpr std::array<float, 9> kSmooth = {1, 1, 1, 1, 5, 1, 1, 1, 1};
constexpr std::array<float, 9> kSharpen = {-2, -2, -2, -2, 32, -2, -2, -2, -2};
constexpr std::array<float, 9> kDetail = {0, -1, 0, -1, 10, -1, 0, -1, 0};
constexpr std::array<float, 9> kEdgeEnhance = {-1, -1, -1, -1, 10, -1, -1, -1, -1};

Image blend(const Image& degenerate, const Image& image, double factor) {
  Image out(image.shape());
  const float f = static_cast<float>(factor);
  auto a = degenerate.data();
  auto b = image.data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = (1.0f - f) * a[i] + f * b[i];
  clamp01(out);
  return out;
}

void require_rgb(const Image& image) {
  if (image.channels() != 3) throw ArgumentError("expected an RGB image, got " + image.shape().str());
}

}  // namespace

Image apply_enhancement(const Image& image, Enhancement op, double factor) {
  if (!(factor >= 0.0 && factor <= 1.0))
    throw ArgumentError("enhancement factor must be in [0,1], got " + std::to_string(factor));
  require_rgb(image);
  if (factor == 1.0) return image;
  Image degenerate(image.shape());
  switch (op) {
    case Enhancement::brightness:
      break;  // black
    case Enhancement::contrast: {
      double sum = 0;
      for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x)
          sum += luminance(image.at(y, x, 0), image.at(y, x, 1), image.at(y, x, 2));
      const float mean = static_cast<float>(sum / (static_cast<double>(image.height()) * image.width()));
      std::fill(degenerate.storage().begin(), degenerate.storage().end(), mean);
      break;
    }
    case Enhancement::color:
      for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x) {
          const float l = luminance(image.at(y, x, 0), image.at(y, x, 1), image.at(y, x, 2));
          for (int c = 0; c < 3; ++c) degenerate.at(y, x, c) = l;
        }
      break;
    case Enhancement::sharpness:
      degenerate = convolve3x3(image, kSmooth, 13.0f);
      break;
  }
  return blend(degenerate, image, factor);
}

Image apply_filter(const Image& image, Filter op) {
  switch (op) {
    case Filter::smooth: return convolve3x3(image, kSmooth, 13.0f);
    case Filter::sharpen: return convolve3x3(image, kSharpen, 16.0f);
    case Filter::detail: return convolve3x3(image, kDetail, 6.0f);
    case Filter::edge_enhance: return convolve3x3(image, kEdgeEnhance, 2.0f);
  }
  return image;
}

// ---------------------------------------------------------------------------
// Geometry

Image flip_horizontal(const Image& image) {
  Image out(image.shape());
  const int W = image.width();
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < image.channels(); ++c) out.at(y, W - 1 - x, c) = image.at(y, x, c);
  return out;
}

Image translate(const Image& image, int dx, int dy) {
  Image out(image.shape());
  for (int y = 0; y < image.height(); ++y) {
    const int sy = y - dy;
    if (sy < 0 || sy >= image.height()) continue;
    for (int x = 0; x < image.width(); ++x) {
      const int sx = x - dx;
      if (sx < 0 || sx >= image.width()) continue;
      for (int c = 0; c < image.channels(); ++c) out.at(y, x, c) = image.at(sy, sx, c);
    }
  }
  return out;
}

Image resize_bilinear(const Image& image, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw ArgumentError("resize target must be positive");
  Image out(Shape{out_h, out_w, image.channels()});
  const double sy = static_cast<double>(image.height()) / out_h;
  const double sx = static_cast<double>(image.width()) / out_w;
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height() - 1);
    const float wy = static_cast<float>(fy - y0);
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width() - 1);
      const float wx = static_cast<float>(fx - x0);
      for (int c = 0; c < image.channels(); ++c) {
        const float top = (1 - wx) * image.at(y0, x0, c) + wx * image.at(y0, x1, c);
        const float bot = (1 - wx) * image.at(y1, x0, c) + wx * image.at(y1, x1, c);
        out.at(y, x, c) = (1 - wy) * top + wy * bot;
      }
    }
  }
  return out;
}

namespace {

void check_geometry(int dx, int dy, double scale) {
  if (std::abs(dx) > 2 || std::abs(dy) > 2)
    throw ArgumentError("translation must be within 2 pixels");
  if (!(scale >= 0.5 && scale <= 1.0)) throw ArgumentError("scale must be in [0.5, 1.0]");
}

int scaled_extent(int n, double s) { return std::max(1, static_cast<int>(std::lround(s * n))); }

}  // namespace

Boxes transform_boxes(const Boxes& boxes, int width, int height, const GeometricRecord& rec) {
  const double W = width, H = height;
  const double kx = static_cast<double>(scaled_extent(width, rec.scale)) / W;
  const double ky = static_cast<double>(scaled_extent(height, rec.scale)) / H;
  Boxes out;
  for (Box b : boxes) {
    if (rec.flip) b = Box{W - b.x_max, b.y_min, W - b.x_min, b.y_max};
    b = Box{b.x_min + rec.dx, b.y_min + rec.dy, b.x_max + rec.dx, b.y_max + rec.dy};
    const Box clipped = clip(b, W, H);
    if (!clipped.valid() || clipped.area() < kMinVisibleArea * b.area()) continue;
    out.push_back(Box{clipped.x_min * kx + rec.offset_x, clipped.y_min * ky + rec.offset_y,
                      clipped.x_max * kx + rec.offset_x, clipped.y_max * ky + rec.offset_y});
  }
  return out;
}

GeometricResult apply_geometric(const Image& image, const Boxes& boxes, bool flip, int dx, int dy,
                                double scale, int offset_x, int offset_y) {
  check_geometry(dx, dy, scale);
  const int H = image.height(), W = image.width();
  const int sh = scaled_extent(H, scale), sw = scaled_extent(W, scale);
  if (offset_x < 0 || offset_y < 0 || offset_x + sw > W || offset_y + sh > H)
    throw ArgumentError("placement offset outside the canvas");
  GeometricResult r;
  r.record = GeometricRecord{flip, dx, dy, scale, offset_x, offset_y};
  Image cur = flip ? flip_horizontal(image) : image;
  if (dx != 0 || dy != 0) cur = translate(cur, dx, dy);
  if (sh != H || sw != W) {
    const Image small = resize_bilinear(cur, sh, sw);
    cur = Image(image.shape());
    for (int y = 0; y < sh; ++y)
      for (int x = 0; x < sw; ++x)
        for (int c = 0; c < image.channels(); ++c)
          cur.at(y + offset_y, x + offset_x, c) = small.at(y, x, c);
  } else if (offset_x != 0 || offset_y != 0) {
    cur = translate(cur, offset_x, offset_y);
  }
  r.image = std::move(cur);
  r.boxes = transform_boxes(boxes, W, H, r.record);
  return r;
}

GeometricResult apply_geometric(const Image& image, const Boxes& boxes, bool flip, int dx, int dy,
                                double scale, Rng& rng) {
  check_geometry(dx, dy, scale);
  const int sh = scaled_extent(image.height(), scale), sw = scaled_extent(image.width(), scale);
  const int ox = std::uniform_int_distribution<int>(0, image.width() - sw)(rng);
  const int oy = std::uniform_int_distribution<int>(0, image.height() - sh)(rng);
  return apply_geometric(image, boxes, flip, dx, dy, scale, ox, oy);
}

// ---------------------------------------------------------------------------
// Acceptance

AcceptanceStats acceptance_stats(const Image& reference, const Image& candidate,
                                 const AcceptanceParams& params) {
  if (reference.shape() != candidate.shape())
    throw ArgumentError("acceptance test on images of different shapes " + reference.shape().str() +
                        " vs " + candidate.shape().str());
  const auto a = io::to_bytes(reference);
  const auto b = io::to_bytes(candidate);
  const int C = reference.channels();
  AcceptanceStats s;
  for (std::size_t px = 0; px < a.size(); px += C) {
    bool changed = false;
    for (int c = 0; c < C; ++c) {
      const int d = std::abs(static_cast<int>(a[px + c]) - static_cast<int>(b[px + c]));
      if (d != 0) changed = true;
      s.linf = std::max(s.linf, d);
    }
    if (changed) ++s.l0;
  }
  const double pixels = static_cast<double>(reference.height()) * reference.width();
  s.accepted = static_cast<double>(s.l0) <= params.alpha * pixels ||
               static_cast<double>(s.linf) <= params.beta * 255.0;
  return s;
}

bool acceptance_test(const Image& reference, const Image& candidate, const AcceptanceParams& params) {
  return acceptance_stats(reference, candidate, params).accepted;
}

// ---------------------------------------------------------------------------
// Natural mutation

MutationParams MutationParams::identity() {
  MutationParams p;
  p.factor_min = 1.0;
  p.factor_max = 1.0;
  p.use_filters = false;
  p.flip_probability = 0.0;
  p.max_shift = 0;
  p.scale_min = 1.0;
  p.scale_max = 1.0;
  return p;
}

void MutationParams::validate() const {
  if (!(0 <= factor_min && factor_min <= factor_max && factor_max <= 1))
    throw ArgumentError("enhancement factor range must lie in [0,1]");
  if (!(flip_probability >= 0 && flip_probability <= 1))
    throw ArgumentError("flip probability must be in [0,1]");
  if (max_shift < 0 || max_shift > 2) throw ArgumentError("max_shift must be in 0..2");
  if (!(0.5 <= scale_min && scale_min <= scale_max && scale_max <= 1.0))
    throw ArgumentError("scale range must lie in [0.5, 1.0]");
  if (max_retries < 0) throw ArgumentError("max_retries must be non-negative");
  if (!(acceptance.alpha > 0 && acceptance.alpha < 1 && acceptance.beta > 0 && acceptance.beta <= 1))
    throw ArgumentError("acceptance parameters need 0 < alpha < 1 and 0 < beta <= 1");
}

void to_json(json& j, const MutationParams& p) {
  j = json{{"factor_min", p.factor_min},     {"factor_max", p.factor_max},
           {"use_filters", p.use_filters},   {"flip_probability", p.flip_probability},
           {"max_shift", p.max_shift},       {"scale_min", p.scale_min},
           {"scale_max", p.scale_max},       {"max_retries", p.max_retries},
           {"acceptance_alpha", p.acceptance.alpha}, {"acceptance_beta", p.acceptance.beta}};
}

void from_json(const json& j, MutationParams& p) {
  const MutationParams d;
  p.factor_min = j.value("factor_min", d.factor_min);
  p.factor_max = j.value("factor_max", d.factor_max);
  p.use_filters = j.value("use_filters", d.use_filters);
  p.flip_probability = j.value("flip_probability", d.flip_probability);
  p.max_shift = j.value("max_shift", d.max_shift);
  p.scale_min = j.value("scale_min", d.scale_min);
  p.scale_max = j.value("scale_max", d.scale_max);
  p.max_retries = j.value("max_retries", d.max_retries);
  p.acceptance.alpha = j.value("acceptance_alpha", d.acceptance.alpha);
  p.acceptance.beta = j.value("acceptance_beta", d.acceptance.beta);
}

void to_json(json& j, const MutationRecord& r) {
  json enh = json::array();
  for (const auto& [op, f] : r.enhancements) enh.push_back({{"op", to_string(op)}, {"factor", f}});
  json filters = json::array();
  for (Filter f : r.filters) filters.push_back(to_string(f));
  j = json{{"enhancements", enh},
           {"filters", filters},
           {"flip", r.geometry.flip},
           {"dx", r.geometry.dx},
           {"dy", r.geometry.dy},
           {"scale", r.geometry.scale},
           {"offset_x", r.geometry.offset_x},
           {"offset_y", r.geometry.offset_y},
           {"accepted", r.accepted},
           {"retries", r.retries},
           {"seed", r.seed},
           {"l0", r.l0},
           {"linf", r.linf}};
}

void from_json(const json& j, MutationRecord& r) {
  r.enhancements.clear();
  for (const auto& e : j.at("enhancements"))
    r.enhancements.emplace_back(enhancement_from_string(e.at("op").get<std::string>()),
                                e.at("factor").get<double>());
  r.filters.clear();
  for (const auto& f : j.at("filters")) r.filters.push_back(filter_from_string(f.get<std::string>()));
  r.geometry.flip = j.at("flip").get<bool>();
  r.geometry.dx = j.at("dx").get<int>();
  r.geometry.dy = j.at("dy").get<int>();
  r.geometry.scale = j.at("scale").get<double>();
  r.geometry.offset_x = j.at("offset_x").get<int>();
  r.geometry.offset_y = j.at("offset_y").get<int>();
  r.accepted = j.at("accepted").get<bool>();
  r.retries = j.at("retries").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.l0 = j.value("l0", std::size_t{0});
  r.linf = j.value("linf", 0);
}

namespace {

Image apply_textural(const Image& image, const MutationRecord& rec) {
  Image cur = image;
  for (const auto& [op, f] : rec.enhancements) cur = apply_enhancement(cur, op, f);
  for (Filter f : rec.filters) cur = apply_filter(cur, f);
  return cur;
}

/// Draws every parameter of one attempt, in pipeline order.
MutationRecord draw_attempt(Rng& rng, const MutationParams& p, int width, int height) {
  MutationRecord rec;
  const int enh_mask = std::uniform_int_distribution<int>(1, 15)(rng);
  std::uniform_real_distribution<double> factor(p.factor_min, p.factor_max);
  for (std::size_t i = 0; i < kEnhancements.size(); ++i)
    if (enh_mask & (1 << i)) {
      const double f = p.factor_min == p.factor_max ? p.factor_min : factor(rng);
      rec.enhancements.emplace_back(kEnhancements[i], f);
    }
  const int filter_mask = p.use_filters ? std::uniform_int_distribution<int>(0, 15)(rng) : 0;
  for (std::size_t i = 0; i < kFilters.size(); ++i)
    if (filter_mask & (1 << i)) rec.filters.push_back(kFilters[i]);
  rec.geometry.flip = std::bernoulli_distribution(p.flip_probability)(rng);
  std::uniform_int_distribution<int> shift(-p.max_shift, p.max_shift);
  rec.geometry.dx = shift(rng);
  rec.geometry.dy = shift(rng);
  rec.geometry.scale = p.scale_min == p.scale_max
                           ? p.scale_min
                           : std::uniform_real_distribution<double>(p.scale_min, p.scale_max)(rng);
  const int sw = scaled_extent(width, rec.geometry.scale);
  const int sh = scaled_extent(height, rec.geometry.scale);
  rec.geometry.offset_x = std::uniform_int_distribution<int>(0, width - sw)(rng);
  rec.geometry.offset_y = std::uniform_int_distribution<int>(0, height - sh)(rng);
  return rec;
}

}  // namespace

std::optional<Mutant> mutate_natural(const Image& image, const Boxes& boxes,
                                     const Image& reference, std::uint64_t seed,
                                     const MutationParams& params) {
  params.validate();
  require_rgb(image);
  for (int attempt = 0; attempt <= params.max_retries; ++attempt) {
    Rng rng(derive_seed({seed, static_cast<std::uint64_t>(attempt)}));
    MutationRecord rec = draw_attempt(rng, params, image.width(), image.height());
    rec.seed = seed;
    rec.retries = attempt;
    const Image textural = apply_textural(image, rec);
    const auto stats = acceptance_stats(reference, textural, params.acceptance);
    rec.l0 = stats.l0;
    rec.linf = stats.linf;
    if (!stats.accepted) continue;
    rec.accepted = true;
    const auto& g = rec.geometry;
    auto geo = apply_geometric(textural, boxes, g.flip, g.dx, g.dy, g.scale, g.offset_x, g.offset_y);
    return Mutant{std::move(geo.image), std::move(geo.boxes), std::move(rec)};
  }
  return std::nullopt;
}

Mutant replay(const Image& image, const Boxes& boxes, const MutationRecord& record) {
  const Image textural = apply_textural(image, record);
  const auto& g = record.geometry;
  auto geo = apply_geometric(textural, boxes, g.flip, g.dx, g.dy, g.scale, g.offset_x, g.offset_y);
  return Mutant{std::move(geo.image), std::move(geo.boxes), record};
}

// ---------------------------------------------------------------------------
// Corruptions

std::string to_string(Corruption c) {
  switch (c) {
    case Corruption::gaussian_noise: return "gaussian_noise";
    case Corruption::shot_noise: return "shot_noise";
    case Corruption::impulse_noise: return "impulse_noise";
    case Corruption::gaussian_blur: return "gaussian_blur";
    case Corruption::defocus_blur: return "defocus_blur";
    case Corruption::brightness_shift: return "brightness_shift";
    case Corruption::contrast_shift: return "contrast_shift";
    case Corruption::pixelate: return "pixelate";
  }
  return "?";
}

Corruption corruption_from_string(const std::string& s) {
  for (auto c : kCorruptions)
    if (to_string(c) == s) return c;
  throw ArgumentError("unknown corruption '" + s + "'");
}

double corruption_parameter(Corruption kind, int severity) {
  if (severity < 1 || severity > 5)
    throw ArgumentError("corruption severity must be in 1..5, got " + std::to_string(severity));
  static constexpr double kTable[8][5] = {
      {0.04, 0.06, 0.08, 0.10, 0.12},  // gaussian_noise: sigma
      {60, 25, 12, 5, 3},              // shot_noise: photons per unit intensity
      {0.03, 0.06, 0.09, 0.17, 0.27},  // impulse_noise: salt-and-pepper amount
      {0.5, 1.0, 1.5, 2.0, 3.0},       // gaussian_blur: sigma (px)
      {1.0, 1.5, 2.0, 3.0, 4.0},       // defocus_blur: disk radius (px)
      {0.1, 0.2, 0.3, 0.4, 0.5},       // brightness_shift: additive offset
      {0.4, 0.3, 0.2, 0.1, 0.05},      // contrast_shift: contrast factor
      {2, 3, 4, 6, 8},                 // pixelate: block size (px)
  };
  return kTable[static_cast<int>(kind)][severity - 1];
}

namespace {

Image convolve_separable(const Image& image, const std::vector<float>& k) {
  const int r = static_cast<int>(k.size() / 2);
  const int H = image.height(), W = image.width(), C = image.channels();
  Image tmp(image.shape()), out(image.shape());
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < C; ++c) {
        float acc = 0;
        for (int d = -r; d <= r; ++d) acc += k[d + r] * image.at(y, std::clamp(x + d, 0, W - 1), c);
        tmp.at(y, x, c) = acc;
      }
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < C; ++c) {
        float acc = 0;
        for (int d = -r; d <= r; ++d) acc += k[d + r] * tmp.at(std::clamp(y + d, 0, H - 1), x, c);
        out.at(y, x, c) = acc;
      }
  return out;
}

Image gaussian_blur(const Image& image, double sigma) {
  const int r = static_cast<int>(std::ceil(3 * sigma));
  std::vector<float> k(2 * r + 1);
  double sum = 0;
  for (int d = -r; d <= r; ++d) sum += k[d + r] = static_cast<float>(std::exp(-d * d / (2 * sigma * sigma)));
  for (float& v : k) v = static_cast<float>(v / sum);
  return convolve_separable(image, k);
}

Image defocus_blur(const Image& image, double radius) {
  const int r = static_cast<int>(std::ceil(radius));
  std::vector<std::pair<int, int>> taps;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx)
      if (dx * dx + dy * dy <= radius * radius) taps.emplace_back(dy, dx);
  const float w = 1.0f / static_cast<float>(taps.size());
  const int H = image.height(), W = image.width(), C = image.channels();
  Image out(image.shape());
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < C; ++c) {
        float acc = 0;
        for (auto [dy, dx] : taps)
          acc += image.at(std::clamp(y + dy, 0, H - 1), std::clamp(x + dx, 0, W - 1), c);
        out.at(y, x, c) = acc * w;
      }
  return out;
}

Image pixelate(const Image& image, int block) {
  Image out(image.shape());
  const int H = image.height(), W = image.width(), C = image.channels();
  for (int by = 0; by < H; by += block)
    for (int bx = 0; bx < W; bx += block)
      for (int c = 0; c < C; ++c) {
        const int ey = std::min(H, by + block), ex = std::min(W, bx + block);
        double sum = 0;
        for (int y = by; y < ey; ++y)
          for (int x = bx; x < ex; ++x) sum += image.at(y, x, c);
        const float mean = static_cast<float>(sum / ((ey - by) * (ex - bx)));
        for (int y = by; y < ey; ++y)
          for (int x = bx; x < ex; ++x) out.at(y, x, c) = mean;
      }
  return out;
}

}  // namespace

Image apply_corruption(const Image& image, Corruption kind, int severity, std::uint64_t seed) {
  const double p = corruption_parameter(kind, severity);
  Rng rng(derive_seed({seed, static_cast<std::uint64_t>(kind), static_cast<std::uint64_t>(severity)}));
  Image out = image;
  auto d = out.data();
  switch (kind) {
    case Corruption::gaussian_noise: {
      std::normal_distribution<float> n(0.0f, static_cast<float>(p));
      for (float& v : d) v += n(rng);
      break;
    }
    case Corruption::shot_noise:
      for (float& v : d) {
        const double mean = std::max(0.0, static_cast<double>(v) * p);
        v = static_cast<float>(std::poisson_distribution<int>(mean)(rng) / p);
      }
      break;
    case Corruption::impulse_noise: {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (float& v : d) {
        const double r = u(rng);
        if (r < p / 2) v = 0.0f;
        else if (r < p) v = 1.0f;
      }
      break;
    }
    case Corruption::gaussian_blur:
      out = gaussian_blur(image, p);
      break;
    case Corruption::defocus_blur:
      out = defocus_blur(image, p);
      break;
    case Corruption::brightness_shift:
      for (float& v : d) v += static_cast<float>(p);
      break;
    case Corruption::contrast_shift: {
      const int C = image.channels();
      std::vector<double> mean(C, 0.0);
      for (std::size_t i = 0; i < d.size(); ++i) mean[i % C] += d[i];
      for (double& m : mean) m /= static_cast<double>(image.height()) * image.width();
      for (std::size_t i = 0; i < d.size(); ++i) {
        const float m = static_cast<float>(mean[i % C]);
        d[i] = (d[i] - m) * static_cast<float>(p) + m;
      }
      break;
    }
    case Corruption::pixelate:
      out = pixelate(image, static_cast<int>(p));
      break;
  }
  clamp01(out);
  return out;
}

}  // namespace cgt::mutate
