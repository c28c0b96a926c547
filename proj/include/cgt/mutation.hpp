#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cgt/box.hpp"
#include "cgt/rng.hpp"
#include "cgt/tensor.hpp"

namespace cgt::mutate {

enum class Enhancement { brightness, contrast, color, sharpness };
enum class Filter { detail, edge_enhance, smooth, sharpen };

inline constexpr std::array<Enhancement, 4> kEnhancements = {
    Enhancement::brightness, Enhancement::contrast, Enhancement::color, Enhancement::sharpness};
inline constexpr std::array<Filter, 4> kFilters = {Filter::detail, Filter::edge_enhance,
                                                   Filter::smooth, Filter::sharpen};

std::string to_string(Enhancement e);
std::string to_string(Filter f);
Enhancement enhancement_from_string(const std::string& s);
Filter filter_from_string(const std::string& s);

/// Rec. 601 luma.
inline float luminance(float r, float g, float b) { return 0.299f * r + 0.587f * g + 0.114f * b; }

/// Blend between a degenerate image (factor 0) and the input (factor 1).
Image apply_enhancement(const Image& image, Enhancement op, double factor);

/// Fixed 3x3 kernel per channel, clamp-to-edge borders.
Image apply_filter(const Image& image, Filter op);

/// 3x3 convolution with clamp-to-edge borders; kernel is row-major, divided by `divisor`.
Image convolve3x3(const Image& image, const std::array<float, 9>& kernel, float divisor);

// ---------------------------------------------------------------------------
// Geometry

Image flip_horizontal(const Image& image);
Image translate(const Image& image, int dx, int dy);
/// Bilinear resize (pixel-center aligned).
Image resize_bilinear(const Image& image, int out_h, int out_w);

struct GeometricRecord {
  bool flip = false;
  int dx = 0;
  int dy = 0;
  double scale = 1.0;
  int offset_x = 0;
  int offset_y = 0;
};

struct GeometricResult {
  Image image;
  Boxes boxes;
  GeometricRecord record;
};

/// Boxes keeping less than this share of their area after clipping are dropped.
inline constexpr double kMinVisibleArea = 0.25;

/// flip -> translate -> scale + place on a black canvas at (offset_x, offset_y).
GeometricResult apply_geometric(const Image& image, const Boxes& boxes, bool flip, int dx, int dy,
                                double scale, int offset_x, int offset_y);
/// Same, with the placement offset drawn uniformly from `rng`.
GeometricResult apply_geometric(const Image& image, const Boxes& boxes, bool flip, int dx, int dy,
                                double scale, Rng& rng);

/// Box bookkeeping of apply_geometric without touching pixels.
Boxes transform_boxes(const Boxes& boxes, int width, int height, const GeometricRecord& rec);

// ---------------------------------------------------------------------------
// Acceptance test (L0 / L-infinity on the 0..255 scale)

struct AcceptanceParams {
  double alpha = 0.02;  // L0 bound as a fraction of pixels
  double beta = 0.20;   // L-inf bound as a fraction of 255
};

struct AcceptanceStats {
  std::size_t l0 = 0;
  int linf = 0;
  bool accepted = false;
};

AcceptanceStats acceptance_stats(const Image& reference, const Image& candidate,
                                 const AcceptanceParams& params);
bool acceptance_test(const Image& reference, const Image& candidate, const AcceptanceParams& params);

// ---------------------------------------------------------------------------
// Natural mutation pipeline

struct MutationParams {
  double factor_min = 0.5;
  double factor_max = 1.0;
  bool use_filters = true;
  double flip_probability = 0.5;
  int max_shift = 2;
  double scale_min = 0.5;
  double scale_max = 1.0;
  int max_retries = 3;
  AcceptanceParams acceptance{};

  /// Parameters under which the pipeline is the identity.
  static MutationParams identity();
  void validate() const;
};

void to_json(nlohmann::json& j, const MutationParams& p);
void from_json(const nlohmann::json& j, MutationParams& p);

struct MutationRecord {
  std::vector<std::pair<Enhancement, double>> enhancements;
  std::vector<Filter> filters;
  GeometricRecord geometry;
  bool accepted = false;
  int retries = 0;
  std::uint64_t seed = 0;
  std::size_t l0 = 0;
  int linf = 0;
};

void to_json(nlohmann::json& j, const MutationRecord& r);
void from_json(const nlohmann::json& j, MutationRecord& r);

struct Mutant {
  Image image;
  Boxes boxes;
  MutationRecord record;
};

/// Enhancements -> filters -> acceptance (vs `reference`) -> flip ->
/// translate -> scale/crop. Attempt k draws from seed derive(seed, k); after
/// 1 + max_retries rejected attempts the image is discarded (nullopt).
std::optional<Mutant> mutate_natural(const Image& image, const Boxes& boxes,
                                     const Image& reference, std::uint64_t seed,
                                     const MutationParams& params);

/// Re-applies a recorded mutation deterministically.
Mutant replay(const Image& image, const Boxes& boxes, const MutationRecord& record);

// ---------------------------------------------------------------------------
// Corruptions

enum class Corruption {
  gaussian_noise,
  shot_noise,
  impulse_noise,
  gaussian_blur,
  defocus_blur,
  brightness_shift,
  contrast_shift,
  pixelate
};

inline constexpr std::array<Corruption, 8> kCorruptions = {
    Corruption::gaussian_noise, Corruption::shot_noise,       Corruption::impulse_noise,
    Corruption::gaussian_blur,  Corruption::defocus_blur,     Corruption::brightness_shift,
    Corruption::contrast_shift, Corruption::pixelate};

std::string to_string(Corruption c);
Corruption corruption_from_string(const std::string& s);

/// Parameter of `kind` at severity 1..5.
double corruption_parameter(Corruption kind, int severity);

/// Deterministic in (image, kind, severity, seed); output clamped to [0,1].
Image apply_corruption(const Image& image, Corruption kind, int severity, std::uint64_t seed);

}  // namespace cgt::mutate
