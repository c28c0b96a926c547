#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cgt/box.hpp"
#include "cgt/tensor.hpp"

namespace cgt::nn {

enum class LayerKind { conv2d, leaky_relu, relu, maxpool2x2, detect_head };
enum class Padding { same, valid };

std::string to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& s);

struct ConvParams {
  int kernel_h = 3;
  int kernel_w = 3;
  int out_channels = 0;
  int stride = 1;
  Padding padding = Padding::same;
  bool operator==(const ConvParams&) const = default;
};

/// Anchor size as a fraction of the image size.
struct Anchor {
  float w = 0;
  float h = 0;
  bool operator==(const Anchor&) const = default;
};

struct DetectParams {
  int grid_h = 0;
  int grid_w = 0;
  std::vector<Anchor> anchors;
  int boxes_per_cell = 0;
  bool operator==(const DetectParams&) const = default;
};

struct LayerSpec {
  LayerKind kind = LayerKind::conv2d;
  ConvParams conv{};
  float leaky_slope = 0.1f;
  DetectParams detect{};

  static LayerSpec conv2d(int out_channels, int kernel = 3, int stride = 1,
                          Padding padding = Padding::same);
  static LayerSpec leaky(float slope = 0.1f);
  static LayerSpec relu();
  static LayerSpec maxpool();
  static LayerSpec head(int grid_h, int grid_w, std::vector<Anchor> anchors);

  bool is_activation() const noexcept {
    return kind == LayerKind::leaky_relu || kind == LayerKind::relu;
  }
  bool operator==(const LayerSpec&) const = default;
};

/// Layer list plus one flat weight blob. `weight_offsets[i]` is the start of
/// layer i's parameters; layers without parameters own an empty range.
struct ModelGraph {
  Shape input_shape{};
  std::vector<LayerSpec> layers;
  std::vector<std::size_t> weight_offsets;
  std::vector<float> weights;

  /// Number of parameters owned by layer `i` given its input channel count.
  std::size_t layer_param_count(std::size_t i) const;
  /// Output shape of every layer (index-aligned with `layers`).
  std::vector<Shape> layer_shapes() const;
  std::size_t conv_layer_count() const;
  /// Indices of post-nonlinearity layers, i.e. the coverage layers.
  std::vector<int> activation_layers() const;
  std::size_t neuron_count() const;
  const DetectParams& head() const;

  bool operator==(const ModelGraph&) const = default;
};

/// Propagates shapes through `layers` and checks every structural invariant.
/// Throws ArgumentError on the first violation.
std::vector<Shape> propagate_shapes(const Shape& input, const std::vector<LayerSpec>& layers);

/// Builds a graph with computed offsets and zero weights.
ModelGraph make_graph(const Shape& input, std::vector<LayerSpec> layers);

/// Throws CorruptModelError if the graph is inconsistent.
void validate(const ModelGraph& graph);

/// The reference 96x96 single-scale person detector (5 conv layers, 176 neurons).
ModelGraph person_mini();

// ---------------------------------------------------------------------------
// Serialization: "SDNM" | u32 version | u32 header length | JSON header | f32 LE weights

inline constexpr std::uint32_t kModelFormatVersion = 1;

std::vector<std::uint8_t> serialize_model(const ModelGraph& graph);
ModelGraph deserialize_model(const std::vector<std::uint8_t>& bytes);
ModelGraph load_model(const std::filesystem::path& path);
void save_model(const ModelGraph& graph, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Inference

struct LayerTrace {
  int layer_index = 0;
  std::vector<double> channel_means;
  bool operator==(const LayerTrace&) const = default;
};

/// Per-channel spatial means of every nonlinearity layer output.
struct ActivationTrace {
  std::vector<LayerTrace> layers;
  bool operator==(const ActivationTrace&) const = default;
};

struct ForwardResult {
  Tensor raw;  // (grid_h, grid_w, B*5)
  ActivationTrace trace;
};

ForwardResult forward_with_trace(const ModelGraph& graph, const Tensor& image);

inline constexpr double kDefaultScoreThresh = 0.25;
inline constexpr double kDefaultIouThresh = 0.45;

/// Greedy NMS over already-decoded detections; result sorted by descending score.
std::vector<Detection> nms(std::vector<Detection> dets, double iou_thresh);

/// Grid/anchor decode followed by score filtering and greedy NMS.
std::vector<Detection> decode_and_nms(const Tensor& raw, const ModelGraph& graph,
                                      double score_thresh = kDefaultScoreThresh,
                                      double iou_thresh = kDefaultIouThresh);

/// forward + decode with default thresholds.
std::vector<Detection> detect(const ModelGraph& graph, const Tensor& image);

}  // namespace cgt::nn
