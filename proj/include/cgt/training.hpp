#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgt/box.hpp"
#include "cgt/nn.hpp"

namespace cgt::train {

/// One annotated training image.
struct Sample {
  Image image;
  Boxes boxes;
};

struct LossWeights {
  double lambda_coord = 5.0;
  double lambda_noobj = 0.5;
};

/// Fixed training recipe. Baseline and retrained models must share it.
struct TrainConfig {
  int epochs = 30;
  int batch_size = 8;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double lr_decay = 1.0;     // multiplicative, applied after every epoch
  double grad_clip = 10.0;   // global L2 norm; <= 0 disables
  double lambda_coord = 5.0;
  double lambda_noobj = 0.5;
  std::uint64_t seed = 1;
  bool retrain_from_scratch = false;

  LossWeights loss_weights() const { return {lambda_coord, lambda_noobj}; }
  /// Hex digest of the canonical JSON form; used to enforce identical recipes.
  std::string hash() const;
  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Where a ground-truth box lands in the detection grid.
struct Assignment {
  int cell_y = 0;
  int cell_x = 0;
  int anchor = 0;
  double tx = 0, ty = 0;  // target offsets inside the cell, in [0, 1)
  double tw = 0, th = 0;  // log size ratio against the anchor
};

/// Center-cell / best-anchor assignment. Throws ArgumentError for boxes
/// outside the image.
std::vector<Assignment> assign_targets(const Boxes& gts, const nn::ModelGraph& graph);

/// Grid-detector loss of one image; writes dLoss/d(raw) when `d_raw` is set.
template <typename T>
double loss_and_grad(const BasicTensor<T>& raw, const Boxes& gts, const nn::ModelGraph& graph,
                     const LossWeights& w, BasicTensor<T>* d_raw);

double detector_loss(const Tensor& raw, const Boxes& gts, const nn::ModelGraph& graph,
                     const LossWeights& w = {});

template <typename T>
struct BatchGradient {
  double loss = 0;       // mean over the batch
  std::vector<T> grad;   // d(mean loss)/d(weights)
};

/// Exact reverse-mode gradient of the mean batch loss.
template <typename T>
BatchGradient<T> batch_gradient(const nn::ModelGraph& graph, std::span<const T> weights,
                                std::span<const Sample> batch, const LossWeights& w);

/// Mean batch loss only (forward passes).
template <typename T>
double batch_loss(const nn::ModelGraph& graph, std::span<const T> weights,
                  std::span<const Sample> batch, const LossWeights& w);

/// Float convenience wrapper over the graph's own weights.
BatchGradient<float> backward_gradients(const nn::ModelGraph& graph, std::span<const Sample> batch,
                                        const LossWeights& w = {});

/// Seeded He-normal kernels, zero biases, objectness bias set to a low prior.
void init_weights(nn::ModelGraph& graph, std::uint64_t seed);

struct EpochLog {
  int epoch = 0;
  double loss = 0;
  double val_map = -1;  // negative when no validation callback is given
};

/// Called after each epoch; returns validation mAP (or a negative value).
using ValidationFn = std::function<double(const nn::ModelGraph&)>;

/// SGD with momentum, seeded shuffling. Deterministic for identical inputs.
nn::ModelGraph train(nn::ModelGraph graph, std::span<const Sample> samples,
                     const TrainConfig& config, std::vector<EpochLog>* log = nullptr,
                     const ValidationFn& validate = {});

void write_training_log(const std::vector<EpochLog>& log, const std::string& path);

}  // namespace cgt::train
