#include "cgt/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "cgt/det_eval.hpp"
#include "cgt/rng.hpp"
#include "nn_kernels.hpp"

namespace cgt::train {

using json = nlohmann::json;

void to_json(json& j, const TrainConfig& c) {
  j = json{{"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"learning_rate", c.learning_rate},
           {"momentum", c.momentum},
           {"weight_decay", c.weight_decay},
           {"lr_decay", c.lr_decay},
           {"grad_clip", c.grad_clip},
           {"lambda_coord", c.lambda_coord},
           {"lambda_noobj", c.lambda_noobj},
           {"seed", c.seed},
           {"retrain_from_scratch", c.retrain_from_scratch}};
}

void from_json(const json& j, TrainConfig& c) {
  TrainConfig d;
  c.epochs = j.value("epochs", d.epochs);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.momentum = j.value("momentum", d.momentum);
  c.weight_decay = j.value("weight_decay", d.weight_decay);
  c.lr_decay = j.value("lr_decay", d.lr_decay);
  c.grad_clip = j.value("grad_clip", d.grad_clip);
  c.lambda_coord = j.value("lambda_coord", d.lambda_coord);
  c.lambda_noobj = j.value("lambda_noobj", d.lambda_noobj);
  c.seed = j.value("seed", d.seed);
  c.retrain_from_scratch = j.value("retrain_from_scratch", d.retrain_from_scratch);
}

std::string TrainConfig::hash() const {
  const std::string text = json(*this).dump();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(text)));
  return buf;
}

void TrainConfig::validate() const {
  if (epochs < 0 || batch_size <= 0 || !(learning_rate > 0) || momentum < 0 || momentum >= 1 ||
      weight_decay < 0 || !(lr_decay > 0) || !(lambda_coord > 0) || !(lambda_noobj > 0))
    throw ArgumentError("invalid training configuration " + json(*this).dump());
}

std::vector<Assignment> assign_targets(const Boxes& gts, const nn::ModelGraph& graph) {
  const auto& head = graph.head();
  const double W = graph.input_shape.width;
  const double H = graph.input_shape.height;
  std::vector<Assignment> out;
  for (const Box& b : gts) {
    if (!b.valid() || b.x_min < 0 || b.y_min < 0 || b.x_max > W || b.y_max > H)
      throw ArgumentError("ground-truth box outside the image");
    const double cx = (b.x_min + b.x_max) / 2, cy = (b.y_min + b.y_max) / 2;
    Assignment a;
    a.cell_x = std::min(static_cast<int>(cx / W * head.grid_w), head.grid_w - 1);
    a.cell_y = std::min(static_cast<int>(cy / H * head.grid_h), head.grid_h - 1);
    a.tx = cx / W * head.grid_w - a.cell_x;
    a.ty = cy / H * head.grid_h - a.cell_y;
    double best = -1;
    for (int k = 0; k < head.boxes_per_cell; ++k) {
      const Box anchor{0, 0, head.anchors[k].w * W, head.anchors[k].h * H};
      const double v = eval::iou(Box{0, 0, b.width(), b.height()}, anchor);
      if (v > best) {
        best = v;
        a.anchor = k;
      }
    }
    a.tw = std::log(b.width() / (head.anchors[a.anchor].w * W));
    a.th = std::log(b.height() / (head.anchors[a.anchor].h * H));
    out.push_back(a);
  }
  return out;
}

namespace {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

template <typename T>
double loss_and_grad(const BasicTensor<T>& raw, const Boxes& gts, const nn::ModelGraph& graph,
                     const LossWeights& w, BasicTensor<T>* d_raw) {
  const auto& head = graph.head();
  const int B = head.boxes_per_cell;
  if (raw.shape() != Shape{head.grid_h, head.grid_w, B * 5})
    throw ArgumentError("raw head output shape mismatch in loss");
  const auto targets = assign_targets(gts, graph);

  // First box claiming a (cell, anchor) slot owns it.
  std::vector<int> owner(static_cast<std::size_t>(head.grid_h) * head.grid_w * B, -1);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto& t = targets[i];
    int& o = owner[(static_cast<std::size_t>(t.cell_y) * head.grid_w + t.cell_x) * B + t.anchor];
    if (o < 0) o = static_cast<int>(i);
  }
  if (d_raw != nullptr) *d_raw = BasicTensor<T>(raw.shape());

  double loss = 0;
  for (int gy = 0; gy < head.grid_h; ++gy)
    for (int gx = 0; gx < head.grid_w; ++gx)
      for (int a = 0; a < B; ++a) {
        const int o = owner[(static_cast<std::size_t>(gy) * head.grid_w + gx) * B + a];
        const double z = raw.at(gy, gx, a * 5 + 4);
        if (o < 0) {
          loss += w.lambda_noobj * softplus(z);
          if (d_raw) d_raw->at(gy, gx, a * 5 + 4) = static_cast<T>(w.lambda_noobj * sigmoid(z));
          continue;
        }
        const Assignment& t = targets[o];
        const double sx = sigmoid(raw.at(gy, gx, a * 5 + 0));
        const double sy = sigmoid(raw.at(gy, gx, a * 5 + 1));
        const double tw = raw.at(gy, gx, a * 5 + 2);
        const double th = raw.at(gy, gx, a * 5 + 3);
        const double ex = sx - t.tx, ey = sy - t.ty, ew = tw - t.tw, eh = th - t.th;
        loss += w.lambda_coord * (ex * ex + ey * ey + ew * ew + eh * eh);
        loss += softplus(-z);
        if (d_raw) {
          d_raw->at(gy, gx, a * 5 + 0) = static_cast<T>(w.lambda_coord * 2 * ex * sx * (1 - sx));
          d_raw->at(gy, gx, a * 5 + 1) = static_cast<T>(w.lambda_coord * 2 * ey * sy * (1 - sy));
          d_raw->at(gy, gx, a * 5 + 2) = static_cast<T>(w.lambda_coord * 2 * ew);
          d_raw->at(gy, gx, a * 5 + 3) = static_cast<T>(w.lambda_coord * 2 * eh);
          d_raw->at(gy, gx, a * 5 + 4) = static_cast<T>(sigmoid(z) - 1.0);
        }
      }
  return loss;
}

template double loss_and_grad<float>(const BasicTensor<float>&, const Boxes&, const nn::ModelGraph&,
                                     const LossWeights&, BasicTensor<float>*);
template double loss_and_grad<double>(const BasicTensor<double>&, const Boxes&,
                                      const nn::ModelGraph&, const LossWeights&,
                                      BasicTensor<double>*);

double detector_loss(const Tensor& raw, const Boxes& gts, const nn::ModelGraph& graph,
                     const LossWeights& w) {
  return loss_and_grad<float>(raw, gts, graph, w, nullptr);
}

namespace {

template <typename T>
BasicTensor<T> convert_image(const Image& img) {
  if constexpr (std::is_same_v<T, float>) {
    return img;
  } else {
    std::vector<T> data(img.data().begin(), img.data().end());
    return BasicTensor<T>(img.shape(), std::move(data));
  }
}

template <typename T>
void check_batch(const nn::ModelGraph& graph, std::span<const T> weights,
                 std::span<const Sample> batch) {
  if (weights.size() != graph.weights.size()) throw ArgumentError("weight vector size mismatch");
  if (batch.empty()) throw ArgumentError("empty batch");
  for (const auto& s : batch)
    if (s.image.shape() != graph.input_shape) throw InputError("batch image shape mismatch");
}

}  // namespace

template <typename T>
BatchGradient<T> batch_gradient(const nn::ModelGraph& graph, std::span<const T> weights,
                                std::span<const Sample> batch, const LossWeights& w) {
  check_batch(graph, weights, batch);
  BatchGradient<T> out;
  out.grad.assign(weights.size(), T(0));
  // Per-image gradients are summed in batch order.
  std::vector<T> image_grad(weights.size());
  nn::detail::ForwardCache<T> cache;
  const T scale = T(1) / static_cast<T>(batch.size());
  for (const Sample& s : batch) {
    const BasicTensor<T> input = convert_image<T>(s.image);
    nn::detail::forward_cached<T>(graph, weights, input, cache);
    BasicTensor<T> d_raw;
    out.loss += loss_and_grad<T>(cache.outputs.back(), s.boxes, graph, w, &d_raw);
    std::fill(image_grad.begin(), image_grad.end(), T(0));
    nn::detail::backward<T>(graph, weights, input, cache, d_raw, image_grad);
    for (std::size_t i = 0; i < image_grad.size(); ++i) out.grad[i] += image_grad[i] * scale;
  }
  out.loss /= static_cast<double>(batch.size());
  if (!std::isfinite(out.loss)) throw NumericError("non-finite loss");
  for (T g : out.grad)
    if (!std::isfinite(g)) throw NumericError("non-finite gradient");
  return out;
}

template <typename T>
double batch_loss(const nn::ModelGraph& graph, std::span<const T> weights,
                  std::span<const Sample> batch, const LossWeights& w) {
  check_batch(graph, weights, batch);
  nn::detail::ForwardCache<T> cache;
  double total = 0;
  for (const Sample& s : batch) {
    nn::detail::forward_cached<T>(graph, weights, convert_image<T>(s.image), cache);
    total += loss_and_grad<T>(cache.outputs.back(), s.boxes, graph, w, nullptr);
  }
  return total / static_cast<double>(batch.size());
}

template BatchGradient<float> batch_gradient<float>(const nn::ModelGraph&, std::span<const float>,
                                                    std::span<const Sample>, const LossWeights&);
template BatchGradient<double> batch_gradient<double>(const nn::ModelGraph&,
                                                      std::span<const double>,
                                                      std::span<const Sample>, const LossWeights&);
template double batch_loss<float>(const nn::ModelGraph&, std::span<const float>,
                                  std::span<const Sample>, const LossWeights&);
template double batch_loss<double>(const nn::ModelGraph&, std::span<const double>,
                                   std::span<const Sample>, const LossWeights&);

BatchGradient<float> backward_gradients(const nn::ModelGraph& graph, std::span<const Sample> batch,
                                        const LossWeights& w) {
  return batch_gradient<float>(graph, graph.weights, batch, w);
}

void init_weights(nn::ModelGraph& graph, std::uint64_t seed) {
  const auto shapes = graph.layer_shapes();
  std::fill(graph.weights.begin(), graph.weights.end(), 0.0f);
  for (std::size_t i = 0; i < graph.layers.size(); ++i) {
    const auto& L = graph.layers[i];
    if (L.kind != nn::LayerKind::conv2d) continue;
    const int in_c = i == 0 ? graph.input_shape.channels : shapes[i - 1].channels;
    const int fan_in = in_c * L.conv.kernel_h * L.conv.kernel_w;
    const std::size_t kernel_count =
        static_cast<std::size_t>(L.conv.out_channels) * static_cast<std::size_t>(fan_in);
    Rng rng = make_rng({seed, i});
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
    float* w = graph.weights.data() + graph.weight_offsets[i];
    for (std::size_t k = 0; k < kernel_count; ++k) w[k] = static_cast<float>(normal(rng));
  }
  // Objectness prior of ~1% for the head's biases.
  const auto& head = graph.head();
  for (std::size_t i = graph.layers.size(); i-- > 0;) {
    if (graph.layers[i].kind != nn::LayerKind::conv2d) continue;
    const auto& c = graph.layers[i].conv;
    const int in_c = i == 0 ? graph.input_shape.channels : shapes[i - 1].channels;
    float* bias = graph.weights.data() + graph.weight_offsets[i] +
                  static_cast<std::size_t>(c.out_channels) * in_c * c.kernel_h * c.kernel_w;
    for (int a = 0; a < head.boxes_per_cell; ++a) bias[a * 5 + 4] = -4.6f;
    break;
  }
}

nn::ModelGraph train(nn::ModelGraph graph, std::span<const Sample> samples,
                     const TrainConfig& config, std::vector<EpochLog>* log,
                     const ValidationFn& validate) {
  config.validate();
  if (samples.empty()) throw ArgumentError("cannot train on an empty manifest");
  nn::validate(graph);
  const LossWeights lw = config.loss_weights();
  std::vector<float> velocity(graph.weights.size(), 0.0f);
  std::vector<std::size_t> order(samples.size());
  std::vector<Sample> batch;
  double lr = config.learning_rate;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng({config.seed, 0x7261696eULL, static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(samples[order[k]]);
      BatchGradient<float> g;
      try {
        g = backward_gradients(graph, batch, lw);
      } catch (const NumericError& e) {
        throw TrainingError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      double norm2 = 0;
      for (float v : g.grad) norm2 += static_cast<double>(v) * v;
      const double norm = std::sqrt(norm2);
      const double clip = config.grad_clip > 0 && norm > config.grad_clip ? config.grad_clip / norm : 1.0;
      for (std::size_t i = 0; i < graph.weights.size(); ++i) {
        const double grad = g.grad[i] * clip + config.weight_decay * graph.weights[i];
        velocity[i] = static_cast<float>(config.momentum * velocity[i] - lr * grad);
        graph.weights[i] += velocity[i];
      }
      epoch_loss += g.loss;
      ++batches;
    }
    for (float w : graph.weights)
      if (!std::isfinite(w)) throw TrainingError("non-finite weight after epoch " + std::to_string(epoch));
    lr *= config.lr_decay;
    if (log != nullptr) {
      EpochLog e;
      e.epoch = epoch + 1;
      e.loss = epoch_loss / static_cast<double>(std::max<std::size_t>(batches, 1));
      if (validate) e.val_map = validate(graph);
      log->push_back(e);
    }
  }
  return graph;
}

void write_training_log(const std::vector<EpochLog>& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write training log " + path);
  out << "epoch,loss,val_map\n";
  char line[96];
  for (const auto& e : log) {
    std::snprintf(line, sizeof line, "%d,%.6f,%.6f\n", e.epoch, e.loss, e.val_map);
    out << line;
  }
}

}  // namespace cgt::train
