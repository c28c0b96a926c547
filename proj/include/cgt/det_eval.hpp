#pragma once

#include <map>
#include <string>
#include <vector>

#include "cgt/box.hpp"

namespace cgt::eval {

/// Intersection over union. Throws ArgumentError on zero-area input.
double iou(const Box& a, const Box& b);

/// All-point interpolated AP of one image's predictions at `iou_min`.
/// Degenerate cases: no GT and no preds -> 1, no GT with preds -> 0,
/// GT without preds -> 0.
double average_precision(std::vector<Detection> preds, const std::vector<Box>& gts,
                         double iou_min = 0.5);

/// Predictions and ground truth of one image.
struct ImageResult {
  std::vector<Detection> preds;
  std::vector<Box> gts;
};

/// Pooled single-class AP over a dataset (predictions ranked globally,
/// matched per image). Throws ArgumentError on empty input.
double pooled_average_precision(const std::vector<ImageResult>& images, double iou_min = 0.5);

/// Area under the all-point interpolated precision envelope.
/// `tp` flags are in descending score order.
double interpolated_ap(const std::vector<bool>& tp, std::size_t n_gt);

/// (new - base) / base * 100. Throws ArgumentError ("undefined change") if base <= 0.
double relative_change(double new_value, double base);

struct CorruptionScores {
  double mpc = 0;
  double rpc = 0;
};

/// mPC = mean of the grid mAPs, rPC = mPC / clean mAP.
CorruptionScores corruption_scores(const std::vector<double>& grid_maps, double map_clean);

/// Evaluation summary for one model.
struct EvalScores {
  double map_clean = 0;
  double map_adv = 0;
  double map_natural = 0;  // on the naturally-mutated copy of clean_test
  double mpc = 0;
  double rpc = 0;
  std::map<std::string, double> corruption_maps;  // "<kind>/<severity>" -> mAP
};

}  // namespace cgt::eval
