#pragma once

// Independent AP reference: for each rank prefix the greedy matching is
// recomputed from scratch, precision/recall are tabulated, and the envelope
// is taken by brute force (max precision at any recall >= r).

#include <algorithm>
#include <vector>

#include "cgt/box.hpp"

namespace cgt::tt {

inline double oracle_iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = ix * iy;
  return inter / (a.area() + b.area() - inter);
}

/// Number of true positives among the first k predictions (already sorted).
inline int oracle_tp_count(const std::vector<Detection>& sorted, const std::vector<Box>& gts, std::size_t k,
                           double iou_min) {
  std::vector<bool> used(gts.size(), false);
  int tp = 0;
  for (std::size_t i = 0; i < k; ++i) {
    int best = -1;
    double best_iou = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g]) continue;
      const double v = oracle_iou(sorted[i].box, gts[g]);
      if (v > best_iou) {
        best_iou = v;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0 && best_iou >= iou_min) {
      used[best] = true;
      ++tp;
    }
  }
  return tp;
}

inline double oracle_ap(std::vector<Detection> preds, const std::vector<Box>& gts, double iou_min = 0.5) {
  if (gts.empty()) return preds.empty() ? 1.0 : 0.0;
  if (preds.empty()) return 0.0;
  std::stable_sort(preds.begin(), preds.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
  const std::size_t n = preds.size();
  std::vector<double> rec(n + 1, 0.0), prec(n + 1, 0.0);
  for (std::size_t k = 1; k <= n; ++k) {
    const int tp = oracle_tp_count(preds, gts, k, iou_min);
    rec[k] = static_cast<double>(tp) / gts.size();
    prec[k] = static_cast<double>(tp) / k;
  }
  double ap = 0;
  for (std::size_t k = 1; k <= n; ++k) {
    double env = 0;
    for (std::size_t j = k; j <= n; ++j) env = std::max(env, prec[j]);
    ap += (rec[k] - rec[k - 1]) * env;
  }
  return ap;
}

}  // namespace cgt::tt
