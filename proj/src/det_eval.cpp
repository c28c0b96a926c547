#include "cgt/det_eval.hpp"

#include <algorithm>
#include <numeric>

#include "cgt/error.hpp"

namespace cgt::eval {

double iou(const Box& a, const Box& b) {
  if (!(a.area() > 0) || !(b.area() > 0)) throw ArgumentError("iou: zero-area box");
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

double interpolated_ap(const std::vector<bool>& tp, std::size_t n_gt) {
  if (n_gt == 0) return tp.empty() ? 1.0 : 0.0;
  const std::size_t n = tp.size();
  std::vector<double> precision(n), recall(n);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (tp[i]) ++hits;
    precision[i] = static_cast<double>(hits) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(hits) / static_cast<double>(n_gt);
  }
  // Monotone envelope from the right.
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

namespace {

/// Greedy matching of score-ordered predictions against one image's GT.
std::vector<bool> match_image(const std::vector<Detection>& ordered, const std::vector<Box>& gts,
                              double iou_min) {
  std::vector<bool> used(gts.size(), false);
  std::vector<bool> tp(ordered.size(), false);
  for (std::size_t p = 0; p < ordered.size(); ++p) {
    double best = -1.0;
    std::size_t best_gt = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g]) continue;
      const double v = iou(ordered[p].box, gts[g]);
      if (v > best) {
        best = v;
        best_gt = g;
      }
    }
    if (best_gt < gts.size() && best >= iou_min) {
      used[best_gt] = true;
      tp[p] = true;
    }
  }
  return tp;
}

void sort_by_score(std::vector<Detection>& preds) {
  std::stable_sort(preds.begin(), preds.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
}

}  // namespace

double average_precision(std::vector<Detection> preds, const std::vector<Box>& gts, double iou_min) {
  sort_by_score(preds);
  return interpolated_ap(match_image(preds, gts, iou_min), gts.size());
}

double pooled_average_precision(const std::vector<ImageResult>& images, double iou_min) {
  if (images.empty()) throw ArgumentError("dataset mAP over an empty dataset");
  struct Ranked {
    double score;
    std::size_t image;
    bool tp;
  };
  std::vector<Ranked> ranked;
  std::size_t n_gt = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    std::vector<Detection> preds = images[i].preds;
    sort_by_score(preds);
    const auto tp = match_image(preds, images[i].gts, iou_min);
    for (std::size_t p = 0; p < preds.size(); ++p) ranked.push_back({preds[p].score, i, tp[p]});
    n_gt += images[i].gts.size();
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& a, const Ranked& b) { return a.score > b.score; });
  std::vector<bool> tp(ranked.size());
  std::transform(ranked.begin(), ranked.end(), tp.begin(), [](const Ranked& r) { return r.tp; });
  return interpolated_ap(tp, n_gt);
}

double relative_change(double new_value, double base) {
  if (!(base > 0)) throw ArgumentError("relative change undefined for base " + std::to_string(base));
  return (new_value - base) / base * 100.0;
}

CorruptionScores corruption_scores(const std::vector<double>& grid_maps, double map_clean) {
  if (grid_maps.empty()) throw ArgumentError("empty corruption grid");
  if (!(map_clean > 0)) throw ArgumentError("clean mAP must be positive for rPC");
  const double sum = std::accumulate(grid_maps.begin(), grid_maps.end(), 0.0);
  const auto [lo, hi] = std::minmax_element(grid_maps.begin(), grid_maps.end());
  CorruptionScores s;
  // Rounding can push the mean of equal values one ulp past them.
  s.mpc = std::clamp(sum / static_cast<double>(grid_maps.size()), *lo, *hi);
  s.rpc = s.mpc / map_clean;
  return s;
}

}  // namespace cgt::eval
