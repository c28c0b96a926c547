#include "cgt/pseudo_adv.hpp"

#include <algorithm>
#include <cmath>

#include "cgt/det_eval.hpp"
#include "cgt/image_io.hpp"
#include "cgt/rng.hpp"

namespace cgt::adv {

void PseudoAdvParams::validate() const {
  if (!(epsilon > 0 && epsilon <= 1)) throw ArgumentError("pseudo-adversarial epsilon must be in (0, 1]");
  if (iterations < 0) throw ArgumentError("pseudo-adversarial iterations must be non-negative");
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Scored {
  double objective;
  std::vector<double> cell_score;  // max objectness per grid cell
};

Scored score(const nn::ModelGraph& model, const Image& image, const Boxes& gts) {
  const auto fwd = nn::forward_with_trace(model, image);
  const auto& head = model.head();
  Scored s;
  s.cell_score.assign(static_cast<std::size_t>(head.grid_h * head.grid_w), 0.0);
  double total = 0;
  for (int gy = 0; gy < head.grid_h; ++gy)
    for (int gx = 0; gx < head.grid_w; ++gx)
      for (int a = 0; a < head.boxes_per_cell; ++a) {
        const double p = sigmoid(fwd.raw.at(gy, gx, a * 5 + 4));
        total += p;
        double& c = s.cell_score[static_cast<std::size_t>(gy * head.grid_w + gx)];
        c = std::max(c, p);
      }
  s.objective = eval::average_precision(nn::decode_and_nms(fwd.raw, model), gts) - 1e-3 * total;
  return s;
}

Image apply(const Image& image, const std::vector<float>& signs, int cell_h, int cell_w, int grid_w,
            float eps) {
  Image out(image.shape());
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      const int cell = (y / cell_h) * grid_w + (x / cell_w);
      for (int c = 0; c < 3; ++c)
        out.at(y, x, c) = image.at(y, x, c) + eps * signs[static_cast<std::size_t>(cell * 3 + c)];
    }
  clamp01(out);
  return io::quantize(out);
}

}  // namespace

double attack_objective(const nn::ModelGraph& model, const Image& image, const Boxes& gts) {
  return score(model, image, gts).objective;
}

Image pseudo_adversarial(const nn::ModelGraph& model, const Image& image, const Boxes& gts,
                         std::uint64_t image_seed, const PseudoAdvParams& params) {
  params.validate();
  const auto& head = model.head();
  const int cells = head.grid_h * head.grid_w;
  const int cell_h = (image.height() + head.grid_h - 1) / head.grid_h;
  const int cell_w = (image.width() + head.grid_w - 1) / head.grid_w;
  const float eps = static_cast<float>(params.epsilon);
  Rng rng(derive_seed({params.seed, image_seed, fnv1a("pseudo-adv")}));
  std::bernoulli_distribution coin(0.5);
  std::vector<float> signs(static_cast<std::size_t>(cells * 3));
  for (float& s : signs) s = coin(rng) ? 1.0f : -1.0f;

  Image best = apply(image, signs, cell_h, cell_w, head.grid_w, eps);
  Scored cur = score(model, best, gts);
  for (int it = 0; it < params.iterations; ++it) {
    // Cells weighted by current objectness, with a floor so empty cells stay reachable.
    std::vector<double> w(cur.cell_score.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = cur.cell_score[i] + 0.05;
    std::discrete_distribution<int> pick(w.begin(), w.end());
    std::vector<float> proposal = signs;
    for (int k = 0; k < 4; ++k) {
      const int cell = pick(rng);
      for (int c = 0; c < 3; ++c) proposal[static_cast<std::size_t>(cell * 3 + c)] *= -1.0f;
    }
    Image cand = apply(image, proposal, cell_h, cell_w, head.grid_w, eps);
    Scored sc = score(model, cand, gts);
    if (sc.objective < cur.objective) {
      signs = std::move(proposal);
      best = std::move(cand);
      cur = std::move(sc);
    }
  }
  return best;
}

void generate_pseudo_adversarial(const nn::ModelGraph& model, const data::Dataset& ds,
                                 const std::filesystem::path& out_dir, const PseudoAdvParams& params) {
  std::filesystem::create_directories(out_dir);
  for (const auto& e : ds.entries) {
    const Image adv = pseudo_adversarial(model, ds.load_image(e), e.boxes, fnv1a(e.id), params);
    io::write_png(adv, out_dir / (e.id + ".png"));
  }
}

}  // namespace cgt::adv
