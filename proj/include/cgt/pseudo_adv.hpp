#pragma once

#include <cstdint>
#include <filesystem>

#include "cgt/dataset.hpp"
#include "cgt/nn.hpp"

namespace cgt::adv {

/// Stand-in for precomputed detector attacks: a gradient-free random search
/// over blockwise sign perturbations, proposals concentrated on grid cells the
/// detector scores highly. Not a reimplementation of any published attack.
struct PseudoAdvParams {
  double epsilon = 0.10;  // L-inf budget on the [0,1] scale
  int iterations = 16;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Lower is a stronger attack: per-image AP minus a small bonus for total objectness.
double attack_objective(const nn::ModelGraph& model, const Image& image, const Boxes& gts);

/// Deterministic in (model, image, gts, params, image_seed). Output is 8-bit exact.
Image pseudo_adversarial(const nn::ModelGraph& model, const Image& image, const Boxes& gts,
                         std::uint64_t image_seed, const PseudoAdvParams& params);

/// Writes `<out_dir>/<id>.png` for every entry.
void generate_pseudo_adversarial(const nn::ModelGraph& model, const data::Dataset& ds,
                                 const std::filesystem::path& out_dir, const PseudoAdvParams& params);

}  // namespace cgt::adv
