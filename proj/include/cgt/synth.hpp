#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "cgt/box.hpp"
#include "cgt/dataset.hpp"
#include "cgt/tensor.hpp"

namespace cgt::synth {

using Rgb = std::array<float, 3>;

/// Stick-figure pedestrian: head disc, torso, arms and two legs.
struct PersonSpec {
  double center_x = 0;
  double foot_y = 0;   // bottom edge in pixels
  double height = 0;   // 12..48 px
  double width_ratio = 0.42;
  double head_ratio = 0.13;  // head radius / height
  double leg_gap = 0.3;      // fraction of body width between legs
  Rgb body{}, head{}, legs{};
};

struct SceneSpec {
  int height = 96;
  int width = 96;
  Rgb background_top{}, background_bottom{};
  double noise_sigma = 0.03;
  std::vector<PersonSpec> persons;  // painted in order (later ones occlude)
  std::uint64_t seed = 0;
};

/// Draws a scene spec from the generator's sampling law.
SceneSpec sample_scene(std::uint64_t seed);

/// Pixel mask of one person (1 inside, 0 outside) on the scene canvas.
Tensor person_mask(const PersonSpec& p, int height, int width);

/// Tight box around the nonzero pixels of a single-channel mask whose
/// values exceed `level`; invalid box when empty.
Box mask_box(const Tensor& mask, float level = 0.5f);

struct RenderedScene {
  Image image;
  Boxes boxes;  // one per person, index-aligned with spec.persons
};

RenderedScene render(const SceneSpec& spec);

/// Writes `<out>/images/{train_val,test}/*.png` plus `<out>/train_val.jsonl`
/// and `<out>/test.jsonl`. Deterministic in (counts, seed).
struct GeneratedData {
  std::filesystem::path train_val_manifest;
  std::filesystem::path test_manifest;
};

GeneratedData generate_synthetic_dataset(int n_train_val, int n_test, std::uint64_t seed,
                                         const std::filesystem::path& out_dir);

}  // namespace cgt::synth
