#include <gtest/gtest.h>

#include <cmath>

#include "cgt/image_io.hpp"
#include "cgt/mutation.hpp"
#include "cgt/synth.hpp"
#include "test_util.hpp"

using namespace cgt;
using namespace cgt::mutate;

namespace {

Image constant_image(Shape s, float r, float g, float b) {
  Image img(s);
  for (int y = 0; y < s.height; ++y)
    for (int x = 0; x < s.width; ++x) {
      img.at(y, x, 0) = r;
      img.at(y, x, 1) = g;
      img.at(y, x, 2) = b;
    }
  return img;
}

Image permute_channels(const Image& img) {
  Image out(img.shape());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, x, (c + 1) % 3);
  return out;
}

Image mask_as_image(const Tensor& mask) {
  Image img(Shape{mask.height(), mask.width(), 3});
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = mask.at(y, x, 0);
  return img;
}

Tensor first_channel(const Image& img) {
  Tensor t(Shape{img.height(), img.width(), 1});
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) t.at(y, x, 0) = img.at(y, x, 0);
  return t;
}

const Shape kCanvas{96, 96, 3};

}  // namespace

TEST(Enhancement, FactorOneIsIdentity) {
  const auto img = tt::random_image(kCanvas, 1);
  for (auto op : kEnhancements) EXPECT_EQ(apply_enhancement(img, op, 1.0), img) << to_string(op);
}

TEST(Enhancement, DegenerateEnds) {
  const auto img = tt::random_image(kCanvas, 2);
  const auto black = apply_enhancement(img, Enhancement::brightness, 0.0);
  for (float v : black.storage()) EXPECT_EQ(v, 0.0f);
  const auto grey = apply_enhancement(img, Enhancement::contrast, 0.0);
  double mean = 0;
  for (int y = 0; y < 96; ++y)
    for (int x = 0; x < 96; ++x) mean += luminance(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2));
  mean /= 96.0 * 96.0;
  for (float v : grey.storage()) EXPECT_NEAR(v, mean, 1e-5);
  const auto gray = apply_enhancement(img, Enhancement::color, 0.0);
  EXPECT_NEAR(gray.at(5, 7, 0), luminance(img.at(5, 7, 0), img.at(5, 7, 1), img.at(5, 7, 2)), 1e-6);
  EXPECT_EQ(gray.at(5, 7, 0), gray.at(5, 7, 2));
  EXPECT_THROW(apply_enhancement(img, Enhancement::color, 1.5), ArgumentError);
  EXPECT_THROW(apply_enhancement(img, Enhancement::color, -0.1), ArgumentError);
}

TEST(Filter, ConstantImagesAreFixedPoints) {
  const auto img = constant_image(kCanvas, 0.3f, 0.6f, 0.9f);
  for (auto f : kFilters) {
    const auto out = apply_filter(img, f);
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out.storage()[i], img.storage()[i], 1e-6) << to_string(f);
  }
}

TEST(Filter, EdgeEnhanceSteepensStep) {
  Image img(Shape{5, 6, 3});
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 6; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = x < 3 ? 0.4f : 0.5f;
  const auto out = apply_filter(img, Filter::edge_enhance);
  // 1-D step response: (10*0.4 - 5*0.4 - 3*0.5)/2 and (10*0.5 - 5*0.5 - 3*0.4)/2.
  EXPECT_NEAR(out.at(2, 2, 0), 0.25f, 1e-6);
  EXPECT_NEAR(out.at(2, 3, 0), 0.65f, 1e-6);
  EXPECT_GT(out.at(2, 3, 0) - out.at(2, 2, 0), 0.1f);
}

TEST(Filter, OutputsStayInRange) {
  const auto img = tt::random_image(kCanvas, 3);
  for (auto f : kFilters) {
    const auto out = apply_filter(img, f);
    for (float v : out.storage()) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
    }
  }
}

TEST(Geometry, FlipIsInvolution) {
  const auto img = tt::random_image(kCanvas, 4);
  EXPECT_EQ(flip_horizontal(flip_horizontal(img)), img);
  const Boxes boxes{{10, 10, 20, 40}, {50, 0, 96, 30}};
  const GeometricRecord flip{true, 0, 0, 1.0, 0, 0};
  EXPECT_EQ(transform_boxes(transform_boxes(boxes, 96, 96, flip), 96, 96, flip), boxes);
  const auto r = apply_geometric(apply_geometric(img, boxes, true, 0, 0, 1.0, 0, 0).image, boxes, true, 0, 0, 1.0, 0, 0);
  EXPECT_EQ(r.image, img);
}

TEST(Geometry, BoxArithmetic) {
  const auto img = tt::random_image(kCanvas, 5);
  EXPECT_EQ(apply_geometric(img, {{10, 10, 20, 20}}, false, 2, 0, 1.0, 0, 0).boxes, (Boxes{{12, 10, 22, 20}}));
  EXPECT_EQ(apply_geometric(img, {{0, 0, 40, 40}}, false, 0, 0, 0.5, 0, 0).boxes, (Boxes{{0, 0, 20, 20}}));
  // A box pushed mostly off the canvas is dropped.
  EXPECT_TRUE(transform_boxes({{95, 0, 96, 10}}, 96, 96, {false, 2, 0, 1.0, 0, 0}).empty());
  EXPECT_THROW(apply_geometric(img, {}, false, 3, 0, 1.0, 0, 0), ArgumentError);
  EXPECT_THROW(apply_geometric(img, {}, false, 0, 0, 0.4, 0, 0), ArgumentError);
  EXPECT_THROW(apply_geometric(img, {}, false, 0, 0, 0.5, 60, 0), ArgumentError);
}

TEST(Geometry, TranslateShiftsPixels) {
  const auto img = tt::random_image(kCanvas, 6);
  const auto t = translate(img, -2, 1);
  EXPECT_EQ(t.at(10, 10, 1), img.at(9, 12, 1));
  EXPECT_EQ(t.at(0, 5, 0), 0.0f);
  EXPECT_EQ(t.at(5, 95, 2), 0.0f);
}

TEST(Geometry, AnnotationSoundnessOnRerenders) {
  // Transform a rendered person mask and re-extract its box from the support
  // of the resampled mask (a 0.5 cut would erase thin limbs after downscaling).
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto spec = synth::sample_scene(seed);
    Rng rng(seed);
    for (const auto& p : spec.persons) {
      const auto mask = synth::person_mask(p, 96, 96);
      const Box box = synth::mask_box(mask);
      if (!box.valid()) continue;
      const Image m = mask_as_image(mask);

      const auto flipped = apply_geometric(m, {box}, true, 0, 0, 1.0, 0, 0);
      ASSERT_EQ(flipped.boxes.size(), 1u);
      EXPECT_EQ(synth::mask_box(first_channel(flipped.image)), flipped.boxes[0]);

      const int dx = std::uniform_int_distribution<int>(-2, 2)(rng), dy = std::uniform_int_distribution<int>(-2, 2)(rng);
      const double s = std::uniform_real_distribution<double>(0.5, 1.0)(rng);
      const auto moved = apply_geometric(m, {box}, seed % 2 == 1, dx, dy, s, rng);
      if (moved.boxes.empty()) continue;  // dropped at the border
      const Box got = synth::mask_box(first_channel(moved.image), 0.0f);
      const Box& want = moved.boxes[0];
      ASSERT_TRUE(got.valid());
      EXPECT_LE(std::abs(got.x_min - want.x_min), 1.0) << seed;
      EXPECT_LE(std::abs(got.y_min - want.y_min), 1.0) << seed;
      EXPECT_LE(std::abs(got.x_max - want.x_max), 1.0) << seed;
      EXPECT_LE(std::abs(got.y_max - want.y_max), 1.0) << seed;
    }
  }
}

TEST(Acceptance, Examples) {
  const AcceptanceParams p{0.02, 0.20};
  const auto img = tt::random_image(kCanvas, 7);
  EXPECT_TRUE(acceptance_test(img, img, p));

  Image base = io::quantize(tt::random_image(kCanvas, 8));
  for (float& v : base.storage()) v = std::min(v, 0.9f);
  base = io::quantize(base);
  Image shifted = base;
  for (float& v : shifted.storage()) v += 10.0f / 255.0f;
  const auto st = acceptance_stats(base, shifted, p);
  EXPECT_EQ(st.linf, 10);
  EXPECT_TRUE(st.accepted);

  Image checker(kCanvas);
  for (int y = 0; y < 96; ++y)
    for (int x = 0; x < 96; ++x)
      for (int c = 0; c < 3; ++c) checker.at(y, x, c) = (x + y) % 2 ? 1.0f : 0.0f;
  Image inverted = checker;
  for (float& v : inverted.storage()) v = 1.0f - v;
  const auto inv = acceptance_stats(checker, inverted, p);
  EXPECT_EQ(inv.l0, 96u * 96u);
  EXPECT_EQ(inv.linf, 255);
  EXPECT_FALSE(inv.accepted);

  EXPECT_THROW(acceptance_test(img, Image(Shape{8, 8, 3}), p), ArgumentError);
}

TEST(Acceptance, ChannelPermutationInvariant) {
  const AcceptanceParams p{0.02, 0.20};
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto a = tt::random_image(kCanvas, 100 + s);
    auto b = a;
    Rng rng(s);
    std::uniform_int_distribution<int> pix(0, 96 * 96 * 3 - 1);
    for (int i = 0; i < 150; ++i) b.storage()[pix(rng)] = 0.0f;
    const auto x = acceptance_stats(a, b, p);
    const auto y = acceptance_stats(permute_channels(a), permute_channels(b), p);
    EXPECT_EQ(x.l0, y.l0);
    EXPECT_EQ(x.linf, y.linf);
    EXPECT_EQ(x.accepted, y.accepted);
  }
}

TEST(MutateNatural, IdentityParams) {
  const auto img = io::quantize(tt::random_image(kCanvas, 9));
  const Boxes boxes{{10, 10, 30, 60}};
  const auto m = mutate_natural(img, boxes, img, 5, MutationParams::identity());
  ASSERT_TRUE(m.has_value());
  EXPECT_EQ(m->image, img);
  EXPECT_EQ(m->boxes, boxes);
  EXPECT_TRUE(m->record.accepted);
}

TEST(MutateNatural, ExtremesAreRejected) {
  MutationParams p;
  p.factor_min = p.factor_max = 0.0;
  p.acceptance = {1e-4, 1e-3};
  p.max_retries = 4;
  const auto img = tt::random_image(kCanvas, 10);
  EXPECT_FALSE(mutate_natural(img, {}, img, 3, p).has_value());
}

TEST(MutateNatural, DeterministicAndReplayable) {
  const auto scene = synth::render(synth::sample_scene(42));
  MutationParams p;
  p.acceptance = {0.5, 0.5};  // loose, so an attempt gets accepted
  const auto a = mutate_natural(scene.image, scene.boxes, scene.image, 42, p);
  const auto b = mutate_natural(scene.image, scene.boxes, scene.image, 42, p);
  ASSERT_TRUE(a.has_value());
  ASSERT_TRUE(b.has_value());
  EXPECT_EQ(nlohmann::json(a->record).dump(), nlohmann::json(b->record).dump());
  EXPECT_EQ(a->image, b->image);
  const auto r = replay(scene.image, scene.boxes, nlohmann::json(a->record).get<MutationRecord>());
  EXPECT_EQ(r.image, a->image);
  EXPECT_EQ(r.boxes, a->boxes);
  for (float v : a->image.storage()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(MutationParams, ValidationAndJson) {
  MutationParams p;
  p.max_shift = 3;
  EXPECT_THROW(p.validate(), ArgumentError);
  p = MutationParams{};
  p.factor_min = 0.9;
  p.factor_max = 0.8;
  EXPECT_THROW(p.validate(), ArgumentError);
  p = MutationParams{};
  p.acceptance.alpha = 0.07;
  const nlohmann::json j = p;
  EXPECT_EQ(j.get<MutationParams>().acceptance.alpha, 0.07);
}

TEST(Corruption, GaussianNoiseMean) {
  const auto out = apply_corruption(Image(kCanvas), Corruption::gaussian_noise, 1, 7);
  double mean = 0;
  for (float v : out.storage()) mean += v;
  mean /= static_cast<double>(out.size());
  // Clamped N(0, 0.04) has mean 0.04/sqrt(2*pi) ~ 0.016.
  EXPECT_GE(mean, 0.01);
  EXPECT_LE(mean, 0.03);
}

TEST(Corruption, PixelateBlocks) {
  const auto out = apply_corruption(tt::random_image(kCanvas, 11), Corruption::pixelate, 5, 1);
  for (int y = 0; y < 96; ++y)
    for (int x = 0; x < 96; ++x)
      for (int c = 0; c < 3; ++c) EXPECT_EQ(out.at(y, x, c), out.at(y / 8 * 8, x / 8 * 8, c));
}

TEST(Corruption, ContrastKeepsConstants) {
  const auto img = constant_image(kCanvas, 0.2f, 0.5f, 0.7f);
  for (int s = 1; s <= 5; ++s) {
    const auto out = apply_corruption(img, Corruption::contrast_shift, s, 3);
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out.storage()[i], img.storage()[i], 1e-6);
  }
}

TEST(Corruption, DeterministicAndChecked) {
  const auto img = tt::random_image(kCanvas, 12);
  for (auto k : kCorruptions)
    for (int s = 1; s <= 5; ++s) {
      const auto a = apply_corruption(img, k, s, 99);
      EXPECT_EQ(a, apply_corruption(img, k, s, 99)) << to_string(k) << s;
      EXPECT_EQ(a.shape(), img.shape());
      for (float v : a.storage()) ASSERT_TRUE(v >= 0.0f && v <= 1.0f);
    }
  EXPECT_THROW(apply_corruption(img, Corruption::pixelate, 6, 1), ArgumentError);
  EXPECT_THROW(corruption_from_string("fog"), ArgumentError);
  EXPECT_EQ(corruption_from_string(to_string(Corruption::shot_noise)), Corruption::shot_noise);
}
