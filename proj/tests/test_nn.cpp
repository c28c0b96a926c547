#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <json.hpp>

#include "cgt/det_eval.hpp"
#include "cgt/nn.hpp"
#include "test_util.hpp"

using namespace cgt;
using nn::LayerSpec;

namespace {

std::vector<std::uint8_t> read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

nlohmann::json header_of(const std::vector<std::uint8_t>& bytes) {
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(bytes[8 + i]) << (8 * i);
  return nlohmann::json::parse(std::string(bytes.begin() + 12, bytes.begin() + 12 + len));
}

}  // namespace

TEST(Graph, PersonMiniStructure) {
  const auto g = nn::person_mini();
  EXPECT_EQ(g.conv_layer_count(), 5u);
  EXPECT_EQ(g.neuron_count(), 176u);
  EXPECT_EQ(g.activation_layers().size(), 4u);
  const auto shapes = g.layer_shapes();
  EXPECT_EQ(shapes.back(), (Shape{12, 12, 10}));
  EXPECT_EQ(g.head().boxes_per_cell, 2);
}

TEST(Graph, RejectsInvalidStacks) {
  const Shape in{8, 8, 3};
  EXPECT_THROW(nn::make_graph(in, {LayerSpec::conv2d(10, 2), LayerSpec::head(8, 8, {{.2f, .2f}, {.3f, .3f}})}),
               ArgumentError);  // even kernel
  EXPECT_THROW(nn::make_graph(in, {LayerSpec::conv2d(9, 1), LayerSpec::head(8, 8, {{.2f, .2f}, {.3f, .3f}})}),
               ArgumentError);  // channels != B*5
  EXPECT_THROW(nn::make_graph(in, {LayerSpec::conv2d(10, 1), LayerSpec::head(4, 4, {{.2f, .2f}, {.3f, .3f}})}),
               ArgumentError);  // grid mismatch
  EXPECT_THROW(nn::make_graph(Shape{6, 6, 3}, {LayerSpec::conv2d(4, 3), LayerSpec::maxpool(), LayerSpec::maxpool(),
                                               LayerSpec::conv2d(5, 1), LayerSpec::head(1, 1, {{.2f, .2f}})}),
               ArgumentError);  // odd dims into a pool
  EXPECT_THROW(nn::make_graph(in, {LayerSpec::conv2d(5, 1), LayerSpec::head(8, 8, {{0.f, .2f}})}),
               ArgumentError);  // non-positive anchor
}

TEST(Graph, ShapePropagationProperty) {
  // Random valid graphs: every layer's shape obeys its kind's rule.
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto g = tt::random_tiny_graph(s);
    const auto shapes = g.layer_shapes();
    Shape cur = g.input_shape;
    for (std::size_t i = 0; i < g.layers.size(); ++i) {
      const auto& L = g.layers[i];
      switch (L.kind) {
        case nn::LayerKind::conv2d:
          EXPECT_EQ(shapes[i], (Shape{cur.height, cur.width, L.conv.out_channels}));
          break;
        case nn::LayerKind::maxpool2x2:
          EXPECT_EQ(shapes[i], (Shape{cur.height / 2, cur.width / 2, cur.channels}));
          break;
        default:
          EXPECT_EQ(shapes[i], cur);
      }
      cur = shapes[i];
    }
    const auto fwd = nn::forward_with_trace(g, tt::random_image(g.input_shape, s));
    EXPECT_EQ(fwd.raw.shape(), shapes.back());
    ASSERT_EQ(fwd.trace.layers.size(), g.activation_layers().size());
    for (const auto& lt : fwd.trace.layers)
      EXPECT_EQ(lt.channel_means.size(), static_cast<std::size_t>(shapes[lt.layer_index].channels));
  }
}

TEST(Serialization, RoundTripAndDeterminism) {
  auto g = nn::person_mini();
  tt::randomize_weights(g, 3);
  const auto dir = tt::scratch_dir("serial");
  nn::save_model(g, dir / "a.sdnm");
  nn::save_model(g, dir / "b.sdnm");
  EXPECT_EQ(nn::load_model(dir / "a.sdnm"), g);
  EXPECT_EQ(read_all(dir / "a.sdnm"), read_all(dir / "b.sdnm"));

  const auto bytes = read_all(dir / "a.sdnm");
  ASSERT_GE(bytes.size(), 12u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "SDNM");
  EXPECT_EQ(bytes[4], 1);
  const auto header = header_of(bytes);
  EXPECT_EQ(header.at("weights").size(), 5u);  // one entry per conv layer
  EXPECT_EQ(header.at("layers").size(), g.layers.size());
}

TEST(Serialization, WeightOrderIsOutInKhKwThenBias) {
  // 1 input channel, 5 outputs, 1x1 kernel: kernel k for output o sits at o, bias after.
  auto g = nn::make_graph(Shape{2, 2, 1}, {LayerSpec::conv2d(5, 1), LayerSpec::head(2, 2, {{.5f, .5f}})});
  ASSERT_EQ(g.weights.size(), 10u);
  for (int o = 0; o < 5; ++o) {
    g.weights[o] = static_cast<float>(o + 1);   // kernel
    g.weights[5 + o] = static_cast<float>(-o);  // bias
  }
  Image img(Shape{2, 2, 1});
  for (float& v : img.storage()) v = 0.5f;
  const auto fwd = nn::forward_with_trace(g, img);
  for (int o = 0; o < 5; ++o) EXPECT_FLOAT_EQ(fwd.raw.at(1, 1, o), 0.5f * (o + 1) - o);
}

TEST(Serialization, CorruptFiles) {
  const auto g = nn::person_mini();
  auto bytes = nn::serialize_model(g);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 4);
  EXPECT_THROW(nn::deserialize_model(truncated), CorruptModelError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(nn::deserialize_model(bad_magic), FormatError);
  auto bad_version = bytes;
  bad_version[4] = 2;
  EXPECT_THROW(nn::deserialize_model(bad_version), FormatError);
  EXPECT_THROW(nn::load_model("/nonexistent/model.sdnm"), IoError);
}

TEST(Forward, ZeroNetZeroImage) {
  const auto g = nn::person_mini();  // zero weights
  const auto fwd = nn::forward_with_trace(g, Image(g.input_shape));
  for (const auto& l : fwd.trace.layers)
    for (double m : l.channel_means) EXPECT_EQ(m, 0.0);
}

TEST(Forward, DeterministicAndChecked) {
  auto g = nn::person_mini();
  tt::randomize_weights(g, 11, 0.1f);
  const auto img = tt::random_image(g.input_shape, 5);
  const auto a = nn::forward_with_trace(g, img);
  const auto b = nn::forward_with_trace(g, img);
  EXPECT_EQ(a.raw, b.raw);
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_THROW(nn::forward_with_trace(g, Image(Shape{32, 32, 3})), InputError);
  auto bad = img;
  bad.at(0, 0, 0) = std::nanf("");
  EXPECT_THROW(nn::forward_with_trace(g, bad), NumericError);
}

TEST(Forward, HandComputedConvolutionMeans) {
  // 4x4x1 input, one 3x3 conv (zero "same" padding) + ReLU.
  auto g = nn::make_graph(Shape{4, 4, 1}, {LayerSpec::conv2d(1, 3), LayerSpec::relu(), LayerSpec::conv2d(5, 1),
                                           LayerSpec::head(4, 4, {{.5f, .5f}})});
  const float k[9] = {0.1f, -0.2f, 0.3f, 0.0f, 0.5f, -0.1f, 0.2f, 0.1f, -0.3f};
  for (int i = 0; i < 9; ++i) g.weights[i] = k[i];
  g.weights[9] = 0.05f;  // bias
  const float x[16] = {0.1f, 0.9f, 0.3f, 0.4f, 0.8f, 0.2f, 0.6f, 0.0f,
                       0.5f, 0.7f, 0.1f, 0.9f, 0.3f, 0.4f, 1.0f, 0.2f};
  Image img(Shape{4, 4, 1});
  for (int i = 0; i < 16; ++i) img.storage()[i] = x[i];

  double sum = 0;
  for (int y = 0; y < 4; ++y)
    for (int xx = 0; xx < 4; ++xx) {
      double acc = 0.05;
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          const int sy = y + ky - 1, sx = xx + kx - 1;
          if (sy < 0 || sy > 3 || sx < 0 || sx > 3) continue;
          acc += k[ky * 3 + kx] * x[sy * 4 + sx];
        }
      sum += std::max(acc, 0.0);
    }
  const auto fwd = nn::forward_with_trace(g, img);
  ASSERT_EQ(fwd.trace.layers.size(), 1u);
  EXPECT_NEAR(fwd.trace.layers[0].channel_means[0], sum / 16.0, 1e-6);
}

TEST(Forward, ChannelMeansScaleLinearly) {
  // Conv-only, bias-free: means of the (identity-slope) leaky layer scale with the input
  // when every pre-activation is positive, so use non-negative weights.
  auto g = nn::make_graph(Shape{8, 8, 3}, {LayerSpec::conv2d(4, 3), LayerSpec::leaky(1.0f), LayerSpec::conv2d(10, 1),
                                           LayerSpec::head(8, 8, {{.2f, .2f}, {.4f, .4f}})});
  tt::randomize_weights(g, 9);
  for (std::size_t i = 0; i < g.weights.size(); ++i)
    if (i >= g.weight_offsets[0] + 4 * 27 && i < g.weight_offsets[0] + 4 * 27 + 4) g.weights[i] = 0;  // biases
  const auto img = tt::random_image(g.input_shape, 1);
  auto scaled = img;
  for (float& v : scaled.storage()) v *= 0.5f;
  const auto a = nn::forward_with_trace(g, img).trace.layers[0].channel_means;
  const auto b = nn::forward_with_trace(g, scaled).trace.layers[0].channel_means;
  for (std::size_t c = 0; c < a.size(); ++c) EXPECT_NEAR(b[c], 0.5 * a[c], 1e-5 * (1 + std::abs(a[c])));
}

TEST(Decode, AllSuppressedObjectness) {
  const auto g = nn::person_mini();
  Tensor raw(Shape{12, 12, 10});
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 12; ++x)
      for (int a = 0; a < 2; ++a) raw.at(y, x, a * 5 + 4) = -1000.0f;
  EXPECT_TRUE(nn::decode_and_nms(raw, g).empty());
  raw.at(0, 0, 0) = std::nanf("");
  EXPECT_THROW(nn::decode_and_nms(raw, g), NumericError);
}

TEST(Decode, CenterAndSize) {
  const auto g = nn::person_mini();
  Tensor raw(Shape{12, 12, 10});
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 12; ++x)
      for (int a = 0; a < 2; ++a) raw.at(y, x, a * 5 + 4) = -1000.0f;
  // Cell (5, 3), anchor 0, tx = ty = 0 -> center at (3.5, 5.5) cells, size = anchor.
  raw.at(5, 3, 4) = 3.0f;
  const auto d = nn::decode_and_nms(raw, g);
  ASSERT_EQ(d.size(), 1u);
  const double cx = 3.5 / 12 * 96, cy = 5.5 / 12 * 96, w = 0.15 * 96, h = 0.35 * 96;
  EXPECT_NEAR(d[0].box.x_min, cx - w / 2, 1e-4);
  EXPECT_NEAR(d[0].box.y_max, cy + h / 2, 1e-4);
  EXPECT_NEAR(d[0].score, 1.0 / (1.0 + std::exp(-3.0)), 1e-6);
}

TEST(Nms, Examples) {
  const Box b{10, 10, 30, 40};
  auto kept = nn::nms({{b, 0.8}, {b, 0.9}}, 0.45);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].score, 0.9);
  kept = nn::nms({{{0, 0, 10, 10}, 0.5}, {{20, 0, 30, 10}, 0.7}, {{40, 0, 50, 10}, 0.6}}, 0.45);
  ASSERT_EQ(kept.size(), 3u);
  EXPECT_EQ(kept[0].score, 0.7);
  EXPECT_EQ(kept[1].score, 0.6);
  EXPECT_EQ(kept[2].score, 0.5);
}

TEST(Nms, AntichainProperty) {
  Rng rng(77);
  std::uniform_real_distribution<double> u(0, 80), s(5, 30), sc(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Detection> dets;
    const int n = 1 + trial % 12;
    for (int i = 0; i < n; ++i) {
      const double x = u(rng), y = u(rng);
      dets.push_back({{x, y, x + s(rng), y + s(rng)}, sc(rng)});
    }
    const auto kept = nn::nms(dets, 0.45);
    for (std::size_t i = 0; i < kept.size(); ++i) {
      if (i > 0) EXPECT_GE(kept[i - 1].score, kept[i].score);
      for (std::size_t j = i + 1; j < kept.size(); ++j) EXPECT_LT(eval::iou(kept[i].box, kept[j].box), 0.45);
    }
    // Every dropped detection overlaps a kept one with a score at least as high.
    for (const auto& d : dets) {
      bool kept_or_covered = false;
      for (const auto& k : kept)
        if ((k.box.x_min == d.box.x_min && k.box.y_min == d.box.y_min && k.score == d.score) ||
            (k.score >= d.score && eval::iou(k.box, d.box) >= 0.45))
          kept_or_covered = true;
      EXPECT_TRUE(kept_or_covered);
    }
  }
}
