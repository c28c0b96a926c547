#include "cgt/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>

#include "cgt/det_eval.hpp"
#include "nn_kernels.hpp"

namespace cgt::nn {

using json = nlohmann::json;

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::leaky_relu: return "leaky_relu";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool2x2: return "maxpool2x2";
    case LayerKind::detect_head: return "detect_head";
  }
  return "?";
}

LayerKind layer_kind_from_string(const std::string& s) {
  for (auto k : {LayerKind::conv2d, LayerKind::leaky_relu, LayerKind::relu, LayerKind::maxpool2x2,
                 LayerKind::detect_head})
    if (to_string(k) == s) return k;
  throw FormatError("unknown layer kind '" + s + "'");
}

LayerSpec LayerSpec::conv2d(int out_channels, int kernel, int stride, Padding padding) {
  LayerSpec s;
  s.kind = LayerKind::conv2d;
  s.conv = ConvParams{kernel, kernel, out_channels, stride, padding};
  return s;
}

LayerSpec LayerSpec::leaky(float slope) {
  LayerSpec s;
  s.kind = LayerKind::leaky_relu;
  s.leaky_slope = slope;
  return s;
}

LayerSpec LayerSpec::relu() {
  LayerSpec s;
  s.kind = LayerKind::relu;
  s.leaky_slope = 0.0f;
  return s;
}

LayerSpec LayerSpec::maxpool() {
  LayerSpec s;
  s.kind = LayerKind::maxpool2x2;
  return s;
}

LayerSpec LayerSpec::head(int grid_h, int grid_w, std::vector<Anchor> anchors) {
  LayerSpec s;
  s.kind = LayerKind::detect_head;
  const int b = static_cast<int>(anchors.size());
  s.detect = DetectParams{grid_h, grid_w, std::move(anchors), b};
  return s;
}

namespace detail {

ConvGeom conv_geometry(const Shape& in, const ConvParams& p) {
  ConvGeom g{};
  g.in_h = in.height;
  g.in_w = in.width;
  g.in_c = in.channels;
  g.out_c = p.out_channels;
  g.kh = p.kernel_h;
  g.kw = p.kernel_w;
  g.stride = p.stride;
  if (p.padding == Padding::same) {
    g.out_h = (in.height + p.stride - 1) / p.stride;
    g.out_w = (in.width + p.stride - 1) / p.stride;
    g.pad_top = std::max(0, (g.out_h - 1) * p.stride + p.kernel_h - in.height) / 2;
    g.pad_left = std::max(0, (g.out_w - 1) * p.stride + p.kernel_w - in.width) / 2;
  } else {
    g.out_h = (in.height - p.kernel_h) / p.stride + 1;
    g.out_w = (in.width - p.kernel_w) / p.stride + 1;
    g.pad_top = 0;
    g.pad_left = 0;
  }
  return g;
}

}  // namespace detail

std::vector<Shape> propagate_shapes(const Shape& input, const std::vector<LayerSpec>& layers) {
  if (input.height <= 0 || input.width <= 0 || input.channels <= 0)
    throw ArgumentError("input shape must be positive, got " + input.str());
  if (layers.empty()) throw ArgumentError("graph has no layers");
  std::vector<Shape> shapes;
  shapes.reserve(layers.size());
  Shape cur = input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& L = layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + to_string(L.kind) + "): ";
    switch (L.kind) {
      case LayerKind::conv2d: {
        const ConvParams& p = L.conv;
        if (p.kernel_h <= 0 || p.kernel_w <= 0 || p.kernel_h % 2 == 0 || p.kernel_w % 2 == 0)
          throw ArgumentError(where + "kernel dims must be odd and positive");
        if (p.out_channels <= 0 || p.stride <= 0)
          throw ArgumentError(where + "out_channels and stride must be positive");
        if (p.padding == Padding::valid && (cur.height < p.kernel_h || cur.width < p.kernel_w))
          throw ArgumentError(where + "input smaller than kernel");
        const auto g = detail::conv_geometry(cur, p);
        cur = Shape{g.out_h, g.out_w, g.out_c};
        break;
      }
      case LayerKind::leaky_relu:
      case LayerKind::relu:
        if (!std::isfinite(L.leaky_slope)) throw ArgumentError(where + "non-finite slope");
        break;
      case LayerKind::maxpool2x2:
        if (cur.height % 2 != 0 || cur.width % 2 != 0)
          throw ArgumentError(where + "max pooling needs even input dims, got " + cur.str());
        cur = Shape{cur.height / 2, cur.width / 2, cur.channels};
        break;
      case LayerKind::detect_head: {
        const DetectParams& d = L.detect;
        if (i + 1 != layers.size()) throw ArgumentError(where + "detect_head must be last");
        if (d.boxes_per_cell <= 0 || static_cast<int>(d.anchors.size()) != d.boxes_per_cell)
          throw ArgumentError(where + "anchor count must equal boxes_per_cell");
        for (const Anchor& a : d.anchors)
          if (!(a.w > 0) || !(a.h > 0)) throw ArgumentError(where + "anchors must be positive");
        if (cur.channels != d.boxes_per_cell * 5)
          throw ArgumentError(where + "feeding layer has " + std::to_string(cur.channels) +
                              " channels, expected B*5 = " + std::to_string(d.boxes_per_cell * 5));
        if (cur.height != d.grid_h || cur.width != d.grid_w)
          throw ArgumentError(where + "grid " + std::to_string(d.grid_h) + "x" +
                              std::to_string(d.grid_w) + " does not match feature map " +
                              cur.str());
        break;
      }
    }
    shapes.push_back(cur);
  }
  if (layers.back().kind != LayerKind::detect_head)
    throw ArgumentError("last layer must be detect_head");
  return shapes;
}

std::size_t ModelGraph::layer_param_count(std::size_t i) const {
  const LayerSpec& L = layers.at(i);
  if (L.kind != LayerKind::conv2d) return 0;
  const int in_c = i == 0 ? input_shape.channels : layer_shapes().at(i - 1).channels;
  const auto& p = L.conv;
  return static_cast<std::size_t>(p.out_channels) * in_c * p.kernel_h * p.kernel_w +
         static_cast<std::size_t>(p.out_channels);
}

std::vector<Shape> ModelGraph::layer_shapes() const { return propagate_shapes(input_shape, layers); }

std::size_t ModelGraph::conv_layer_count() const {
  return static_cast<std::size_t>(std::count_if(
      layers.begin(), layers.end(), [](const LayerSpec& l) { return l.kind == LayerKind::conv2d; }));
}

std::vector<int> ModelGraph::activation_layers() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].is_activation()) out.push_back(static_cast<int>(i));
  return out;
}

std::size_t ModelGraph::neuron_count() const {
  const auto shapes = layer_shapes();
  std::size_t n = 0;
  for (int i : activation_layers()) n += static_cast<std::size_t>(shapes[i].channels);
  return n;
}

const DetectParams& ModelGraph::head() const {
  if (layers.empty() || layers.back().kind != LayerKind::detect_head)
    throw ArgumentError("graph has no detect_head");
  return layers.back().detect;
}

namespace {

std::vector<std::size_t> compute_offsets(const Shape& input, const std::vector<LayerSpec>& layers,
                                         const std::vector<Shape>& shapes, std::size_t& total) {
  std::vector<std::size_t> offsets(layers.size());
  total = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    offsets[i] = total;
    if (layers[i].kind == LayerKind::conv2d) {
      const int in_c = i == 0 ? input.channels : shapes[i - 1].channels;
      const auto& p = layers[i].conv;
      total += static_cast<std::size_t>(p.out_channels) * in_c * p.kernel_h * p.kernel_w +
               static_cast<std::size_t>(p.out_channels);
    }
  }
  return offsets;
}

}  // namespace

ModelGraph make_graph(const Shape& input, std::vector<LayerSpec> layers) {
  const auto shapes = propagate_shapes(input, layers);
  ModelGraph g;
  g.input_shape = input;
  std::size_t total = 0;
  g.weight_offsets = compute_offsets(input, layers, shapes, total);
  g.layers = std::move(layers);
  g.weights.assign(total, 0.0f);
  return g;
}

void validate(const ModelGraph& graph) {
  std::vector<Shape> shapes;
  try {
    shapes = propagate_shapes(graph.input_shape, graph.layers);
  } catch (const ArgumentError& e) {
    throw CorruptModelError(std::string("invalid layer stack: ") + e.what());
  }
  std::size_t total = 0;
  const auto offsets = compute_offsets(graph.input_shape, graph.layers, shapes, total);
  if (offsets != graph.weight_offsets) throw CorruptModelError("weight offsets inconsistent with layers");
  if (total != graph.weights.size())
    throw CorruptModelError("weight count " + std::to_string(graph.weights.size()) +
                            " does not match layer parameter count " + std::to_string(total));
  for (float w : graph.weights)
    if (!std::isfinite(w)) throw CorruptModelError("non-finite weight");
}

ModelGraph person_mini() {
  std::vector<LayerSpec> layers = {
      LayerSpec::conv2d(16), LayerSpec::leaky(0.1f), LayerSpec::maxpool(),
      LayerSpec::conv2d(32), LayerSpec::leaky(0.1f), LayerSpec::maxpool(),
      LayerSpec::conv2d(64), LayerSpec::leaky(0.1f), LayerSpec::maxpool(),
      LayerSpec::conv2d(64), LayerSpec::leaky(0.1f),
      LayerSpec::conv2d(2 * 5, 1),
      LayerSpec::head(12, 12, {Anchor{0.15f, 0.35f}, Anchor{0.40f, 0.80f}}),
  };
  return make_graph(Shape{96, 96, 3}, std::move(layers));
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr char kMagic[4] = {'S', 'D', 'N', 'M'};

json layer_to_json(const LayerSpec& L) {
  json j;
  j["kind"] = to_string(L.kind);
  switch (L.kind) {
    case LayerKind::conv2d:
      j["kernel"] = {L.conv.kernel_h, L.conv.kernel_w};
      j["out_channels"] = L.conv.out_channels;
      j["stride"] = L.conv.stride;
      j["padding"] = L.conv.padding == Padding::same ? "same" : "valid";
      break;
    case LayerKind::leaky_relu:
      j["slope"] = L.leaky_slope;
      break;
    case LayerKind::relu:
    case LayerKind::maxpool2x2:
      break;
    case LayerKind::detect_head: {
      j["grid"] = {L.detect.grid_h, L.detect.grid_w};
      j["boxes_per_cell"] = L.detect.boxes_per_cell;
      json anchors = json::array();
      for (const Anchor& a : L.detect.anchors) anchors.push_back({a.w, a.h});
      j["anchors"] = anchors;
      break;
    }
  }
  return j;
}

LayerSpec layer_from_json(const json& j) {
  LayerSpec L;
  L.kind = layer_kind_from_string(j.at("kind").get<std::string>());
  switch (L.kind) {
    case LayerKind::conv2d: {
      L.conv.kernel_h = j.at("kernel").at(0).get<int>();
      L.conv.kernel_w = j.at("kernel").at(1).get<int>();
      L.conv.out_channels = j.at("out_channels").get<int>();
      L.conv.stride = j.at("stride").get<int>();
      const auto pad = j.at("padding").get<std::string>();
      if (pad != "same" && pad != "valid") throw FormatError("unknown padding '" + pad + "'");
      L.conv.padding = pad == "same" ? Padding::same : Padding::valid;
      break;
    }
    case LayerKind::leaky_relu:
      L.leaky_slope = j.at("slope").get<float>();
      break;
    case LayerKind::relu:
      L.leaky_slope = 0.0f;
      break;
    case LayerKind::maxpool2x2:
      break;
    case LayerKind::detect_head:
      L.detect.grid_h = j.at("grid").at(0).get<int>();
      L.detect.grid_w = j.at("grid").at(1).get<int>();
      L.detect.boxes_per_cell = j.at("boxes_per_cell").get<int>();
      for (const auto& a : j.at("anchors"))
        L.detect.anchors.push_back(Anchor{a.at(0).get<float>(), a.at(1).get<float>()});
      break;
  }
  return L;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[pos + i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const ModelGraph& graph) {
  validate(graph);
  json header;
  header["input_shape"] = {graph.input_shape.height, graph.input_shape.width,
                           graph.input_shape.channels};
  json layers = json::array();
  for (const auto& L : graph.layers) layers.push_back(layer_to_json(L));
  header["layers"] = layers;
  // One entry per parameterised layer.
  json params = json::array();
  for (std::size_t i = 0; i < graph.layers.size(); ++i) {
    const std::size_t count = graph.layer_param_count(i);
    if (count == 0) continue;
    params.push_back({{"layer", i}, {"offset", graph.weight_offsets[i]}, {"count", count}});
  }
  header["weights"] = params;
  header["weight_count"] = graph.weights.size();
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, kModelFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + graph.weights.size() * 4);
  for (float w : graph.weights) put_u32(out, std::bit_cast<std::uint32_t>(w));
  return out;
}

ModelGraph deserialize_model(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12 || !std::equal(kMagic, kMagic + 4, bytes.begin()))
    throw FormatError("not a model file (bad magic)");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kModelFormatVersion)
    throw FormatError("unsupported model format version " + std::to_string(version));
  const std::uint32_t header_len = get_u32(bytes, 8);
  if (bytes.size() < 12 + static_cast<std::size_t>(header_len))
    throw CorruptModelError("truncated model header");
  json header;
  try {
    header = json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_len);
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad model header JSON: ") + e.what());
  }

  ModelGraph g;
  try {
    const auto& s = header.at("input_shape");
    g.input_shape = Shape{s.at(0).get<int>(), s.at(1).get<int>(), s.at(2).get<int>()};
    for (const auto& lj : header.at("layers")) g.layers.push_back(layer_from_json(lj));
    const auto weight_count = header.at("weight_count").get<std::size_t>();
    const std::size_t blob = bytes.size() - 12 - header_len;
    if (blob != weight_count * 4)
      throw CorruptModelError("weight blob has " + std::to_string(blob) + " bytes, expected " +
                              std::to_string(weight_count * 4));
    std::vector<LayerSpec> layers = g.layers;
    const auto shapes = propagate_shapes(g.input_shape, layers);
    std::size_t total = 0;
    g.weight_offsets = compute_offsets(g.input_shape, layers, shapes, total);
    for (const auto& e : header.at("weights")) {
      const auto li = e.at("layer").get<std::size_t>();
      if (li >= g.layers.size() || g.weight_offsets[li] != e.at("offset").get<std::size_t>())
        throw CorruptModelError("weight table disagrees with layer stack");
    }
    g.weights.resize(weight_count);
    std::size_t pos = 12 + header_len;
    for (float& w : g.weights) {
      w = std::bit_cast<float>(get_u32(bytes, pos));
      pos += 4;
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad model header: ") + e.what());
  } catch (const ArgumentError& e) {
    throw CorruptModelError(std::string("invalid layer stack: ") + e.what());
  }
  validate(g);
  return g;
}

ModelGraph load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

void save_model(const ModelGraph& graph, const std::filesystem::path& path) {
  const auto bytes = serialize_model(graph);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write model file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

// ---------------------------------------------------------------------------
// Inference

ForwardResult forward_with_trace(const ModelGraph& graph, const Tensor& image) {
  if (image.shape() != graph.input_shape)
    throw InputError("image shape " + image.shape().str() + " does not match model input " +
                     graph.input_shape.str());
  if (!image.all_finite()) throw NumericError("non-finite input pixel");
  detail::ForwardCache<float> cache;
  detail::forward_cached<float>(graph, graph.weights, image, cache);
  ForwardResult r;
  for (std::size_t i = 0; i < graph.layers.size(); ++i)
    if (graph.layers[i].is_activation())
      r.trace.layers.push_back(
          LayerTrace{static_cast<int>(i), detail::channel_means(cache.outputs[i])});
  r.raw = std::move(cache.outputs.back());
  return r;
}

std::vector<Detection> nms(std::vector<Detection> dets, double iou_thresh) {
  std::stable_sort(dets.begin(), dets.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
  std::vector<Detection> kept;
  for (const Detection& d : dets) {
    bool suppressed = false;
    for (const Detection& k : kept)
      if (eval::iou(d.box, k.box) >= iou_thresh) {
        suppressed = true;
        break;
      }
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

namespace {
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

std::vector<Detection> decode_and_nms(const Tensor& raw, const ModelGraph& graph,
                                      double score_thresh, double iou_thresh) {
  const DetectParams& head = graph.head();
  const int B = head.boxes_per_cell;
  if (raw.shape() != Shape{head.grid_h, head.grid_w, B * 5})
    throw ArgumentError("raw head output shape " + raw.shape().str() + " does not match head");
  if (!raw.all_finite()) throw NumericError("non-finite raw head output");
  const double W = graph.input_shape.width;
  const double H = graph.input_shape.height;
  std::vector<Detection> dets;
  for (int gy = 0; gy < head.grid_h; ++gy)
    for (int gx = 0; gx < head.grid_w; ++gx)
      for (int a = 0; a < B; ++a) {
        const double score = sigmoid(raw.at(gy, gx, a * 5 + 4));
        if (score < score_thresh) continue;
        const double cx = (gx + sigmoid(raw.at(gy, gx, a * 5 + 0))) / head.grid_w * W;
        const double cy = (gy + sigmoid(raw.at(gy, gx, a * 5 + 1))) / head.grid_h * H;
        // Log-space sizes are clamped so exp() stays finite.
        const double tw = std::clamp<double>(raw.at(gy, gx, a * 5 + 2), -10.0, 10.0);
        const double th = std::clamp<double>(raw.at(gy, gx, a * 5 + 3), -10.0, 10.0);
        const double bw = head.anchors[a].w * std::exp(tw) * W;
        const double bh = head.anchors[a].h * std::exp(th) * H;
        const Box b = clip(Box{cx - bw / 2, cy - bh / 2, cx + bw / 2, cy + bh / 2}, W, H);
        if (!b.valid()) continue;
        dets.push_back(Detection{b, score});
      }
  return nms(std::move(dets), iou_thresh);
}

std::vector<Detection> detect(const ModelGraph& graph, const Tensor& image) {
  return decode_and_nms(forward_with_trace(graph, image).raw, graph);
}

}  // namespace cgt::nn
