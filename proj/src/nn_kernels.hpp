#pragma once

// Templated forward/backward kernels shared by inference (float) and training
// (float or double). Private to the library.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "cgt/nn.hpp"

namespace cgt::nn::detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ConvGeom {
  int in_h, in_w, in_c;
  int out_h, out_w, out_c;
  int kh, kw, stride;
  int pad_top, pad_left;

  int patch() const noexcept { return kh * kw * in_c; }
  int out_pixels() const noexcept { return out_h * out_w; }
};

ConvGeom conv_geometry(const Shape& in, const ConvParams& p);

/// Row r = output pixel, column (ky*kw + kx)*in_c + ci.
template <typename T>
void im2col(const T* x, const ConvGeom& g, RowMat<T>& col) {
  col.resize(g.out_pixels(), g.patch());
  for (int oy = 0; oy < g.out_h; ++oy) {
    for (int ox = 0; ox < g.out_w; ++ox) {
      T* row = col.data() + static_cast<std::ptrdiff_t>(oy * g.out_w + ox) * g.patch();
      for (int ky = 0; ky < g.kh; ++ky) {
        const int iy = oy * g.stride + ky - g.pad_top;
        for (int kx = 0; kx < g.kw; ++kx) {
          const int ix = ox * g.stride + kx - g.pad_left;
          T* dst = row + (ky * g.kw + kx) * g.in_c;
          if (iy < 0 || iy >= g.in_h || ix < 0 || ix >= g.in_w) {
            std::fill(dst, dst + g.in_c, T(0));
          } else {
            const T* src = x + (static_cast<std::ptrdiff_t>(iy) * g.in_w + ix) * g.in_c;
            std::copy(src, src + g.in_c, dst);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const RowMat<T>& dcol, const ConvGeom& g, T* dx) {
  for (int oy = 0; oy < g.out_h; ++oy) {
    for (int ox = 0; ox < g.out_w; ++ox) {
      const T* row = dcol.data() + static_cast<std::ptrdiff_t>(oy * g.out_w + ox) * g.patch();
      for (int ky = 0; ky < g.kh; ++ky) {
        const int iy = oy * g.stride + ky - g.pad_top;
        if (iy < 0 || iy >= g.in_h) continue;
        for (int kx = 0; kx < g.kw; ++kx) {
          const int ix = ox * g.stride + kx - g.pad_left;
          if (ix < 0 || ix >= g.in_w) continue;
          const T* src = row + (ky * g.kw + kx) * g.in_c;
          T* dst = dx + (static_cast<std::ptrdiff_t>(iy) * g.in_w + ix) * g.in_c;
          for (int c = 0; c < g.in_c; ++c) dst[c] += src[c];
        }
      }
    }
  }
}

/// Kernels are stored (out, in, kh, kw); the GEMM wants (patch, out).
template <typename T>
RowMat<T> weight_matrix(const T* w, const ConvGeom& g) {
  RowMat<T> m(g.patch(), g.out_c);
  for (int co = 0; co < g.out_c; ++co)
    for (int ci = 0; ci < g.in_c; ++ci)
      for (int ky = 0; ky < g.kh; ++ky)
        for (int kx = 0; kx < g.kw; ++kx)
          m((ky * g.kw + kx) * g.in_c + ci, co) = w[((co * g.in_c + ci) * g.kh + ky) * g.kw + kx];
  return m;
}

template <typename T>
void scatter_weight_grad(const RowMat<T>& dm, const ConvGeom& g, T* dw) {
  for (int co = 0; co < g.out_c; ++co)
    for (int ci = 0; ci < g.in_c; ++ci)
      for (int ky = 0; ky < g.kh; ++ky)
        for (int kx = 0; kx < g.kw; ++kx)
          dw[((co * g.in_c + ci) * g.kh + ky) * g.kw + kx] += dm((ky * g.kw + kx) * g.in_c + ci, co);
}

template <typename T>
void conv_forward(const T* x, const T* params, const ConvGeom& g, RowMat<T>& col, T* y) {
  im2col(x, g, col);
  const RowMat<T> wm = weight_matrix(params, g);
  const T* bias = params + static_cast<std::ptrdiff_t>(g.out_c) * g.patch();
  Eigen::Map<RowMat<T>> out(y, g.out_pixels(), g.out_c);
  out.noalias() = col * wm;
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias, g.out_c);
  out.rowwise() += b;
}

/// Accumulates parameter gradients into `dparams`; writes (+=) input gradient
/// into `dx` when non-null.
template <typename T>
void conv_backward(const RowMat<T>& col, const T* params, const ConvGeom& g, const T* dy,
                   T* dparams, T* dx) {
  Eigen::Map<const RowMat<T>> dout(dy, g.out_pixels(), g.out_c);
  const RowMat<T> dwm = col.transpose() * dout;
  scatter_weight_grad(dwm, g, dparams);
  T* dbias = dparams + static_cast<std::ptrdiff_t>(g.out_c) * g.patch();
  for (int co = 0; co < g.out_c; ++co) {
    T acc = 0;
    for (int r = 0; r < g.out_pixels(); ++r) acc += dout(r, co);
    dbias[co] += acc;
  }
  if (dx != nullptr) {
    const RowMat<T> wm = weight_matrix(params, g);
    const RowMat<T> dcol = dout * wm.transpose();
    col2im_add(dcol, g, dx);
  }
}

template <typename T>
void maxpool_forward(const BasicTensor<T>& x, BasicTensor<T>& y, std::vector<int>& argmax) {
  const int oh = x.height() / 2, ow = x.width() / 2, c = x.channels();
  y = BasicTensor<T>(Shape{oh, ow, c});
  argmax.assign(y.size(), 0);
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox)
      for (int ch = 0; ch < c; ++ch) {
        std::size_t best = x.index(2 * oy, 2 * ox, ch);
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const std::size_t i = x.index(2 * oy + dy, 2 * ox + dx, ch);
            if (x.data()[i] > x.data()[best]) best = i;
          }
        const std::size_t o = y.index(oy, ox, ch);
        y.data()[o] = x.data()[best];
        argmax[o] = static_cast<int>(best);
      }
}

template <typename T>
T activate(LayerKind kind, T v, T slope) {
  if (v > T(0)) return v;
  return kind == LayerKind::relu ? T(0) : v * slope;
}

template <typename T>
T activation_slope(LayerKind kind, T pre, T slope) {
  if (pre > T(0)) return T(1);
  return kind == LayerKind::relu ? T(0) : slope;
}

/// Per-layer outputs of one forward pass, kept for backprop.
template <typename T>
struct ForwardCache {
  std::vector<BasicTensor<T>> outputs;  // outputs[i] = output of layer i
  std::vector<RowMat<T>> cols;          // im2col buffers (conv layers only)
  std::vector<std::vector<int>> argmax; // maxpool routing
};

template <typename T>
void forward_cached(const ModelGraph& g, std::span<const T> weights, const BasicTensor<T>& input,
                    ForwardCache<T>& cache) {
  const std::size_t n = g.layers.size();
  cache.outputs.resize(n);
  cache.cols.resize(n);
  cache.argmax.resize(n);
  const BasicTensor<T>* x = &input;
  for (std::size_t i = 0; i < n; ++i) {
    const LayerSpec& L = g.layers[i];
    BasicTensor<T>& y = cache.outputs[i];
    switch (L.kind) {
      case LayerKind::conv2d: {
        const ConvGeom geom = conv_geometry(x->shape(), L.conv);
        y = BasicTensor<T>(Shape{geom.out_h, geom.out_w, geom.out_c});
        conv_forward(x->data().data(), weights.data() + g.weight_offsets[i], geom, cache.cols[i],
                     y.data().data());
        break;
      }
      case LayerKind::leaky_relu:
      case LayerKind::relu: {
        y = BasicTensor<T>(x->shape());
        const T slope = static_cast<T>(L.leaky_slope);
        auto src = x->data();
        auto dst = y.data();
        for (std::size_t k = 0; k < src.size(); ++k) dst[k] = activate(L.kind, src[k], slope);
        break;
      }
      case LayerKind::maxpool2x2:
        maxpool_forward(*x, y, cache.argmax[i]);
        break;
      case LayerKind::detect_head:
        y = *x;
        break;
    }
    if (!y.all_finite())
      throw NumericError("non-finite activation at layer " + std::to_string(i) + " (" +
                         to_string(L.kind) + ")");
    x = &y;
  }
}

/// Reverse-mode pass. `d_raw` is dLoss/d(head output); gradients are
/// accumulated into `grad` (same layout as the weight blob).
template <typename T>
void backward(const ModelGraph& g, std::span<const T> weights, const BasicTensor<T>& input,
              const ForwardCache<T>& cache, const BasicTensor<T>& d_raw, std::span<T> grad) {
  const std::size_t n = g.layers.size();
  BasicTensor<T> dy = d_raw;
  for (std::size_t k = n; k-- > 0;) {
    const LayerSpec& L = g.layers[k];
    const BasicTensor<T>& x = k == 0 ? input : cache.outputs[k - 1];
    switch (L.kind) {
      case LayerKind::detect_head:
        break;
      case LayerKind::conv2d: {
        const ConvGeom geom = conv_geometry(x.shape(), L.conv);
        const bool need_dx = k > 0;
        BasicTensor<T> dx(need_dx ? x.shape() : Shape{});
        conv_backward(cache.cols[k], weights.data() + g.weight_offsets[k], geom, dy.data().data(),
                      grad.data() + g.weight_offsets[k], need_dx ? dx.data().data() : nullptr);
        dy = std::move(dx);
        break;
      }
      case LayerKind::leaky_relu:
      case LayerKind::relu: {
        const T slope = static_cast<T>(L.leaky_slope);
        auto pre = x.data();
        auto d = dy.data();
        for (std::size_t j = 0; j < d.size(); ++j) d[j] *= activation_slope(L.kind, pre[j], slope);
        break;
      }
      case LayerKind::maxpool2x2: {
        BasicTensor<T> dx(x.shape());
        const auto& route = cache.argmax[k];
        auto d = dy.data();
        for (std::size_t j = 0; j < d.size(); ++j) dx.data()[route[j]] += d[j];
        dy = std::move(dx);
        break;
      }
    }
  }
}

/// Per-channel spatial mean in double precision.
template <typename T>
std::vector<double> channel_means(const BasicTensor<T>& t) {
  std::vector<double> sums(t.channels(), 0.0);
  const int c = t.channels();
  auto d = t.data();
  for (std::size_t i = 0; i < d.size(); ++i) sums[i % c] += static_cast<double>(d[i]);
  const double px = static_cast<double>(t.height()) * t.width();
  for (double& s : sums) s = px > 0 ? s / px : 0.0;
  return sums;
}

}  // namespace cgt::nn::detail
