#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "dyad/core/matrix.hpp"
#include "dyad/core/rng.hpp"

namespace dyad {

enum class Act : std::uint8_t { identity = 0, relu = 1, tanh = 2, sigmoid = 3 };

inline const char* act_name(Act a) {
  switch (a) {
    case Act::identity: return "identity";
    case Act::relu: return "relu";
    case Act::tanh: return "tanh";
    case Act::sigmoid: return "sigmoid";
  }
  return "?";
}

inline double apply_act(Act a, double x) {
  switch (a) {
    case Act::identity: return x;
    case Act::relu: return x > 0.0 ? x : 0.0;
    case Act::tanh: return std::tanh(x);
    case Act::sigmoid: return 1.0 / (1.0 + std::exp(-x));
  }
  return x;
}

// Derivative expressed through the activation output y = act(x).
inline double act_deriv_from_output(Act a, double y) {
  switch (a) {
    case Act::identity: return 1.0;
    case Act::relu: return y > 0.0 ? 1.0 : 0.0;
    case Act::tanh: return 1.0 - y * y;
    case Act::sigmoid: return y * (1.0 - y);
  }
  return 1.0;
}

// Forward-pass values a layer must retain for its backward pass.
struct LayerCache {
  Matrix input;
  Matrix output;
  std::vector<std::size_t> argmax;  // maxpool winners
  bool valid = false;
};

// Parameter gradients of one layer (empty matrices when the layer has none).
struct LayerGrads {
  Matrix dW;
  Matrix db;
};

// ---------------------------------------------------------------------------
// Dense: y = x W^T + b, x is batch x in, W is out x in, b is 1 x out.
// ---------------------------------------------------------------------------
struct Dense {
  std::size_t in = 0, out = 0;
  Matrix W;  // out x in
  Matrix b;  // 1 x out

  Dense() = default;
  Dense(std::size_t in_size, std::size_t out_size)
      : in(in_size), out(out_size), W(out_size, in_size), b(1, out_size) {}

  void init(Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    for (std::size_t i = 0; i < W.size(); ++i) W[i] = rng.uniform(-bound, bound);
    b.fill(0.0);
  }

  Matrix forward(const Matrix& x, LayerCache& cache) const {
    require(x.cols() == in, "dense: input cols " + std::to_string(x.cols()) +
                                " != in_size " + std::to_string(in));
    Matrix y = matmul_nt(x, W);
    add_row_broadcast(y, b);
    cache.input = x;
    cache.valid = true;
    return y;
  }

  Matrix backward(const LayerCache& cache, const Matrix& dy, LayerGrads& g) const {
    require(cache.valid, "dense: backward called without forward cache");
    require(dy.cols() == out, "dense: upstream cols " + std::to_string(dy.cols()) +
                                  " != out_size " + std::to_string(out));
    g.dW = matmul_tn(dy, cache.input);  // out x in
    g.db = col_sums(dy);
    return matmul(dy, W);  // batch x in
  }
};

// ---------------------------------------------------------------------------
// Conv1d: valid (no padding) cross-correlation over channel-major rows.
// Input rows are laid out [channel][position], length in_ch * in_len.
// W is out_ch x (in_ch * kernel), b is 1 x out_ch.
// ---------------------------------------------------------------------------
struct Conv1d {
  std::size_t in_ch = 1, out_ch = 1, kernel = 1, stride = 1, in_len = 0;
  Matrix W;  // out_ch x (in_ch * kernel)
  Matrix b;  // 1 x out_ch

  Conv1d() = default;
  Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_w,
         std::size_t stride_w, std::size_t input_len)
      : in_ch(in_channels),
        out_ch(out_channels),
        kernel(kernel_w),
        stride(stride_w),
        in_len(input_len),
        W(out_channels, in_channels * kernel_w),
        b(1, out_channels) {
    require(kernel_w >= 1 && stride_w >= 1 && input_len >= kernel_w,
            "conv1d: invalid geometry (len " + std::to_string(input_len) + ", kernel " +
                std::to_string(kernel_w) + ", stride " + std::to_string(stride_w) + ")");
  }

  std::size_t out_len() const { return (in_len - kernel) / stride + 1; }

  void init(Rng& rng) {
    const double fan_in = static_cast<double>(in_ch * kernel);
    const double fan_out = static_cast<double>(out_ch * kernel);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (std::size_t i = 0; i < W.size(); ++i) W[i] = rng.uniform(-bound, bound);
    b.fill(0.0);
  }

  Matrix forward(const Matrix& x, LayerCache& cache) const {
    require(x.cols() == in_ch * in_len,
            "conv1d: input cols " + std::to_string(x.cols()) + " != in_ch*in_len " +
                std::to_string(in_ch * in_len));
    const std::size_t lo = out_len();
    Matrix y(x.rows(), out_ch * lo);
    for (std::size_t n = 0; n < x.rows(); ++n) {
      const double* xr = x.row(n);
      double* yr = y.row(n);
      for (std::size_t oc = 0; oc < out_ch; ++oc) {
        const double* w = W.row(oc);
        for (std::size_t t = 0; t < lo; ++t) {
          double acc = b[oc];
          const std::size_t t0 = t * stride;
          for (std::size_t ic = 0; ic < in_ch; ++ic) {
            const double* xc = xr + ic * in_len + t0;
            const double* wc = w + ic * kernel;
            for (std::size_t k = 0; k < kernel; ++k) acc += wc[k] * xc[k];
          }
          yr[oc * lo + t] = acc;
        }
      }
    }
    cache.input = x;
    cache.valid = true;
    return y;
  }

  Matrix backward(const LayerCache& cache, const Matrix& dy, LayerGrads& g) const {
    require(cache.valid, "conv1d: backward called without forward cache");
    const std::size_t lo = out_len();
    require(dy.cols() == out_ch * lo, "conv1d: upstream cols " + std::to_string(dy.cols()) +
                                          " != out_ch*out_len " + std::to_string(out_ch * lo));
    const Matrix& x = cache.input;
    g.dW = Matrix(out_ch, in_ch * kernel);
    g.db = Matrix(1, out_ch);
    Matrix dx(x.rows(), x.cols());
    for (std::size_t n = 0; n < x.rows(); ++n) {
      const double* xr = x.row(n);
      const double* dyr = dy.row(n);
      double* dxr = dx.row(n);
      for (std::size_t oc = 0; oc < out_ch; ++oc) {
        const double* w = W.row(oc);
        double* dw = g.dW.row(oc);
        for (std::size_t t = 0; t < lo; ++t) {
          const double dv = dyr[oc * lo + t];
          if (dv == 0.0) continue;
          g.db[oc] += dv;
          const std::size_t t0 = t * stride;
          for (std::size_t ic = 0; ic < in_ch; ++ic) {
            const double* xc = xr + ic * in_len + t0;
            double* dxc = dxr + ic * in_len + t0;
            const double* wc = w + ic * kernel;
            double* dwc = dw + ic * kernel;
            for (std::size_t k = 0; k < kernel; ++k) {
              dwc[k] += dv * xc[k];
              dxc[k] += dv * wc[k];
            }
          }
        }
      }
    }
    return dx;
  }
};

// ---------------------------------------------------------------------------
// MaxPool1d: non-overlapping windows of `width` per channel; out_len = in_len/width.
// ---------------------------------------------------------------------------
struct MaxPool1d {
  std::size_t channels = 1, width = 2, in_len = 0;

  MaxPool1d() = default;
  MaxPool1d(std::size_t ch, std::size_t pool_w, std::size_t input_len)
      : channels(ch), width(pool_w), in_len(input_len) {
    require(pool_w >= 1 && input_len >= pool_w, "maxpool: invalid geometry");
  }

  std::size_t out_len() const { return in_len / width; }

  Matrix forward(const Matrix& x, LayerCache& cache) const {
    require(x.cols() == channels * in_len,
            "maxpool: input cols " + std::to_string(x.cols()) + " != channels*in_len " +
                std::to_string(channels * in_len));
    const std::size_t lo = out_len();
    Matrix y(x.rows(), channels * lo);
    cache.argmax.assign(x.rows() * channels * lo, 0);
    for (std::size_t n = 0; n < x.rows(); ++n) {
      const double* xr = x.row(n);
      double* yr = y.row(n);
      for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t t = 0; t < lo; ++t) {
          const std::size_t base = c * in_len + t * width;
          std::size_t best = base;
          double bv = xr[base];
          for (std::size_t k = 1; k < width; ++k) {
            if (xr[base + k] > bv) {
              bv = xr[base + k];
              best = base + k;
            }
          }
          yr[c * lo + t] = bv;
          cache.argmax[(n * channels + c) * lo + t] = best;
        }
      }
    }
    cache.input = x;
    cache.valid = true;
    return y;
  }

  Matrix backward(const LayerCache& cache, const Matrix& dy, LayerGrads&) const {
    require(cache.valid, "maxpool: backward called without forward cache");
    const std::size_t lo = out_len();
    require(dy.cols() == channels * lo, "maxpool: upstream cols " + std::to_string(dy.cols()) +
                                            " != channels*out_len " +
                                            std::to_string(channels * lo));
    Matrix dx(cache.input.rows(), cache.input.cols());
    for (std::size_t n = 0; n < dy.rows(); ++n) {
      const double* dyr = dy.row(n);
      double* dxr = dx.row(n);
      for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t t = 0; t < lo; ++t) {
          dxr[cache.argmax[(n * channels + c) * lo + t]] += dyr[c * lo + t];
        }
      }
    }
    return dx;
  }
};

// ---------------------------------------------------------------------------
// Elementwise activation layer.
// ---------------------------------------------------------------------------
struct Activation {
  Act act = Act::tanh;

  Activation() = default;
  explicit Activation(Act a) : act(a) {}

  Matrix forward(const Matrix& x, LayerCache& cache) const {
    Matrix y(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = apply_act(act, x[i]);
    cache.output = y;
    cache.valid = true;
    return y;
  }

  Matrix backward(const LayerCache& cache, const Matrix& dy, LayerGrads&) const {
    require(cache.valid, "activation: backward called without forward cache");
    require(dy.same_shape(cache.output), "activation: upstream shape " + dy.shape_str() +
                                             " != cached " + cache.output.shape_str());
    Matrix dx(dy.rows(), dy.cols());
    for (std::size_t i = 0; i < dy.size(); ++i)
      dx[i] = dy[i] * act_deriv_from_output(act, cache.output[i]);
    return dx;
  }
};

using Layer = std::variant<Dense, Conv1d, MaxPool1d, Activation>;

inline Matrix layer_forward(const Layer& layer, const Matrix& x, LayerCache& cache) {
  return std::visit([&](const auto& l) { return l.forward(x, cache); }, layer);
}

inline Matrix layer_backward(const Layer& layer, const LayerCache& cache, const Matrix& dy,
                             LayerGrads& g) {
  return std::visit([&](const auto& l) { return l.backward(cache, dy, g); }, layer);
}

// Trainable parameters of a layer, in serialization order (W, b).
inline std::vector<Matrix*> layer_params(Layer& layer) {
  if (auto* d = std::get_if<Dense>(&layer)) return {&d->W, &d->b};
  if (auto* c = std::get_if<Conv1d>(&layer)) return {&c->W, &c->b};
  return {};
}

inline std::vector<const Matrix*> layer_params(const Layer& layer) {
  if (auto* d = std::get_if<Dense>(&layer)) return {&d->W, &d->b};
  if (auto* c = std::get_if<Conv1d>(&layer)) return {&c->W, &c->b};
  return {};
}

// ---------------------------------------------------------------------------
// Network: a fixed chain of layers. Architectures in this project are plain
// chains, so per-layer caches stand in for a general tape.
// ---------------------------------------------------------------------------
struct Network {
  std::vector<Layer> layers;

  void init(Rng& rng) {
    for (auto& l : layers) {
      if (auto* d = std::get_if<Dense>(&l)) d->init(rng);
      if (auto* c = std::get_if<Conv1d>(&l)) c->init(rng);
    }
  }

  Matrix forward(const Matrix& x, std::vector<LayerCache>* caches = nullptr) const {
    Matrix h = x;
    if (caches) caches->assign(layers.size(), LayerCache{});
    for (std::size_t i = 0; i < layers.size(); ++i) {
      LayerCache scratch;
      LayerCache& c = caches ? (*caches)[i] : scratch;
      h = layer_forward(layers[i], h, c);
    }
    return h;
  }

  // Returns d(input); fills one LayerGrads per layer.
  Matrix backward(const std::vector<LayerCache>& caches, const Matrix& dy,
                  std::vector<LayerGrads>& grads) const {
    require(caches.size() == layers.size(), "network: cache count mismatch");
    grads.assign(layers.size(), LayerGrads{});
    Matrix d = dy;
    for (std::size_t i = layers.size(); i-- > 0;) {
      d = layer_backward(layers[i], caches[i], d, grads[i]);
    }
    return d;
  }

  std::vector<Matrix*> params() {
    std::vector<Matrix*> out;
    for (auto& l : layers)
      for (Matrix* p : layer_params(l)) out.push_back(p);
    return out;
  }

  // Gradients flattened in the same order as params().
  static std::vector<Matrix*> flatten(std::vector<LayerGrads>& grads,
                                      const std::vector<Layer>& layers) {
    std::vector<Matrix*> out;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (std::holds_alternative<Dense>(layers[i]) ||
          std::holds_alternative<Conv1d>(layers[i])) {
        out.push_back(&grads[i].dW);
        out.push_back(&grads[i].db);
      }
    }
    return out;
  }
};

}  // namespace dyad
