#pragma once

#include <functional>
#include <string>

#include "mogeo/kernels.hpp"
#include "mogeo/rng.hpp"
#include "mogeo/tensor.hpp"

namespace mogeo {

// Convolution layer owning weights and their gradient accumulators.
struct ConvLayer {
  Tensor w, b, gw, gb;  // w: (out,in,k,k)
  int stride = 1, pad = 0;

  ConvLayer() = default;
  ConvLayer(int out_c, int in_c, int k, int stride_, int pad_)
      : w({out_c, in_c, k, k}), b({out_c}), gw({out_c, in_c, k, k}), gb({out_c}),
        stride(stride_), pad(pad_) {}

  int out_channels() const { return w.dim(0); }
  int in_channels() const { return w.dim(1); }
  int kernel() const { return w.dim(2); }

  Tensor forward(const Tensor& x) const {
    Tensor y;
    kernels::conv2d_forward(x, w, b, stride, pad, y);
    return y;
  }

  // accumulates gw/gb; writes d(input) into *dx when non-null
  void backward(const Tensor& x, const Tensor& dy, Tensor* dx) {
    kernels::conv2d_backward_params(x, dy, stride, pad, gw, gb);
    if (dx) {
      *dx = Tensor(x.shape());
      kernels::conv2d_backward_input(w, dy, stride, pad, *dx);
    }
  }

  void zero_grad() {
    gw.zero();
    gb.zero();
  }

  void init(Rng& rng) {
    // fan-in scaled uniform, variance 2/fan_in to hold activation scale
    // through the SiLU stacks
    const double a =
        std::sqrt(6.0 / (static_cast<double>(in_channels()) * kernel() * kernel()));
    for (int64_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-a, a);
    b.zero();
  }
};

// Dense map v = W x + b on rank-1 tensors.
struct LinearLayer {
  Tensor w, b, gw, gb;  // w: (out,in)

  LinearLayer() = default;
  LinearLayer(int out_d, int in_d) : w({out_d, in_d}), b({out_d}), gw({out_d, in_d}), gb({out_d}) {}

  int out_features() const { return w.dim(0); }
  int in_features() const { return w.dim(1); }

  Tensor forward(const Tensor& x) const {
    Tensor y({out_features()});
    for (int o = 0; o < out_features(); ++o) {
      double acc = b[o];
      for (int i = 0; i < in_features(); ++i) acc += w.at2(o, i) * x[i];
      y[o] = acc;
    }
    return y;
  }

  void backward(const Tensor& x, const Tensor& dy, Tensor* dx) {
    for (int o = 0; o < out_features(); ++o) {
      gb[o] += dy[o];
      for (int i = 0; i < in_features(); ++i) gw.at2(o, i) += dy[o] * x[i];
    }
    if (dx) {
      *dx = Tensor({in_features()});
      for (int i = 0; i < in_features(); ++i) {
        double acc = 0;
        for (int o = 0; o < out_features(); ++o) acc += w.at2(o, i) * dy[o];
        (*dx)[i] = acc;
      }
    }
  }

  void zero_grad() {
    gw.zero();
    gb.zero();
  }

  void init(Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(in_features()));
    for (int64_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-a, a);
    b.zero();
  }
};

// Parameter visitation order defines the init stream and the checkpoint
// layout, so every module keeps it stable.
using ParamVisitor = std::function<void(const std::string&, Tensor&, Tensor&)>;

}  // namespace mogeo
