#pragma once

#include <cmath>

#include "mogeo/tensor.hpp"

namespace mogeo::kernels {

// Every kernel exists twice: a plain serial reference and an OpenMP
// version. Both compute each output element with the same inner-loop
// order, so results are bit-identical regardless of thread count; the
// serial build is kept as the correctness reference and for the
// benchmark comparison.

bool parallel_enabled();
void set_parallel(bool on);
int thread_count();

// 2-D convolution. in: (Cin,H,W), w: (Cout,Cin,K,K), b: (Cout),
// out: (Cout,OH,OW) with OH = (H + 2p - K)/s + 1.
void conv2d_forward(const Tensor& in, const Tensor& w, const Tensor& b,
                    int stride, int pad, Tensor& out);
// din is overwritten.
void conv2d_backward_input(const Tensor& w, const Tensor& dout,
                           int stride, int pad, Tensor& din);
// dw/db are accumulated into (callers zero them once per step).
void conv2d_backward_params(const Tensor& in, const Tensor& dout,
                            int stride, int pad, Tensor& dw, Tensor& db);

// x * sigmoid(x), elementwise
void silu_forward(const Tensor& in, Tensor& out);
void silu_backward(const Tensor& in, const Tensor& dout, Tensor& din);

namespace serial {
void conv2d_forward(const Tensor& in, const Tensor& w, const Tensor& b,
                    int stride, int pad, Tensor& out);
void conv2d_backward_input(const Tensor& w, const Tensor& dout,
                           int stride, int pad, Tensor& din);
void conv2d_backward_params(const Tensor& in, const Tensor& dout,
                            int stride, int pad, Tensor& dw, Tensor& db);
void silu_forward(const Tensor& in, Tensor& out);
void silu_backward(const Tensor& in, const Tensor& dout, Tensor& din);
}  // namespace serial

namespace omp {
void conv2d_forward(const Tensor& in, const Tensor& w, const Tensor& b,
                    int stride, int pad, Tensor& out);
void conv2d_backward_input(const Tensor& w, const Tensor& dout,
                           int stride, int pad, Tensor& din);
void conv2d_backward_params(const Tensor& in, const Tensor& dout,
                            int stride, int pad, Tensor& dw, Tensor& db);
void silu_forward(const Tensor& in, Tensor& out);
void silu_backward(const Tensor& in, const Tensor& dout, Tensor& din);
}  // namespace omp

inline double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// log(1 + e^x), overflow-safe
inline double softplus(double x) {
  double m = x > 0 ? x : 0.0;
  return m + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace mogeo::kernels
