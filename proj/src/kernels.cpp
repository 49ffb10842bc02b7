#include "mogeo/kernels.hpp"

#include <atomic>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mogeo::kernels {

namespace {
std::atomic<bool> g_parallel{true};

void check_conv_shapes(const Tensor& in, const Tensor& w, const Tensor& b) {
  if (in.rank() != 3 || w.rank() != 4 || b.rank() != 1)
    throw std::invalid_argument("conv2d: bad ranks");
  if (in.dim(0) != w.dim(1)) throw std::invalid_argument("conv2d: channel mismatch");
  if (b.dim(0) != w.dim(0)) throw std::invalid_argument("conv2d: bias mismatch");
}

inline int out_extent(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}
}  // namespace

bool parallel_enabled() { return g_parallel.load(); }
void set_parallel(bool on) { g_parallel.store(on); }

int thread_count() {
#ifdef _OPENMP
  return parallel_enabled() ? omp_get_max_threads() : 1;
#else
  return 1;
#endif
}

// ---------------------------------------------------------------- serial

namespace serial {

void conv2d_forward(const Tensor& in, const Tensor& w, const Tensor& b,
                    int stride, int pad, Tensor& out) {
  check_conv_shapes(in, w, b);
  const int ci = in.dim(0), H = in.dim(1), W = in.dim(2);
  const int co = w.dim(0), K = w.dim(2);
  const int oh = out_extent(H, K, stride, pad), ow = out_extent(W, K, stride, pad);
  out = Tensor({co, oh, ow});
  for (int o = 0; o < co; ++o)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double acc = b[o];
        for (int c = 0; c < ci; ++c)
          for (int ky = 0; ky < K; ++ky) {
            const int iy = y * stride - pad + ky;
            if (iy < 0 || iy >= H) continue;
            for (int kx = 0; kx < K; ++kx) {
              const int ix = x * stride - pad + kx;
              if (ix < 0 || ix >= W) continue;
              acc += in.at(c, iy, ix) * w.at4(o, c, ky, kx);
            }
          }
        out.at(o, y, x) = acc;
      }
}

void conv2d_backward_input(const Tensor& w, const Tensor& dout,
                           int stride, int pad, Tensor& din) {
  const int co = w.dim(0), ci = w.dim(1), K = w.dim(2);
  const int oh = dout.dim(1), ow = dout.dim(2);
  const int H = din.dim(1), W = din.dim(2);
  // gather form: each input element sums its contributions in a fixed
  // order, which keeps the result independent of the thread layout
  for (int c = 0; c < ci; ++c)
    for (int iy = 0; iy < H; ++iy)
      for (int ix = 0; ix < W; ++ix) {
        double acc = 0.0;
        for (int o = 0; o < co; ++o)
          for (int ky = 0; ky < K; ++ky) {
            const int ty = iy + pad - ky;
            if (ty < 0 || ty % stride) continue;
            const int y = ty / stride;
            if (y >= oh) continue;
            for (int kx = 0; kx < K; ++kx) {
              const int tx = ix + pad - kx;
              if (tx < 0 || tx % stride) continue;
              const int x = tx / stride;
              if (x >= ow) continue;
              acc += w.at4(o, c, ky, kx) * dout.at(o, y, x);
            }
          }
        din.at(c, iy, ix) = acc;
      }
}

void conv2d_backward_params(const Tensor& in, const Tensor& dout,
                            int stride, int pad, Tensor& dw, Tensor& db) {
  const int ci = in.dim(0), H = in.dim(1), W = in.dim(2);
  const int co = dout.dim(0), oh = dout.dim(1), ow = dout.dim(2);
  const int K = dw.dim(2);
  for (int o = 0; o < co; ++o) {
    double acc = 0.0;
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) acc += dout.at(o, y, x);
    db[o] += acc;
  }
  for (int o = 0; o < co; ++o)
    for (int c = 0; c < ci; ++c)
      for (int ky = 0; ky < K; ++ky)
        for (int kx = 0; kx < K; ++kx) {
          double acc = 0.0;
          for (int y = 0; y < oh; ++y) {
            const int iy = y * stride - pad + ky;
            if (iy < 0 || iy >= H) continue;
            for (int x = 0; x < ow; ++x) {
              const int ix = x * stride - pad + kx;
              if (ix < 0 || ix >= W) continue;
              acc += in.at(c, iy, ix) * dout.at(o, y, x);
            }
          }
          dw.at4(o, c, ky, kx) += acc;
        }
}

void silu_forward(const Tensor& in, Tensor& out) {
  out = Tensor(in.shape());
  for (int64_t i = 0; i < in.size(); ++i) out[i] = in[i] * sigmoid(in[i]);
}

void silu_backward(const Tensor& in, const Tensor& dout, Tensor& din) {
  din = Tensor(in.shape());
  for (int64_t i = 0; i < in.size(); ++i) {
    const double s = sigmoid(in[i]);
    din[i] = dout[i] * (s + in[i] * s * (1.0 - s));
  }
}

}  // namespace serial

// ------------------------------------------------------------------ omp

namespace omp {

void conv2d_forward(const Tensor& in, const Tensor& w, const Tensor& b,
                    int stride, int pad, Tensor& out) {
  check_conv_shapes(in, w, b);
  const int ci = in.dim(0), H = in.dim(1), W = in.dim(2);
  const int co = w.dim(0), K = w.dim(2);
  const int oh = out_extent(H, K, stride, pad), ow = out_extent(W, K, stride, pad);
  out = Tensor({co, oh, ow});
#pragma omp parallel for collapse(2) schedule(static)
  for (int o = 0; o < co; ++o)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double acc = b[o];
        for (int c = 0; c < ci; ++c)
          for (int ky = 0; ky < K; ++ky) {
            const int iy = y * stride - pad + ky;
            if (iy < 0 || iy >= H) continue;
            for (int kx = 0; kx < K; ++kx) {
              const int ix = x * stride - pad + kx;
              if (ix < 0 || ix >= W) continue;
              acc += in.at(c, iy, ix) * w.at4(o, c, ky, kx);
            }
          }
        out.at(o, y, x) = acc;
      }
}

void conv2d_backward_input(const Tensor& w, const Tensor& dout,
                           int stride, int pad, Tensor& din) {
  const int co = w.dim(0), ci = w.dim(1), K = w.dim(2);
  const int oh = dout.dim(1), ow = dout.dim(2);
  const int H = din.dim(1), W = din.dim(2);
#pragma omp parallel for collapse(2) schedule(static)
  for (int c = 0; c < ci; ++c)
    for (int iy = 0; iy < H; ++iy)
      for (int ix = 0; ix < W; ++ix) {
        double acc = 0.0;
        for (int o = 0; o < co; ++o)
          for (int ky = 0; ky < K; ++ky) {
            const int ty = iy + pad - ky;
            if (ty < 0 || ty % stride) continue;
            const int y = ty / stride;
            if (y >= oh) continue;
            for (int kx = 0; kx < K; ++kx) {
              const int tx = ix + pad - kx;
              if (tx < 0 || tx % stride) continue;
              const int x = tx / stride;
              if (x >= ow) continue;
              acc += w.at4(o, c, ky, kx) * dout.at(o, y, x);
            }
          }
        din.at(c, iy, ix) = acc;
      }
}

void conv2d_backward_params(const Tensor& in, const Tensor& dout,
                            int stride, int pad, Tensor& dw, Tensor& db) {
  const int ci = in.dim(0), H = in.dim(1), W = in.dim(2);
  const int co = dout.dim(0), oh = dout.dim(1), ow = dout.dim(2);
  const int K = dw.dim(2);
#pragma omp parallel for schedule(static)
  for (int o = 0; o < co; ++o) {
    double acc = 0.0;
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) acc += dout.at(o, y, x);
    db[o] += acc;
  }
#pragma omp parallel for collapse(2) schedule(static)
  for (int o = 0; o < co; ++o)
    for (int c = 0; c < ci; ++c)
      for (int ky = 0; ky < K; ++ky)
        for (int kx = 0; kx < K; ++kx) {
          double acc = 0.0;
          for (int y = 0; y < oh; ++y) {
            const int iy = y * stride - pad + ky;
            if (iy < 0 || iy >= H) continue;
            for (int x = 0; x < ow; ++x) {
              const int ix = x * stride - pad + kx;
              if (ix < 0 || ix >= W) continue;
              acc += in.at(c, iy, ix) * dout.at(o, y, x);
            }
          }
          dw.at4(o, c, ky, kx) += acc;
        }
}

void silu_forward(const Tensor& in, Tensor& out) {
  out = Tensor(in.shape());
  const int64_t n = in.size();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) out[i] = in[i] * sigmoid(in[i]);
}

void silu_backward(const Tensor& in, const Tensor& dout, Tensor& din) {
  din = Tensor(in.shape());
  const int64_t n = in.size();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) {
    const double s = sigmoid(in[i]);
    din[i] = dout[i] * (s + in[i] * s * (1.0 - s));
  }
}

}  // namespace omp

// ------------------------------------------------------------- dispatch

#define MOGEO_DISPATCH(fn, ...)          \
  if (parallel_enabled()) {              \
    omp::fn(__VA_ARGS__);                \
  } else {                               \
    serial::fn(__VA_ARGS__);             \
  }

void conv2d_forward(const Tensor& in, const Tensor& w, const Tensor& b,
                    int stride, int pad, Tensor& out) {
  MOGEO_DISPATCH(conv2d_forward, in, w, b, stride, pad, out)
}
void conv2d_backward_input(const Tensor& w, const Tensor& dout,
                           int stride, int pad, Tensor& din) {
  MOGEO_DISPATCH(conv2d_backward_input, w, dout, stride, pad, din)
}
void conv2d_backward_params(const Tensor& in, const Tensor& dout,
                            int stride, int pad, Tensor& dw, Tensor& db) {
  MOGEO_DISPATCH(conv2d_backward_params, in, dout, stride, pad, dw, db)
}
void silu_forward(const Tensor& in, Tensor& out) { MOGEO_DISPATCH(silu_forward, in, out) }
void silu_backward(const Tensor& in, const Tensor& dout, Tensor& din) {
  MOGEO_DISPATCH(silu_backward, in, dout, din)
}

#undef MOGEO_DISPATCH

}  // namespace mogeo::kernels
