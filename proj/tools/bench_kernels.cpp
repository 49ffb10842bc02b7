// Benchmark comparing the serial reference kernels against the OpenMP
// versions on convolution shapes the model actually runs.

#include <chrono>
#include <cstdio>
#include <functional>

#include "mogeo/kernels.hpp"
#include "mogeo/rng.hpp"

using namespace mogeo;

namespace {

double time_of(const std::function<void()>& fn, int iters) {
  fn();  // warm up
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < iters; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count() / iters;
}

void fill_random(Tensor& t, Rng& rng) {
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1, 1);
}

struct Case {
  const char* name;
  int cin, h, w, cout, k, stride, pad;
};

}  // namespace

int main() {
  const Case cases[] = {
      {"enc stage1 3->8   128px", 3, 128, 128, 8, 3, 2, 1},
      {"enc stage2 8->16   64px", 8, 64, 64, 16, 3, 2, 1},
      {"enc stage4 24->32  16px", 24, 16, 16, 32, 3, 2, 1},
      {"head 3x3 49->24     8px", 49, 8, 8, 24, 3, 1, 1},
      {"proj 1x1 32->48     8px", 32, 8, 8, 48, 1, 1, 0},
  };

  std::printf("%-26s %12s %12s %8s\n", "kernel", "serial(ms)", "openmp(ms)", "speedup");
  Rng rng(7);
  for (const Case& c : cases) {
    Tensor in({c.cin, c.h, c.w}), w({c.cout, c.cin, c.k, c.k}), b({c.cout});
    fill_random(in, rng);
    fill_random(w, rng);
    fill_random(b, rng);
    Tensor out_serial, out_omp;

    const int iters = 20;
    const double ts = time_of(
        [&] { kernels::serial::conv2d_forward(in, w, b, c.stride, c.pad, out_serial); }, iters);
    const double tp = time_of(
        [&] { kernels::omp::conv2d_forward(in, w, b, c.stride, c.pad, out_omp); }, iters);

    bool equal = out_serial.size() == out_omp.size();
    for (int64_t i = 0; equal && i < out_serial.size(); ++i)
      equal = out_serial[i] == out_omp[i];

    std::printf("%-26s %12.3f %12.3f %7.2fx %s\n", c.name, ts * 1e3, tp * 1e3, ts / tp,
                equal ? "" : "MISMATCH");

    // backward kernels on the same shape
    Tensor dout(out_serial.shape());
    fill_random(dout, rng);
    Tensor din_s(in.shape()), din_p(in.shape());
    Tensor dw_s(w.shape()), db_s(b.shape()), dw_p(w.shape()), db_p(b.shape());
    const double bs = time_of(
        [&] {
          kernels::serial::conv2d_backward_input(w, dout, c.stride, c.pad, din_s);
          kernels::serial::conv2d_backward_params(in, dout, c.stride, c.pad, dw_s, db_s);
        },
        iters);
    const double bp = time_of(
        [&] {
          kernels::omp::conv2d_backward_input(w, dout, c.stride, c.pad, din_p);
          kernels::omp::conv2d_backward_params(in, dout, c.stride, c.pad, dw_p, db_p);
        },
        iters);
    std::printf("%-26s %12.3f %12.3f %7.2fx\n", "  backward", bs * 1e3, bp * 1e3, bs / bp);
  }
  std::printf("threads: %d\n", kernels::thread_count());
  return 0;
}
