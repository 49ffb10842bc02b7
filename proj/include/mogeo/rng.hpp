#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <vector>

namespace mogeo {

// Deterministic random source. mt19937_64 is fully specified by the
// standard, and all derived draws below avoid std::uniform_*_distribution
// (whose output is implementation-defined), so a seed pins the stream
// bit-for-bit across platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : engine_(seed), base_seed_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // uniform in [0, 1) with 53 random bits
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [lo, hi] inclusive, rejection sampled (unbiased)
  int64_t uniform_int(int64_t lo, int64_t hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return lo + static_cast<int64_t>(x % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  double normal() {
    // Box-Muller, one value per call (the spare is discarded to keep the
    // stream position a pure function of call count)
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Derive an independent stream; splitmix64 spreads nearby keys apart.
  Rng fork(uint64_t key) const {
    uint64_t z = key + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return Rng(base_seed_ ^ (z ^ (z >> 31)));
  }

  void seed(uint64_t s) {
    base_seed_ = s;
    engine_.seed(s);
  }

  void save(std::ostream& os) const { os << engine_; }
  void restore(std::istream& is) { is >> engine_; }

 private:
  std::mt19937_64 engine_;
  uint64_t base_seed_ = 0;
};

}  // namespace mogeo
