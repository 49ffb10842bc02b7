#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mogeo {

// Dense row-major tensor of doubles, rank 1..4. All model math runs in
// 64-bit so gradient checks against central differences are meaningful.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(count(shape_)), 0.0);
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static int64_t count(const std::vector<int>& s) {
    int64_t n = 1;
    for (int d : s) {
      if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
      n *= d;
    }
    return n;
  }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // rank-2 (rows, cols)
  double& at2(int r, int c) {
    assert(rank() == 2);
    return data_[static_cast<size_t>(r) * shape_[1] + c];
  }
  double at2(int r, int c) const { return const_cast<Tensor*>(this)->at2(r, c); }

  // rank-3 (channels, height, width)
  double& at(int c, int h, int w) {
    assert(rank() == 3);
    return data_[(static_cast<size_t>(c) * shape_[1] + h) * shape_[2] + w];
  }
  double at(int c, int h, int w) const { return const_cast<Tensor*>(this)->at(c, h, w); }

  // rank-4 (out, in, kh, kw)
  double& at4(int o, int i, int kh, int kw) {
    assert(rank() == 4);
    return data_[((static_cast<size_t>(o) * shape_[1] + i) * shape_[2] + kh) * shape_[3] + kw];
  }
  double at4(int o, int i, int kh, int kw) const {
    return const_cast<Tensor*>(this)->at4(o, i, kh, kw);
  }

  void fill(double v) { data_.assign(data_.size(), v); }
  void zero() { fill(0.0); }

  void add_(const Tensor& other) {
    assert(size() == other.size());
    for (int64_t i = 0; i < size(); ++i) data_[static_cast<size_t>(i)] += other[i];
  }
  void scale_(double s) {
    for (auto& v : data_) v *= s;
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::string shape_str() const {
    std::string s = "(";
    for (size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape_[i]);
    }
    return s + ")";
  }

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

}  // namespace mogeo
