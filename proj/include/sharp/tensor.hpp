#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "sharp/errors.hpp"

namespace sharp {

// Dense row-major float32 tensor. Plain value type: the whole engine runs on
// vectors of these plus explicit shape bookkeeping.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<std::size_t>(count_(shape_)), 0.0f);
  }
  Tensor(std::vector<int> shape, std::vector<float> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (count_(shape_) != static_cast<std::int64_t>(data_.size()))
      throw ConfigError("tensor shape/data length mismatch");
  }

  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::vector<float>& vec() { return data_; }
  const std::vector<float>& vec() const { return data_; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  // Reinterprets the element buffer under a new shape (same element count).
  Tensor reshaped(std::vector<int> shape) const {
    if (count_(shape) != numel()) throw ConfigError("reshape changes element count");
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
  }

  void fill(float v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    for (float v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::string shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i)
      s += (i ? "x" : "") + std::to_string(shape_[i]);
    return s + "]";
  }

 private:
  static std::int64_t count_(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
      if (d <= 0) throw ConfigError("tensor dims must be positive");
      n *= d;
    }
    return n;
  }

  std::vector<int> shape_;
  std::vector<float> data_;
};

// Rows = samples. Stacks b on top of a (same trailing dims).
inline Tensor concat_rows(const Tensor& a, const Tensor& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  std::vector<int> sa = a.shape(), sb = b.shape();
  if (sa.size() != sb.size()) throw ConfigError("concat rank mismatch");
  for (std::size_t i = 1; i < sa.size(); ++i)
    if (sa[i] != sb[i]) throw ConfigError("concat trailing-dim mismatch");
  std::vector<int> out = sa;
  out[0] = sa[0] + sb[0];
  Tensor t(out);
  std::copy(a.data(), a.data() + a.numel(), t.data());
  std::copy(b.data(), b.data() + b.numel(), t.data() + a.numel());
  return t;
}

}  // namespace sharp
