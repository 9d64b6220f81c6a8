#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace gosr {

/// Dense row-major tensor of doubles. Conventions: images are {C,H,W},
/// batches {B,C,H,W} or {B,F}, dense weights {out,in}, conv weights
/// {out_ch,in_ch,kh,kw}.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(static_cast<std::size_t>(numel(shape)), 0.0) {}
  Tensor(std::vector<int> s, std::vector<double> d);

  static std::int64_t numel(const std::vector<int>& s);

  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
  int ndim() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  double& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }

  void fill(double v);
  void zero() { fill(0.0); }
  double sum_squares() const;
  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;

  std::string shape_str() const;  // e.g. "3x32x32"
};

std::string shape_to_string(const std::vector<int>& shape);

}  // namespace gosr
