#include "gosr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gosr {

Tensor::Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
  if (numel(shape) != static_cast<std::int64_t>(data.size()))
    throw std::invalid_argument("tensor data size does not match shape " + shape_to_string(shape));
}

std::int64_t Tensor::numel(const std::vector<int>& s) {
  std::int64_t n = 1;
  for (int d : s) {
    if (d < 0) throw std::invalid_argument("negative tensor dimension");
    n *= d;
  }
  return n;
}

void Tensor::fill(double v) { std::fill(data.begin(), data.end(), v); }

double Tensor::sum_squares() const {
  double acc = 0.0;
  for (double v : data) acc += v * v;
  return acc;
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Tensor::shape_str() const { return shape_to_string(shape); }

std::string shape_to_string(const std::vector<int>& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s.empty() ? "scalar" : s;
}

}  // namespace gosr
