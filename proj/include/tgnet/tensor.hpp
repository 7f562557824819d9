#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <vector>

#include "tgnet/error.hpp"

namespace tgnet {

// Dense row-major tensor of doubles. Almost everything in the engine treats
// tensors as 2-D matrices; conv kernels use 4-D shapes.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> s)
      : shape(std::move(s)), data(numel(shape), 0.0) {}

  Tensor(std::initializer_list<std::size_t> s)
      : shape(s), data(numel(shape), 0.0) {}

  static std::size_t numel(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
  }

  static Tensor zeros(std::size_t r, std::size_t c) { return Tensor{r, c}; }

  static Tensor from_rows(std::size_t r, std::size_t c, std::vector<double> v) {
    Tensor t;
    t.shape = {r, c};
    if (v.size() != r * c) throw ConfigError("tensor literal size mismatch");
    t.data = std::move(v);
    return t;
  }

  std::size_t size() const { return data.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const {
    if (shape.empty()) return 0;
    std::size_t c = 1;
    for (std::size_t i = 1; i < shape.size(); ++i) c *= shape[i];
    return c;
  }

  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

}  // namespace tgnet
