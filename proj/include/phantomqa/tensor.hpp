#pragma once

#include <cassert>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace phantomqa {

// Training precision. Gradient checks instantiate the same op templates with
// double instead.
using real_t = float;

template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;

  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(static_cast<std::size_t>(count(shape)), T{});
  }

  Tensor(std::vector<int> s, std::vector<T> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (static_cast<std::int64_t>(data.size()) != count(shape)) {
      throw std::invalid_argument("tensor data length does not match shape");
    }
  }

  static std::int64_t count(const std::vector<int>& s) {
    std::int64_t n = 1;
    for (int d : s) {
      if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive");
      n *= d;
    }
    return n;
  }

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

  static Tensor full(std::vector<int> s, T v) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  T& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
  const T& operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }

  T& at(int i) { return data[static_cast<std::size_t>(i)]; }
  T& at(int i, int j) { return data[static_cast<std::size_t>(i) * shape[1] + j]; }
  T& at(int i, int j, int k) {
    return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
  }
  T& at(int i, int j, int k, int l) {
    return data[((static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
  }
  const T& at(int i) const { return data[static_cast<std::size_t>(i)]; }
  const T& at(int i, int j) const { return data[static_cast<std::size_t>(i) * shape[1] + j]; }
  const T& at(int i, int j, int k) const {
    return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
  }
  const T& at(int i, int j, int k, int l) const {
    return data[((static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
  }

  Tensor reshaped(std::vector<int> s) const {
    if (count(s) != numel()) throw std::invalid_argument("reshape element count mismatch");
    return Tensor(std::move(s), data);
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  std::string shape_str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) os << ',';
      os << shape[i];
    }
    os << ']';
    return os.str();
  }
};

using TensorF = Tensor<real_t>;
using TensorD = Tensor<double>;
using TensorU8 = Tensor<std::uint8_t>;
using TensorI16 = Tensor<std::int16_t>;

}  // namespace phantomqa
