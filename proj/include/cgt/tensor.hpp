#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cgt/error.hpp"

namespace cgt {

struct Shape {
  int height = 0;
  int width = 0;
  int channels = 0;

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
           static_cast<std::size_t>(channels);
  }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Dense HWC tensor, row-major.
template <typename T>
class BasicTensor {
 public:
  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T(0)) : shape_(shape), data_(shape.size(), fill) {}
  BasicTensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size())
      throw ArgumentError("tensor data length " + std::to_string(data_.size()) +
                          " does not match shape " + shape_.str());
  }

  const Shape& shape() const noexcept { return shape_; }
  int height() const noexcept { return shape_.height; }
  int width() const noexcept { return shape_.width; }
  int channels() const noexcept { return shape_.channels; }
  std::size_t size() const noexcept { return data_.size(); }

  T& at(int y, int x, int c) noexcept { return data_[index(y, x, c)]; }
  const T& at(int y, int x, int c) const noexcept { return data_[index(y, x, c)]; }

  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * shape_.width + x) * shape_.channels + c;
  }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  bool all_finite() const noexcept {
    for (const T& v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool operator==(const BasicTensor&) const = default;

 private:
  Shape shape_{};
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Image = Tensor;

/// Clamps every element into [0, 1].
void clamp01(Tensor& t) noexcept;

}  // namespace cgt
