#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace supra {

using Shape = std::vector<std::size_t>;

/// Raised when operand extents do not line up. The message carries both shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// Dense row-major array of doubles.
///
/// Every extent is positive and `data().size()` always equals the product of
/// the extents. Scalars are represented with shape `{1}`.
class Tensor {
 public:
  Tensor() : shape_{1}, data_(1, 0.0) {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor(Shape{1}, std::vector<double>{v}); }
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::initializer_list<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t ndim() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

  // 2-D helpers; a 1-D tensor is treated as a single row.
  std::size_t rows() const noexcept { return shape_.size() >= 2 ? shape_[0] : 1; }
  std::size_t cols() const noexcept { return shape_.back(); }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }
  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }
  void fill(double v) noexcept { std::fill(data_.begin(), data_.end(), v); }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols() + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols() + j]; }

  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols(), cols()}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols(), cols()};
  }

  double item() const;
  Tensor reshaped(Shape shape) const;
  Tensor transposed() const;
  bool all_finite() const noexcept;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Throws ShapeError naming `what` unless `t` is 2-D with the given extents.
void require_shape(const Tensor& t, const Shape& expected, const char* what);
void require_matrix(const Tensor& t, const char* what);

double max_abs_diff(const Tensor& a, const Tensor& b);
double frobenius_norm(const Tensor& t);

}  // namespace supra
