#include "supra/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace supra {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

namespace {
void validate_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one axis");
  for (auto e : shape)
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_to_string(shape));
}
}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  validate_shape(shape_);
  data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  validate_shape(shape_);
  if (data_.size() != shape_numel(shape_))
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_to_string(shape_));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor(Shape{r, c}, std::move(data));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor(Shape{values.size()}, std::vector<double>(values));
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_to_string(shape_));
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size())
    throw ShapeError("cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
  return Tensor(std::move(shape), data_);
}

Tensor Tensor::transposed() const {
  const std::size_t r = rows(), c = cols();
  Tensor out(Shape{c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.data_[j * r + i] = data_[i * c + j];
  return out;
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void require_shape(const Tensor& t, const Shape& expected, const char* what) {
  if (t.shape() != expected)
    throw ShapeError(std::string(what) + ": expected shape " + shape_to_string(expected) + ", got " +
                     shape_to_string(t.shape()));
}

void require_matrix(const Tensor& t, const char* what) {
  if (t.ndim() != 2)
    throw ShapeError(std::string(what) + ": expected a matrix, got shape " + shape_to_string(t.shape()));
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size())
    throw ShapeError("max_abs_diff: " + shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double frobenius_norm(const Tensor& t) {
  double s = 0.0;
  for (double v : t.values()) s += v * v;
  return std::sqrt(s);
}

}  // namespace supra
