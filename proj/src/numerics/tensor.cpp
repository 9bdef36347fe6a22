#include "mergan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mergan {

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

ShapeError::ShapeError(const std::string& op, const Shape& lhs, const Shape& rhs)
    : std::invalid_argument(op + ": incompatible shapes " + to_string(lhs) + " and " +
                            to_string(rhs)) {}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), values_(element_count(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(values.begin(), values.end()) {
  if (values_.size() != element_count(shape_)) {
    throw ShapeError("tensor of shape " + to_string(shape_) + " given " +
                     std::to_string(values_.size()) + " values");
  }
}

double Tensor::item() const {
  if (values_.size() != 1) {
    throw ShapeError("item() on tensor of shape " + to_string(shape_));
  }
  return values_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (element_count(shape) != size()) throw ShapeError("reshape", shape_, shape);
  Tensor out;
  out.shape_ = std::move(shape);
  out.values_ = values_;
  return out;
}

Tensor Tensor::rows_slice(std::size_t begin, std::size_t count) const {
  if (begin + count > rows()) {
    throw ShapeError("rows_slice [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") of " + to_string(shape_));
  }
  Shape shape = shape_.empty() ? Shape{1} : shape_;
  shape[0] = count;
  const std::size_t c = cols();
  return Tensor(std::move(shape), std::vector<double>(values_.begin() + static_cast<std::ptrdiff_t>(begin * c),
                                                      values_.begin() + static_cast<std::ptrdiff_t>((begin + count) * c)));
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::max_abs() const noexcept {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_rows of zero tensors");
  Shape shape = parts[0].shape();
  if (shape.empty()) shape = {1};
  std::size_t total = 0;
  std::vector<double> values;
  for (const Tensor& p : parts) {
    Shape s = p.shape().empty() ? Shape{1} : p.shape();
    if (!std::equal(s.begin() + 1, s.end(), shape.begin() + 1, shape.end())) {
      throw ShapeError("concat_rows", shape, s);
    }
    total += s[0];
    values.insert(values.end(), p.values().begin(), p.values().end());
  }
  shape[0] = total;
  return Tensor(std::move(shape), std::move(values));
}

}  // namespace mergan
