#include "tdt/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "tdt/errors.hpp"

namespace tdt {

int64_t shape_product(const std::vector<int64_t>& shape) {
  int64_t p = 1;
  for (int64_t d : shape) p *= d;
  return p;
}

std::string shape_to_string(const std::vector<int64_t>& shape) {
  if (shape.empty()) return "[scalar]";
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

static void check_dims(const std::vector<int64_t>& shape) {
  for (int64_t d : shape) {
    if (d <= 0) {
      throw ShapeError("tensor shape must have positive dims, got " + shape_to_string(shape));
    }
  }
}

Tensor::Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
  check_dims(shape_);
  data_.assign(static_cast<size_t>(shape_product(shape_)), 0.0);
}

Tensor::Tensor(std::vector<int64_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_dims(shape_);
  if (shape_product(shape_) != static_cast<int64_t>(data_.size())) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_to_string(shape_));
  }
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::from_external(std::vector<int64_t> shape, std::vector<double> data) {
  Tensor t(std::move(shape), std::move(data));
  if (!t.all_finite()) {
    throw FormatError("external tensor " + t.shape_str() + " contains non-finite entries");
  }
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_str() const { return shape_to_string(shape_); }

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("max_abs_diff: shapes differ: " + a.shape_str() + " vs " + b.shape_str());
  }
  double m = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) {
    double d = std::fabs(a[i] - b[i]);
    if (d > m) m = d;
  }
  return m;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return false;
  return std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<size_t>(a.size())) == 0;
}

}  // namespace tdt
