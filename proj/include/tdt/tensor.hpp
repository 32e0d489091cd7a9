#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tdt {

// Dense n-dimensional array of 64-bit floats, row-major.
// Rank 0 denotes a scalar (size 1).
class Tensor {
 public:
  Tensor() = default;
  // Zero-filled tensor of the given shape. Dims must be positive.
  explicit Tensor(std::vector<int64_t> shape);
  Tensor(std::vector<int64_t> shape, std::vector<double> data);

  static Tensor scalar(double v);
  // Construction path for values arriving from outside the process
  // (checkpoints, corpora): rejects NaN/Inf entries.
  static Tensor from_external(std::vector<int64_t> shape, std::vector<double> data);

  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  int64_t dim(int64_t i) const { return shape_[static_cast<size_t>(i)]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // Row-major 2-d access; no bounds check beyond the vector's.
  double& at(int64_t r, int64_t c) { return data_[static_cast<size_t>(r * dim(1) + c)]; }
  double at(int64_t r, int64_t c) const { return data_[static_cast<size_t>(r * dim(1) + c)]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  std::string shape_str() const;  // "[4x3]", "[scalar]"

  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

 private:
  std::vector<int64_t> shape_;
  std::vector<double> data_;
};

int64_t shape_product(const std::vector<int64_t>& shape);
std::string shape_to_string(const std::vector<int64_t>& shape);

// Elementwise |a-b| max; shapes must agree.
double max_abs_diff(const Tensor& a, const Tensor& b);
bool bit_equal(const Tensor& a, const Tensor& b);

}  // namespace tdt
