#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lfsal/error.hpp"

namespace lfsal {

// Dense row-major array of doubles with 1 to 4 axes. Feature maps use
// (channels, height, width); weights use (out, in, kh, kw); scalars use {1}.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, double v);
  static Tensor ones(std::vector<int> shape) { return full(std::move(shape), 1.0); }
  static Tensor scalar(double v) { return full({1}, v); }
  static Tensor from(std::vector<int> shape, std::vector<double> values);

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  // (h, w) on a 2-axis tensor
  double& at(int h, int w) { return data_[static_cast<std::size_t>(h) * shape_[1] + w]; }
  double at(int h, int w) const { return data_[static_cast<std::size_t>(h) * shape_[1] + w]; }

  // (c, h, w) on a 3-axis tensor
  double& at(int c, int h, int w) {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + h) * shape_[2] + w];
  }
  double at(int c, int h, int w) const {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + h) * shape_[2] + w];
  }

  // (a, b, h, w) on a 4-axis tensor
  double& at(int a, int b, int h, int w) {
    return data_[((static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + h) * shape_[3] + w];
  }
  double at(int a, int b, int h, int w) const {
    return data_[((static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + h) * shape_[3] + w];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;
  double min() const;
  double max() const;
  double sum() const;
  double mean() const { return empty() ? 0.0 : sum() / static_cast<double>(size()); }

  void fill(double v);
  void zero() { fill(0.0); }

  // Elementwise in-place helpers for non-autodiff arithmetic.
  Tensor& operator+=(const Tensor& o);
  Tensor& operator*=(double s);

  bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

  std::string shape_string() const;

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

// Raises ShapeError naming the axes unless both shapes match.
void require_same_shape(const Tensor& a, const Tensor& b, const char* context);

// --- serialization ------------------------------------------------------
//
// A record is one JSON header line {"name","dtype","shape"} followed by the
// raw little-endian row-major payload ("f32" or "f64"). Streams hold zero or
// more records back to back.

enum class Dtype { f32, f64 };

void write_tensor_record(std::ostream& out, const std::string& name, const Tensor& t,
                         Dtype dtype = Dtype::f32);

struct TensorRecord {
  std::string name;
  Dtype dtype;
  Tensor tensor;
};

// Reads the next record, or nullopt at a clean end of stream. Truncated or
// malformed input raises IoError.
std::optional<TensorRecord> read_tensor_record(std::istream& in);

}  // namespace lfsal
