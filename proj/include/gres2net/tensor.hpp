#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace gres2net {

struct Shape {
  std::size_t batch = 1;
  std::size_t channels = 1;
  std::size_t time = 1;

  std::size_t size() const { return batch * channels * time; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Rank-3 array of doubles laid out row-major over (batch, channel, time).
///
/// Every activation, weight and gradient in the library is a Tensor3:
/// conv weights use (out, in, kernel), biases (1, out, 1), feature vectors
/// (batch, features, 1) and scalars (1, 1, 1).
class Tensor3 {
 public:
  Tensor3() = default;
  /// Zero-filled tensor. All extents must be positive.
  explicit Tensor3(Shape shape);
  Tensor3(Shape shape, double fill);
  /// Takes ownership of `values`; rejects a length mismatch or non-finite entries.
  Tensor3(Shape shape, std::vector<double> values);

  static Tensor3 scalar(double v) { return Tensor3({1, 1, 1}, v); }

  const Shape& shape() const { return shape_; }
  std::size_t batch() const { return shape_.batch; }
  std::size_t channels() const { return shape_.channels; }
  std::size_t time() const { return shape_.time; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  const double* data() const { return values_.data(); }
  double* data() { return values_.data(); }

  std::size_t index(std::size_t b, std::size_t c, std::size_t t) const {
    return (b * shape_.channels + c) * shape_.time + t;
  }
  double operator()(std::size_t b, std::size_t c, std::size_t t) const { return values_[index(b, c, t)]; }
  double& operator()(std::size_t b, std::size_t c, std::size_t t) { return values_[index(b, c, t)]; }

  /// Scalar value of a 1x1x1 tensor; throws ShapeError otherwise.
  double item() const;

  bool all_finite() const;
  /// Throws NonFiniteError naming `context` and the first bad index.
  void check_finite(const std::string& context) const;

  bool operator==(const Tensor3& other) const = default;

 private:
  Shape shape_{0, 0, 0};
  std::vector<double> values_;
};

enum class ElementwiseOp { add, sub, mul, tanh, sigmoid, relu };

/// Value-level elementwise op. Binary ops require `b` with an identical shape.
Tensor3 elementwise(ElementwiseOp op, const Tensor3& a, const Tensor3* b = nullptr);

/// Splits along channels into `groups` equal slices, in order.
std::vector<Tensor3> split_channels(const Tensor3& x, std::size_t groups);

/// Concatenates along channels; parts must agree on batch and time.
Tensor3 concat_channels(std::span<const Tensor3> parts);

void require_same_shape(const Tensor3& a, const Tensor3& b, const char* what);

}  // namespace gres2net
