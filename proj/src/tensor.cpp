#include "gres2net/tensor.hpp"

#include <cmath>

#include <fmt/format.h>

#include "gres2net/error.hpp"

namespace gres2net {

std::string Shape::str() const { return fmt::format("{}x{}x{}", batch, channels, time); }

namespace {

void require_positive(const Shape& shape) {
  if (shape.batch == 0 || shape.channels == 0 || shape.time == 0) {
    throw ShapeError(fmt::format("tensor extents must be positive, got {}", shape.str()));
  }
}

double sigmoid(double v) {
  // Split by sign so exp never overflows.
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

Tensor3::Tensor3(Shape shape) : Tensor3(shape, 0.0) {}

Tensor3::Tensor3(Shape shape, double fill) : shape_(shape) {
  require_positive(shape_);
  values_.assign(shape_.size(), fill);
}

Tensor3::Tensor3(Shape shape, std::vector<double> values) : shape_(shape), values_(std::move(values)) {
  require_positive(shape_);
  if (values_.size() != shape_.size()) {
    throw ShapeError(fmt::format("tensor of shape {} needs {} values, got {}", shape_.str(), shape_.size(),
                                 values_.size()));
  }
  check_finite("tensor construction");
}

double Tensor3::item() const {
  if (shape_ != Shape{1, 1, 1}) throw ShapeError(fmt::format("item() on non-scalar tensor {}", shape_.str()));
  return values_[0];
}

bool Tensor3::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor3::check_finite(const std::string& context) const {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw NonFiniteError(fmt::format("{}: non-finite value {} at flat index {} of {} tensor", context, values_[i], i,
                                       shape_.str()));
    }
  }
}

void require_same_shape(const Tensor3& a, const Tensor3& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(fmt::format("{}: shape mismatch {} vs {}", what, a.shape().str(), b.shape().str()));
  }
}

Tensor3 elementwise(ElementwiseOp op, const Tensor3& a, const Tensor3* b) {
  const bool binary = op == ElementwiseOp::add || op == ElementwiseOp::sub || op == ElementwiseOp::mul;
  if (binary) {
    if (b == nullptr) throw ShapeError("binary elementwise op needs a second operand");
    require_same_shape(a, *b, "elementwise");
  }
  Tensor3 out(a.shape());
  const auto x = a.values();
  auto y = out.values();
  switch (op) {
    case ElementwiseOp::add:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + b->values()[i];
      break;
    case ElementwiseOp::sub:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] - b->values()[i];
      break;
    case ElementwiseOp::mul:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * b->values()[i];
      break;
    case ElementwiseOp::tanh:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
      break;
    case ElementwiseOp::sigmoid:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigmoid(x[i]);
      break;
    case ElementwiseOp::relu:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0 ? x[i] : 0.0;
      break;
  }
  return out;
}

std::vector<Tensor3> split_channels(const Tensor3& x, std::size_t groups) {
  if (groups == 0 || x.channels() % groups != 0) {
    throw ShapeError(fmt::format("cannot split {} channels into {} equal groups", x.channels(), groups));
  }
  const std::size_t width = x.channels() / groups;
  const std::size_t span = width * x.time();
  std::vector<Tensor3> parts;
  parts.reserve(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    Tensor3 part({x.batch(), width, x.time()});
    for (std::size_t b = 0; b < x.batch(); ++b) {
      const double* src = x.data() + x.index(b, g * width, 0);
      std::copy(src, src + span, part.data() + part.index(b, 0, 0));
    }
    parts.push_back(std::move(part));
  }
  return parts;
}

Tensor3 concat_channels(std::span<const Tensor3> parts) {
  if (parts.empty()) throw ShapeError("concat_channels needs at least one part");
  const std::size_t batch = parts[0].batch();
  const std::size_t time = parts[0].time();
  std::size_t channels = 0;
  for (const auto& p : parts) {
    if (p.batch() != batch || p.time() != time) {
      throw ShapeError(fmt::format("concat_channels: part {} does not match batch/time of {}", p.shape().str(),
                                   parts[0].shape().str()));
    }
    channels += p.channels();
  }
  Tensor3 out({batch, channels, time});
  for (std::size_t b = 0; b < batch; ++b) {
    double* dst = out.data() + out.index(b, 0, 0);
    for (const auto& p : parts) {
      const std::size_t span = p.channels() * time;
      const double* src = p.data() + p.index(b, 0, 0);
      dst = std::copy(src, src + span, dst);
    }
  }
  return out;
}

}  // namespace gres2net
