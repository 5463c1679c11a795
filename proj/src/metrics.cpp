#include "gres2net/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace gres2net {

void CompensatedSum::add(double v) {
  const double t = sum_ + v;
  if (std::abs(sum_) >= std::abs(v)) {
    compensation_ += (sum_ - t) + v;
  } else {
    compensation_ += (v - t) + sum_;
  }
  sum_ = t;
}

void EvalSeries::validate() const {
  if (y_true.size() != y_pred.size()) {
    throw std::invalid_argument(
        fmt::format("series length mismatch: {} true vs {} predicted", y_true.size(), y_pred.size()));
  }
  if (y_true.empty()) throw std::invalid_argument("metrics need at least one sample");
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) {
    throw std::invalid_argument(
        fmt::format("label length mismatch: {} predicted vs {} true", predicted.size(), truth.size()));
  }
  if (truth.empty()) throw std::invalid_argument("accuracy needs at least one sample");
  std::size_t matches = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) matches += predicted[i] == truth[i] ? 1 : 0;
  return 100.0 * static_cast<double>(matches) / static_cast<double>(truth.size());
}

double rmse(const EvalSeries& e) {
  e.validate();
  CompensatedSum acc;
  for (std::size_t i = 0; i < e.y_true.size(); ++i) {
    const double d = e.y_true[i] - e.y_pred[i];
    acc.add(d * d);
  }
  return std::sqrt(acc.value() / static_cast<double>(e.y_true.size()));
}

double mae(const EvalSeries& e) {
  e.validate();
  CompensatedSum acc;
  for (std::size_t i = 0; i < e.y_true.size(); ++i) acc.add(std::abs(e.y_true[i] - e.y_pred[i]));
  return acc.value() / static_cast<double>(e.y_true.size());
}

double mape(const EvalSeries& e) {
  e.validate();
  CompensatedSum acc;
  for (std::size_t i = 0; i < e.y_true.size(); ++i) {
    if (e.y_true[i] == 0.0) throw std::invalid_argument(fmt::format("MAPE undefined: y_true[{}] is zero", i));
    acc.add(std::abs((e.y_true[i] - e.y_pred[i]) / e.y_true[i]));
  }
  return 100.0 * acc.value() / static_cast<double>(e.y_true.size());
}

double r_squared(const EvalSeries& e) {
  e.validate();
  CompensatedSum mean_acc;
  for (double y : e.y_true) mean_acc.add(y);
  const double mean = mean_acc.value() / static_cast<double>(e.y_true.size());
  CompensatedSum residual, total;
  for (std::size_t i = 0; i < e.y_true.size(); ++i) {
    const double r = e.y_true[i] - e.y_pred[i];
    const double d = e.y_true[i] - mean;
    residual.add(r * r);
    total.add(d * d);
  }
  if (total.value() == 0.0) throw std::invalid_argument("R^2 undefined: y_true is constant");
  return 1.0 - residual.value() / total.value();
}

}  // namespace gres2net
