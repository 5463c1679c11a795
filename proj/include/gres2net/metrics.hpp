#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gres2net {

/// Paired true and predicted values, equal length M >= 1.
struct EvalSeries {
  std::vector<double> y_true;
  std::vector<double> y_pred;

  /// Throws std::invalid_argument on a length mismatch or an empty series.
  void validate() const;
};

/// Percentage of matching labels, 100 * matches / M.
double accuracy(std::span<const int> predicted, std::span<const int> truth);

double rmse(const EvalSeries& e);
double mae(const EvalSeries& e);
/// Mean absolute percentage error in percent. Any zero target is rejected
/// with its index, since the relative error is undefined there.
double mape(const EvalSeries& e);
/// Coefficient of determination. A constant y_true is rejected.
double r_squared(const EvalSeries& e);

/// Neumaier-compensated sum; all metrics reduce through it.
class CompensatedSum {
 public:
  void add(double v);
  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

}  // namespace gres2net
