#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "gres2net/tape.hpp"

namespace gres2net {

/// A scalar function of some parameters, rebuilt on a fresh tape per call.
struct GradCheckCase {
  std::string name;
  std::vector<Parameter*> params;
  std::function<Var(Tape&)> loss;
  std::shared_ptr<void> owner;  ///< keeps the parameters alive
};

struct GradCheckResult {
  std::string name;
  double max_rel_error = 0.0;
  std::string worst_param;  ///< parameter holding the largest absolute mismatch
  bool passed = false;
};

/// Compares reverse-mode gradients with central differences
/// (f(p+h) - f(p-h)) / 2h for every element of every parameter. All gradients
/// of a case form one vector; the error is
/// ||analytic - numeric|| / max(||analytic||, ||numeric||, 1e-8).
/// `corrupt` perturbs one analytic entry so the harness itself can be checked.
GradCheckResult check_gradients(const GradCheckCase& c, double step = 1e-6, double tolerance = 1e-5,
                                bool corrupt = false);

enum class GradScope { tensor, nn, res2net, train };

const char* to_string(GradScope scope);
GradScope parse_grad_scope(const std::string& text);

/// Randomly sized cases covering every differentiable op of a module.
std::vector<GradCheckCase> gradcheck_suite(GradScope scope, std::uint64_t seed);

}  // namespace gres2net
