#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace usar::logistic {

// Binary L2-regularized logistic regression with an unregularized intercept:
//   f(w, b) = 0.5*|w|^2 + C * sum_i log(1 + exp(-y_i (w.x_i + b)))
// Parameters are packed as (w_0..w_{dim-1}, b).
struct Problem {
  std::size_t dim = 0;
  std::span<const double> rows;    // n * dim, row-major
  std::span<const double> labels;  // +1 / -1
  double c = 1.0;

  std::size_t size() const { return labels.size(); }
};

/// Objective value; writes the gradient when `grad` is non-empty.
double objective(const Problem& problem, std::span<const double> params,
                 std::span<double> grad = {});

struct FitResult {
  std::vector<double> params;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Truncated-Newton (conjugate gradient inner solve) with backtracking.
/// Stops when the relative objective change drops below `tolerance`.
FitResult fit(const Problem& problem, double tolerance, int max_iterations);

double sigmoid(double z);

}  // namespace usar::logistic
