#include "usar/logistic.hpp"

#include <algorithm>
#include <cmath>

#include "usar/error.hpp"

namespace usar::logistic {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

// log(1 + exp(-m)) without overflow.
double log_loss(double margin) {
  if (margin > 0) return std::log1p(std::exp(-margin));
  return -margin + std::log1p(std::exp(margin));
}

double row_score(const Problem& p, std::size_t i, std::span<const double> params) {
  const double* x = p.rows.data() + i * p.dim;
  double z = params[p.dim];
  for (std::size_t d = 0; d < p.dim; ++d) z += params[d] * x[d];
  return z;
}

double inner(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// H v where H = diag(1,..,1, eps) + C X~^T D X~, X~ = [X 1].
void hessian_times(const Problem& p, std::span<const double> curvature,
                   std::span<const double> v, std::span<double> out) {
  const std::size_t n = p.size();
  for (std::size_t d = 0; d < p.dim; ++d) out[d] = v[d];
  out[p.dim] = 1e-8 * v[p.dim];
  for (std::size_t i = 0; i < n; ++i) {
    const double* x = p.rows.data() + i * p.dim;
    double xv = v[p.dim];
    for (std::size_t d = 0; d < p.dim; ++d) xv += x[d] * v[d];
    const double s = p.c * curvature[i] * xv;
    for (std::size_t d = 0; d < p.dim; ++d) out[d] += s * x[d];
    out[p.dim] += s;
  }
}

}  // namespace

double objective(const Problem& p, std::span<const double> params, std::span<double> grad) {
  double reg = 0.0;
  for (std::size_t d = 0; d < p.dim; ++d) reg += params[d] * params[d];
  double loss = 0.0;
  if (!grad.empty()) {
    for (std::size_t d = 0; d < p.dim; ++d) grad[d] = params[d];
    grad[p.dim] = 0.0;
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double y = p.labels[i];
    const double margin = y * row_score(p, i, params);
    loss += log_loss(margin);
    if (!grad.empty()) {
      // d/dz log(1+exp(-y z)) = -y * sigmoid(-y z)
      const double g = -p.c * y * sigmoid(-margin);
      const double* x = p.rows.data() + i * p.dim;
      for (std::size_t d = 0; d < p.dim; ++d) grad[d] += g * x[d];
      grad[p.dim] += g;
    }
  }
  return 0.5 * reg + p.c * loss;
}

FitResult fit(const Problem& p, double tolerance, int max_iterations) {
  const std::size_t np = p.dim + 1;
  FitResult result;
  result.params.assign(np, 0.0);

  std::vector<double> grad(np), direction(np), residual(np), search(np), hs(np), trial(np);
  std::vector<double> curvature(p.size());
  double f = objective(p, result.params, grad);

  for (int iter = 1; iter <= max_iterations; ++iter) {
    result.iterations = iter;
    const double gnorm = std::sqrt(inner(grad, grad));
    if (gnorm < 1e-12) {
      result.converged = true;
      break;
    }

    for (std::size_t i = 0; i < p.size(); ++i) {
      const double s = sigmoid(row_score(p, i, result.params));
      curvature[i] = s * (1.0 - s);
    }

    // Conjugate gradient on H d = -g.
    std::fill(direction.begin(), direction.end(), 0.0);
    for (std::size_t j = 0; j < np; ++j) residual[j] = -grad[j];
    search = residual;
    double rr = inner(residual, residual);
    const double cg_tol = std::min(0.1, std::sqrt(gnorm)) * gnorm;
    for (std::size_t cg = 0; cg < 2 * np + 10 && std::sqrt(rr) > cg_tol; ++cg) {
      hessian_times(p, curvature, search, hs);
      const double curv = inner(search, hs);
      if (!(curv > 0)) break;
      const double step = rr / curv;
      for (std::size_t j = 0; j < np; ++j) {
        direction[j] += step * search[j];
        residual[j] -= step * hs[j];
      }
      const double rr_next = inner(residual, residual);
      const double beta = rr_next / rr;
      rr = rr_next;
      for (std::size_t j = 0; j < np; ++j) search[j] = residual[j] + beta * search[j];
    }
    double slope = inner(grad, direction);
    if (!(slope < 0)) {
      for (std::size_t j = 0; j < np; ++j) direction[j] = -grad[j];
      slope = -gnorm * gnorm;
    }

    double t = 1.0;
    double f_trial = f;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
      for (std::size_t j = 0; j < np; ++j) trial[j] = result.params[j] + t * direction[j];
      f_trial = objective(p, trial);
      if (f_trial <= f + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
    }
    if (!std::isfinite(f_trial)) {
      throw Error(ErrorCode::numeric,
                  "logistic solver produced a non-finite loss at iteration " + std::to_string(iter));
    }
    if (!accepted) {
      result.converged = true;  // no further descent possible at working precision
      break;
    }
    result.params = trial;
    const double rel = std::abs(f - f_trial) / std::max(std::abs(f_trial), 1e-12);
    f = objective(p, result.params, grad);
    if (rel < tolerance) {
      result.converged = true;
      break;
    }
  }
  result.objective = f;
  return result;
}

}  // namespace usar::logistic
