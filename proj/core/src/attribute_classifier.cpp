#include "usar/attribute_classifier.hpp"

#include <algorithm>
#include <cmath>

#include "usar/error.hpp"
#include "usar/logistic.hpp"

namespace usar {

bool AttributeDistribution::is_valid(double tol) const {
  if (probs.empty()) return false;
  double sum = 0.0;
  for (const double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) return false;
    sum += p;
  }
  return std::abs(sum - 1.0) <= tol;
}

AttributeDistribution normalize_scores(std::span<const double> scores) {
  AttributeDistribution out;
  out.probs.assign(scores.begin(), scores.end());
  double sum = 0.0;
  for (const double s : scores) {
    if (!(s >= 0.0)) throw Error(ErrorCode::invalid_argument, "attribute scores must be >= 0");
    sum += s;
  }
  if (out.probs.empty()) return out;
  if (sum == 0.0) {
    std::fill(out.probs.begin(), out.probs.end(), 1.0 / static_cast<double>(out.probs.size()));
    return out;
  }
  for (double& p : out.probs) p /= sum;
  return out;
}

AttributeModelBank train_bank(const Catalog& catalog, const UsarConfig& cfg) {
  cfg.validate();
  const auto& names = catalog.attribute_vocabulary();
  const std::size_t dim = catalog.dim();

  std::vector<double> rows;
  std::vector<std::size_t> labeled;
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    if (catalog.item(i).attribute_labels.empty()) continue;
    labeled.push_back(i);
    const auto f = catalog.features(i);
    rows.insert(rows.end(), f.begin(), f.end());
  }

  AttributeModelBank bank;
  bank.attribute_names = names;
  bank.dim = dim;
  bank.extractor = catalog.extractor();

  std::vector<double> labels(labeled.size());
  for (std::size_t a = 0; a < names.size(); ++a) {
    AttributeStats stats;
    for (std::size_t r = 0; r < labeled.size(); ++r) {
      const auto& item_labels = catalog.item(labeled[r]).attribute_labels;
      const bool positive =
          std::find(item_labels.begin(), item_labels.end(), names[a]) != item_labels.end();
      labels[r] = positive ? 1.0 : -1.0;
      positive ? ++stats.positives : ++stats.negatives;
    }
    if (stats.positives == 0 || stats.negatives == 0) {
      throw Error(ErrorCode::data, "attribute '" + names[a] + "' has no " +
                                       (stats.positives == 0 ? "positive" : "negative") +
                                       " training examples");
    }

    const logistic::Problem problem{dim, rows, labels, cfg.tradeoff_c};
    const auto fit = logistic::fit(problem, cfg.solver_tolerance, cfg.solver_max_epochs);
    stats.iterations = fit.iterations;
    stats.converged = fit.converged;

    std::size_t correct = 0;
    for (std::size_t r = 0; r < labeled.size(); ++r) {
      double z = fit.params[dim];
      for (std::size_t d = 0; d < dim; ++d) z += fit.params[d] * rows[r * dim + d];
      if ((z >= 0.0) == (labels[r] > 0)) ++correct;
    }
    stats.training_accuracy = static_cast<double>(correct) / static_cast<double>(labeled.size());

    bank.weights.emplace_back(fit.params.begin(), fit.params.begin() + static_cast<std::ptrdiff_t>(dim));
    bank.intercepts.push_back(fit.params[dim]);
    bank.training_stats.push_back(stats);
  }
  return bank;
}

AttributeDistribution classify(const AttributeModelBank& bank, std::span<const double> features) {
  if (features.size() != bank.dim) {
    throw Error(ErrorCode::invalid_argument,
                "feature dimension " + std::to_string(features.size()) +
                    " does not match attribute bank dimension " + std::to_string(bank.dim));
  }
  std::vector<double> scores(bank.size());
  for (std::size_t a = 0; a < bank.size(); ++a) {
    scores[a] = logistic::sigmoid(dot(bank.weights[a], features) + bank.intercepts[a]);
  }
  return normalize_scores(scores);
}

}  // namespace usar
