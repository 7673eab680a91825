#pragma once

#include <span>
#include <string>
#include <vector>

#include "usar/catalog.hpp"
#include "usar/config.hpp"

namespace usar {

/// Nonnegative weights over an attribute vocabulary summing to 1.
struct AttributeDistribution {
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
  /// Every component >= 0 and the sum within `tol` of 1.
  bool is_valid(double tol = 1e-9) const;

  bool operator==(const AttributeDistribution&) const = default;
};

/// Divides nonnegative scores by their sum; all-zero input yields uniform.
AttributeDistribution normalize_scores(std::span<const double> scores);

struct AttributeStats {
  std::size_t positives = 0;
  std::size_t negatives = 0;
  double training_accuracy = 0.0;
  int iterations = 0;
  bool converged = false;

  bool operator==(const AttributeStats&) const = default;
};

/// One-vs-all logistic classifiers, one per attribute.
struct AttributeModelBank {
  std::vector<std::string> attribute_names;
  std::size_t dim = 0;
  std::vector<std::vector<double>> weights;  // [attribute][feature]
  std::vector<double> intercepts;
  std::vector<AttributeStats> training_stats;
  std::string extractor;

  std::size_t size() const { return attribute_names.size(); }

  bool operator==(const AttributeModelBank&) const = default;
};

/// Bank trade-off used by the tools when none is given.
inline constexpr double kDefaultBankTradeoffC = 0.1;

/// Fits one binary classifier per catalog attribute. Items without any
/// label are left out; every attribute needs a positive and a negative.
/// Regularization strength is 1 / cfg.tradeoff_c.
AttributeModelBank train_bank(const Catalog& catalog, const UsarConfig& cfg);

/// sigmoid(w_a.x + b_a) per attribute, normalized by the sum.
AttributeDistribution classify(const AttributeModelBank& bank, std::span<const double> features);

}  // namespace usar
