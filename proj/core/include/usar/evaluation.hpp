#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "usar/attribute_classifier.hpp"
#include "usar/catalog.hpp"
#include "usar/config.hpp"
#include "usar/rank_learner.hpp"
#include "usar/usad.hpp"

namespace usar {

struct RankCorrelationReport {
  double rho = 0.0;
  std::size_t n = 0;
  double d_squared_sum = 0.0;
  bool tie_adjusted = false;
};

/// Spearman rank correlation between two rankings of the same items.
/// Tie-free: 1 - 6*sum(d^2)/(n^3 - n). With tied scores in either list,
/// average ranks are used and rho is the Pearson correlation of the ranks.
RankCorrelationReport spearman_rho(const RankedList& a, const RankedList& b);

/// Fraction of unordered item pairs placed in the same relative order.
double pairwise_accuracy(const RankedList& predicted, const RankedList& truth);

/// A stand-in for a human rater: prefers items along `hidden_weights`,
/// perturbed by fixed per-item Gaussian noise of scale `noise_sigma`.
struct SimulatedUser {
  std::vector<double> hidden_weights;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  /// Utility of every catalog item, in catalog order.
  std::vector<double> utilities(const Catalog& catalog) const;
};

/// A user whose taste is one attribute of the catalog: hidden weights are
/// the mean feature vector of the items carrying a seed-chosen label. Falls
/// back to a random direction for unlabeled catalogs.
SimulatedUser sample_user(const Catalog& catalog, std::uint64_t seed, double noise_sigma = 0.0);

struct SimulationOptions {
  double test_fraction = 0.25;
};

struct SimulationResult {
  RankCorrelationReport correlation;  // R_USAR vs the user's test ordering
  double pairwise_accuracy = 0.0;
  int interactions = 0;
  bool satisfied = false;
  RankedList usar_ranking;
  RankedList oracle_ranking;
  UserAestheticDistribution usad;
};

/// Runs the full loop with the simulated user answering every rerank and
/// evaluates the finalized distribution on a held-out split.
SimulationResult simulate_session(const Catalog& catalog, const AttributeModelBank& bank,
                                  const UsarConfig& cfg, const SimulatedUser& user,
                                  const SimulationOptions& options = {});

struct SweepCell {
  int m = 0;
  int interactions = 0;
  double mean_rho = 0.0;
  double std_rho = 0.0;
  int repetitions = 0;
  bool feasible = true;
  std::vector<double> rhos;
};

struct SweepResult {
  std::vector<int> m_values;
  std::vector<int> interaction_values;
  std::vector<SweepCell> cells;  // m-major

  const SweepCell& at(int m, int interactions) const;
};

struct SweepOptions {
  double noise_sigma = 0.0;
  double test_fraction = 0.25;
  unsigned threads = 1;
};

/// One simulate_session population per (m, interactions) cell. Repetition r
/// uses the same simulated user in every cell; session seeds are derived
/// from (base seed, cell, r).
SweepResult parameter_sweep(const Catalog& catalog, const AttributeModelBank& bank,
                            const UsarConfig& base_cfg, const std::vector<int>& m_values,
                            const std::vector<int>& interaction_values, int repetitions,
                            const SweepOptions& options = {});

std::string sweep_to_csv(const SweepResult& result);
nlohmann::json sweep_to_json(const SweepResult& result);
/// Interactions down, m across.
std::string render_sweep_table(const SweepResult& result);

}  // namespace usar
