#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "usar/catalog.hpp"
#include "usar/config.hpp"

namespace usar {

struct PreferencePair {
  ItemId preferred_id;
  ItemId other_id;

  bool operator==(const PreferencePair&) const = default;
};

/// Linear ranking function r(x) = w.x plus solver bookkeeping.
struct RankingModel {
  std::vector<double> weights;
  double objective_value = 0.0;
  int epochs_run = 0;
  bool converged = false;

  /// Hash of the weight bytes; identical weights give identical strings.
  std::string fingerprint() const;

  bool operator==(const RankingModel&) const = default;
};

struct RankedEntry {
  ItemId id;
  double score = 0.0;

  bool operator==(const RankedEntry&) const = default;
};

/// Descending by score, ties by ascending id.
struct RankedList {
  std::vector<RankedEntry> entries;
  int generation = 0;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  std::vector<ItemId> ids() const;
  std::vector<ItemId> top(std::size_t k) const;

  bool operator==(const RankedList&) const = default;
};

/// Sorts into RankedList order.
RankedList make_ranked_list(std::vector<RankedEntry> entries, int generation = 0);

inline constexpr std::size_t kMaxTrainingPairs = 10'000;

/// Every (ids[a], ids[b]) with a < b. Above `max_pairs` candidates a uniform
/// subset of exactly `max_pairs` is drawn with `seed`, kept in enumeration order.
std::vector<PreferencePair> derive_pairs(std::span<const ItemId> ordered_ids,
                                         std::uint64_t seed = 0,
                                         std::size_t max_pairs = kMaxTrainingPairs);

/// 0.5*|w|^2 + C * sum_pairs max(0, 1 - w.(x_pref - x_other)).
double primal_objective(const Catalog& catalog, std::span<const PreferencePair> pairs,
                        std::span<const double> weights, double tradeoff_c);

/// Called once per epoch with (epoch, objective of the model that would be
/// returned if training stopped now).
using EpochObserver = std::function<void(int, double)>;

/// Minimizes the pairwise soft-margin objective by dual coordinate descent.
/// The returned weights are the best primal iterate seen; objective_value is
/// recomputed at those weights.
RankingModel train(const Catalog& catalog, std::span<const PreferencePair> pairs,
                   const UsarConfig& cfg, const EpochObserver& observer = {});

RankedList score_items(const RankingModel& model, const Catalog& catalog,
                       std::span<const ItemId> ids, int generation = 0);

}  // namespace usar
