#pragma once

#include <optional>
#include <span>
#include <vector>

#include "usar/attribute_classifier.hpp"
#include "usar/catalog.hpp"
#include "usar/rank_learner.hpp"

namespace usar {

/// A user's taste summarized over the attribute vocabulary.
struct UserAestheticDistribution {
  std::vector<std::string> attribute_names;
  AttributeDistribution dist;
  int source_ranking_generation = 0;
  std::size_t source_item_count = 0;

  bool operator==(const UserAestheticDistribution&) const = default;
};

/// Linear-decay rank weights (C - i + 1) / (C(C+1)/2) for i = 1..C.
std::vector<double> rank_weights(std::size_t count);

/// Rank-weighted average of the attribute distributions of every ranked item.
UserAestheticDistribution build_usad(const RankedList& ranking, const AttributeModelBank& bank,
                                     const Catalog& catalog);

/// Same aggregation over precomputed per-item distributions, best first.
AttributeDistribution aggregate_distributions(std::span<const AttributeDistribution> ranked);

/// Pearson correlation; nullopt when either vector has zero variance.
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);

std::optional<double> score_against(const UserAestheticDistribution& usad,
                                    const AttributeDistribution& test_dist);

struct ScoredItem {
  ItemId id;
  double score = 0.0;          // 0 when the correlation is undefined
  bool undefined = false;
  AttributeDistribution test_dist;
};

/// Classifies and scores each test item, preserving input order.
std::vector<ScoredItem> score_test_set(const UserAestheticDistribution& usad,
                                       const AttributeModelBank& bank, const Catalog& catalog,
                                       std::span<const ItemId> test_ids);

/// R_USAR: test items by correlation with the user's distribution.
RankedList rank_test_set(const UserAestheticDistribution& usad, const AttributeModelBank& bank,
                         const Catalog& catalog, std::span<const ItemId> test_ids);

}  // namespace usar
