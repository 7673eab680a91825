#pragma once

#include <span>
#include <unordered_set>
#include <vector>

#include "usar/catalog.hpp"
#include "usar/config.hpp"

namespace usar {

struct RetrievalResult {
  ItemId favorite_id;
  std::vector<ItemId> neighbor_ids;  // nearest first
  std::vector<double> distances;     // non-decreasing, same length as neighbor_ids
};

using IdSet = std::unordered_set<ItemId>;

double distance(std::span<const double> a, std::span<const double> b, DistanceMetric metric);

/// Exact k-NN for every favorite over the catalog minus `excluded`.
/// Ties in distance are broken by ascending item id.
std::vector<RetrievalResult> retrieve_neighbors(const Catalog& catalog,
                                                std::span<const ItemId> favorite_ids,
                                                const UsarConfig& cfg,
                                                const IdSet& excluded = {});

/// Favorites (in user order) followed by neighbors in retrieval order,
/// first occurrence wins.
std::vector<ItemId> build_training_pool(std::span<const RetrievalResult> results,
                                        std::span<const ItemId> favorite_ids);

}  // namespace usar
