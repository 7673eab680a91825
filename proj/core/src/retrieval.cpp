#include "usar/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "usar/error.hpp"

namespace usar {

double distance(std::span<const double> a, std::span<const double> b, DistanceMetric metric) {
  if (metric == DistanceMetric::euclidean) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a[i] - b[i];
      sum += d * d;
    }
    return std::sqrt(sum);
  }
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  // A zero vector has no direction; treat it as orthogonal to everything.
  if (aa == 0.0 || bb == 0.0) return 1.0;
  const double cos = std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
  return std::max(0.0, 1.0 - cos);
}

std::vector<RetrievalResult> retrieve_neighbors(const Catalog& catalog,
                                                std::span<const ItemId> favorite_ids,
                                                const UsarConfig& cfg,
                                                const IdSet& excluded) {
  if (catalog.size() < 2) {
    throw Error(ErrorCode::invalid_argument, "retrieval needs a catalog of at least 2 items");
  }
  std::unordered_set<ItemId> seen;
  std::vector<std::size_t> favorites;
  favorites.reserve(favorite_ids.size());
  for (const auto& id : favorite_ids) {
    const auto index = catalog.find(id);
    if (!index) throw Error(ErrorCode::not_found, "unknown favorite id '" + id + "'");
    if (!seen.insert(id).second) {
      throw Error(ErrorCode::invalid_argument, "favorite '" + id + "' listed twice");
    }
    favorites.push_back(*index);
  }

  const auto fan_out = static_cast<std::size_t>(cfg.fan_out());
  std::vector<std::pair<double, std::size_t>> scratch;
  scratch.reserve(catalog.size());

  std::vector<RetrievalResult> results;
  results.reserve(favorites.size());
  for (const std::size_t fav : favorites) {
    scratch.clear();
    const auto query = catalog.features(fav);
    for (std::size_t i = 0; i < catalog.size(); ++i) {
      if (i == fav || (!excluded.empty() && excluded.count(catalog.item(i).id))) continue;
      scratch.emplace_back(distance(query, catalog.features(i), cfg.distance_metric), i);
    }
    auto closer = [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return catalog.item(a.second).id < catalog.item(b.second).id;
    };
    const std::size_t take = std::min(fan_out, scratch.size());
    std::partial_sort(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(take),
                      scratch.end(), closer);

    RetrievalResult result;
    result.favorite_id = catalog.item(fav).id;
    result.neighbor_ids.reserve(take);
    result.distances.reserve(take);
    for (std::size_t r = 0; r < take; ++r) {
      result.neighbor_ids.push_back(catalog.item(scratch[r].second).id);
      result.distances.push_back(scratch[r].first);
    }
    results.push_back(std::move(result));
  }
  return results;
}

std::vector<ItemId> build_training_pool(std::span<const RetrievalResult> results,
                                        std::span<const ItemId> favorite_ids) {
  std::vector<ItemId> pool;
  std::unordered_set<ItemId> seen;
  auto push = [&](const ItemId& id) {
    if (seen.insert(id).second) pool.push_back(id);
  };
  for (const auto& id : favorite_ids) push(id);
  for (const auto& result : results) {
    for (const auto& id : result.neighbor_ids) push(id);
  }
  return pool;
}

}  // namespace usar
