#include "usar/usad.hpp"

#include <algorithm>
#include <cmath>

#include "usar/error.hpp"

namespace usar {

std::vector<double> rank_weights(std::size_t count) {
  std::vector<double> w(count);
  const double total = static_cast<double>(count) * static_cast<double>(count + 1) / 2.0;
  for (std::size_t i = 0; i < count; ++i) {
    w[i] = static_cast<double>(count - i) / total;
  }
  return w;
}

AttributeDistribution aggregate_distributions(std::span<const AttributeDistribution> ranked) {
  if (ranked.empty()) throw Error(ErrorCode::invalid_argument, "cannot aggregate an empty ranking");
  const std::size_t width = ranked.front().size();
  const auto weights = rank_weights(ranked.size());
  AttributeDistribution out;
  out.probs.assign(width, 0.0);
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (ranked[i].size() != width) {
      throw Error(ErrorCode::invalid_argument, "attribute distributions differ in length");
    }
    for (std::size_t a = 0; a < width; ++a) out.probs[a] += weights[i] * ranked[i].probs[a];
  }
  return out;
}

UserAestheticDistribution build_usad(const RankedList& ranking, const AttributeModelBank& bank,
                                     const Catalog& catalog) {
  if (ranking.empty()) {
    throw Error(ErrorCode::invalid_argument, "cannot build a distribution from an empty ranking");
  }
  std::vector<AttributeDistribution> per_item;
  per_item.reserve(ranking.size());
  for (const auto& entry : ranking.entries) {
    per_item.push_back(classify(bank, catalog.features(catalog.index_of(entry.id))));
  }
  UserAestheticDistribution usad;
  usad.attribute_names = bank.attribute_names;
  usad.dist = aggregate_distributions(per_item);
  usad.source_ranking_generation = ranking.generation;
  usad.source_item_count = ranking.size();
  return usad;
}

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::invalid_argument, "correlation of vectors with different lengths");
  }
  const std::size_t n = a.size();
  if (n < 2) return std::nullopt;
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_a += a[i];
    mean_b += b[i];
  }
  mean_a /= static_cast<double>(n);
  mean_b /= static_cast<double>(n);
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - mean_a;
    const double db = b[i] - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a == 0.0 || var_b == 0.0) return std::nullopt;
  return std::clamp(cov / (std::sqrt(var_a) * std::sqrt(var_b)), -1.0, 1.0);
}

std::optional<double> score_against(const UserAestheticDistribution& usad,
                                    const AttributeDistribution& test_dist) {
  if (usad.dist.size() != test_dist.size()) {
    throw Error(ErrorCode::invalid_argument,
                "test distribution covers a different attribute vocabulary");
  }
  return pearson(usad.dist.probs, test_dist.probs);
}

std::vector<ScoredItem> score_test_set(const UserAestheticDistribution& usad,
                                       const AttributeModelBank& bank, const Catalog& catalog,
                                       std::span<const ItemId> test_ids) {
  std::vector<ScoredItem> out;
  out.reserve(test_ids.size());
  for (const auto& id : test_ids) {
    ScoredItem item;
    item.id = id;
    item.test_dist = classify(bank, catalog.features(catalog.index_of(id)));
    const auto s = score_against(usad, item.test_dist);
    item.undefined = !s.has_value();
    item.score = s.value_or(0.0);
    out.push_back(std::move(item));
  }
  return out;
}

RankedList rank_test_set(const UserAestheticDistribution& usad, const AttributeModelBank& bank,
                         const Catalog& catalog, std::span<const ItemId> test_ids) {
  std::vector<RankedEntry> entries;
  entries.reserve(test_ids.size());
  for (auto& scored : score_test_set(usad, bank, catalog, test_ids)) {
    entries.push_back({std::move(scored.id), scored.score});
  }
  return make_ranked_list(std::move(entries));
}

}  // namespace usar
