#include "usar/rank_learner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_set>

#include "usar/error.hpp"
#include "usar/hash.hpp"

namespace usar {

std::string RankingModel::fingerprint() const {
  return Fnv1a{}.add(std::span<const double>(weights)).hex();
}

std::vector<ItemId> RankedList::ids() const {
  std::vector<ItemId> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.id);
  return out;
}

std::vector<ItemId> RankedList::top(std::size_t k) const {
  std::vector<ItemId> out;
  for (std::size_t i = 0; i < std::min(k, entries.size()); ++i) out.push_back(entries[i].id);
  return out;
}

RankedList make_ranked_list(std::vector<RankedEntry> entries, int generation) {
  std::sort(entries.begin(), entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  return RankedList{std::move(entries), generation};
}

std::vector<PreferencePair> derive_pairs(std::span<const ItemId> ordered_ids, std::uint64_t seed,
                                         std::size_t max_pairs) {
  const std::size_t n = ordered_ids.size();
  if (n < 2) {
    throw Error(ErrorCode::invalid_argument, "need at least 2 ordered items to derive pairs");
  }
  const std::uint64_t total = static_cast<std::uint64_t>(n) * (n - 1) / 2;

  std::vector<PreferencePair> pairs;
  if (total <= max_pairs) {
    pairs.reserve(total);
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) pairs.push_back({ordered_ids[a], ordered_ids[b]});
    }
    return pairs;
  }

  // Floyd's algorithm: max_pairs distinct linear pair indices in [0, total).
  std::mt19937_64 rng(mix_seed(seed, 0x7061697273ULL));
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(max_pairs * 2);
  for (std::uint64_t j = total - max_pairs; j < total; ++j) {
    std::uniform_int_distribution<std::uint64_t> pick(0, j);
    const std::uint64_t t = pick(rng);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  std::vector<std::uint64_t> linear(chosen.begin(), chosen.end());
  std::sort(linear.begin(), linear.end());

  pairs.reserve(max_pairs);
  std::size_t a = 0;
  std::uint64_t row_start = 0;  // linear index of (a, a+1)
  for (const std::uint64_t t : linear) {
    while (t >= row_start + (n - 1 - a)) {
      row_start += n - 1 - a;
      ++a;
    }
    const std::size_t b = a + 1 + static_cast<std::size_t>(t - row_start);
    pairs.push_back({ordered_ids[a], ordered_ids[b]});
  }
  return pairs;
}

namespace {

// Row-major matrix of pair feature differences x_pref - x_other.
struct PairDiffs {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<double> data;

  std::span<const double> row(std::size_t p) const { return {data.data() + p * dim, dim}; }
};

PairDiffs build_diffs(const Catalog& catalog, std::span<const PreferencePair> pairs) {
  PairDiffs diffs;
  diffs.rows = pairs.size();
  diffs.dim = catalog.dim();
  diffs.data.resize(diffs.rows * diffs.dim);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    if (pairs[p].preferred_id == pairs[p].other_id) {
      throw Error(ErrorCode::invalid_argument,
                  "pair compares item '" + pairs[p].preferred_id + "' with itself");
    }
    const auto a = catalog.features(catalog.index_of(pairs[p].preferred_id));
    const auto b = catalog.features(catalog.index_of(pairs[p].other_id));
    double* out = diffs.data.data() + p * diffs.dim;
    for (std::size_t d = 0; d < diffs.dim; ++d) out[d] = a[d] - b[d];
  }
  return diffs;
}

double objective_on(const PairDiffs& diffs, std::span<const double> w, double c) {
  double loss = 0.0;
  for (std::size_t p = 0; p < diffs.rows; ++p) {
    loss += std::max(0.0, 1.0 - dot(w, diffs.row(p)));
  }
  return 0.5 * dot(w, w) + c * loss;
}

}  // namespace

double primal_objective(const Catalog& catalog, std::span<const PreferencePair> pairs,
                        std::span<const double> weights, double tradeoff_c) {
  if (weights.size() != catalog.dim()) {
    throw Error(ErrorCode::invalid_argument, "weight dimension does not match catalog");
  }
  return objective_on(build_diffs(catalog, pairs), weights, tradeoff_c);
}

RankingModel train(const Catalog& catalog, std::span<const PreferencePair> pairs,
                   const UsarConfig& cfg, const EpochObserver& observer) {
  cfg.validate();
  if (pairs.empty()) throw Error(ErrorCode::invalid_argument, "cannot train on zero pairs");

  const PairDiffs diffs = build_diffs(catalog, pairs);
  const double c = cfg.tradeoff_c;
  const std::size_t dim = diffs.dim;

  std::vector<double> sq_norm(diffs.rows);
  for (std::size_t p = 0; p < diffs.rows; ++p) sq_norm[p] = dot(diffs.row(p), diffs.row(p));

  std::vector<double> alpha(diffs.rows, 0.0);
  std::vector<double> w(dim, 0.0);
  std::vector<std::size_t> order(diffs.rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(mix_seed(cfg.rng_seed, 0x72616e6bULL));

  std::vector<double> best_w = w;
  double best_obj = objective_on(diffs, w, c);

  RankingModel model;
  for (int epoch = 1; epoch <= cfg.solver_max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (const std::size_t p : order) {
      if (sq_norm[p] == 0.0) {
        // Indistinguishable items: the hinge is constant, only the slack moves.
        alpha[p] = c;
        continue;
      }
      const auto z = diffs.row(p);
      const double grad = dot(w, z) - 1.0;
      const double next = std::clamp(alpha[p] - grad / sq_norm[p], 0.0, c);
      const double delta = next - alpha[p];
      if (delta != 0.0) {
        for (std::size_t d = 0; d < dim; ++d) w[d] += delta * z[d];
        alpha[p] = next;
      }
    }

    const double obj = objective_on(diffs, w, c);
    if (!std::isfinite(obj)) {
      throw Error(ErrorCode::numeric,
                  "ranking solver diverged at epoch " + std::to_string(epoch));
    }
    if (obj < best_obj) {
      best_obj = obj;
      best_w = w;
    }
    model.epochs_run = epoch;
    if (observer) observer(epoch, best_obj);

    // Dual value sum(alpha) - |w|^2/2 lower-bounds the optimum, so the gap
    // certifies relative accuracy. Primal progress alone can stall while
    // the dual is still moving (contradictory pairs, large C).
    const double dual = std::accumulate(alpha.begin(), alpha.end(), 0.0) - 0.5 * dot(w, w);
    if (best_obj - dual <= cfg.solver_tolerance * best_obj) {
      model.converged = true;
      break;
    }
  }

  model.weights = std::move(best_w);
  model.objective_value = objective_on(diffs, model.weights, c);
  return model;
}

RankedList score_items(const RankingModel& model, const Catalog& catalog,
                       std::span<const ItemId> ids, int generation) {
  if (model.weights.size() != catalog.dim()) {
    throw Error(ErrorCode::invalid_argument, "model dimension does not match catalog");
  }
  std::vector<RankedEntry> entries;
  entries.reserve(ids.size());
  for (const auto& id : ids) {
    entries.push_back({id, dot(model.weights, catalog.features(catalog.index_of(id)))});
  }
  return make_ranked_list(std::move(entries), generation);
}

}  // namespace usar
