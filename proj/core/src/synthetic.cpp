#include "usar/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "usar/error.hpp"
#include "usar/hash.hpp"

namespace usar {

Catalog generate_synthetic(const SyntheticSpec& spec) {
  const std::size_t k = spec.n_attribute_clusters;
  if (k < 2) throw Error(ErrorCode::invalid_argument, "need at least 2 attribute clusters");
  if (spec.dim < 2) throw Error(ErrorCode::invalid_argument, "dim must be >= 2");
  if (spec.n_items < 2 * k) {
    throw Error(ErrorCode::invalid_argument,
                "n_items (" + std::to_string(spec.n_items) + ") must be at least twice n_attribute_clusters (" +
                    std::to_string(k) + ")");
  }
  if (!(spec.separation > 0.0) || !(spec.noise >= 0.0) || !std::isfinite(spec.separation) ||
      !std::isfinite(spec.noise)) {
    throw Error(ErrorCode::invalid_argument, "separation must be positive and noise non-negative");
  }

  std::vector<std::string> names;
  const auto& defaults = default_attribute_vocabulary();
  for (std::size_t a = 0; a < k; ++a) {
    names.push_back(k <= defaults.size() ? defaults[a] : "attribute-" + std::to_string(a));
  }

  std::mt19937_64 rng(mix_seed(spec.seed, 0x73796e7468ULL));
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<std::vector<double>> centers(k, std::vector<double>(spec.dim));
  for (auto& c : centers) {
    double norm = 0.0;
    do {
      norm = 0.0;
      for (double& v : c) {
        v = gauss(rng);
        norm += v * v;
      }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (double& v : c) v *= spec.separation / norm;
  }

  std::vector<ItemRecord> items(spec.n_items);
  std::vector<std::size_t> nearest(spec.n_items);
  std::vector<std::size_t> count(k, 0);
  for (std::size_t i = 0; i < spec.n_items; ++i) {
    const auto& center = centers[i % k];
    auto& item = items[i];
    char id[32];
    std::snprintf(id, sizeof id, "syn-%04zu", i);
    item.id = id;
    item.features.resize(spec.dim);
    for (std::size_t d = 0; d < spec.dim; ++d) item.features[d] = center[d] + spec.noise * gauss(rng);

    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < k; ++a) {
      double d2 = 0.0;
      for (std::size_t d = 0; d < spec.dim; ++d) {
        const double diff = item.features[d] - centers[a][d];
        d2 += diff * diff;
      }
      if (d2 < best) {
        best = d2;
        nearest[i] = a;
      }
    }
    ++count[nearest[i]];
  }

  // Attributes that won no item by proximity take back their own draws.
  // Relabeled items never move again, so this terminates.
  std::vector<std::size_t> label = nearest;
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t a = 0; a < k; ++a) {
      if (count[a] != 0) continue;
      for (std::size_t i = a; i < spec.n_items; i += k) {
        --count[label[i]];
        label[i] = a;
        ++count[a];
      }
      changed = true;
    }
  }
  for (std::size_t i = 0; i < spec.n_items; ++i) items[i].attribute_labels.push_back(names[label[i]]);
  return Catalog::validate(std::move(items), names, "synthetic");
}

SyntheticSpec toy_corpus_spec() {
  SyntheticSpec spec;
  spec.n_items = 240;
  spec.dim = 16;
  spec.n_attribute_clusters = 18;
  spec.seed = 20180807;
  return spec;
}

Catalog toy_corpus() { return generate_synthetic(toy_corpus_spec()); }

}  // namespace usar
