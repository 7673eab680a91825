#pragma once

#include <cstdint>

#include "usar/catalog.hpp"

namespace usar {

struct SyntheticSpec {
  std::size_t n_items = 200;
  std::size_t dim = 16;
  std::size_t n_attribute_clusters = 18;
  std::uint64_t seed = 0;
  /// Norm of every cluster center; centers point in random directions.
  double separation = 16.0;
  /// Standard deviation of the isotropic noise around each center.
  double noise = 1.0;
};

/// Items are drawn round-robin around per-attribute cluster centers and
/// labeled with the attribute of the nearest center. An attribute that wins
/// no item that way is given back the items drawn around its own center.
Catalog generate_synthetic(const SyntheticSpec& spec);

/// The corpus the CLI and service fall back to when no catalog is given.
SyntheticSpec toy_corpus_spec();
Catalog toy_corpus();

}  // namespace usar
