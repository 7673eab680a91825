#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

namespace usar {

enum class DistanceMetric { euclidean, cosine };

const char* to_string(DistanceMetric metric) noexcept;
DistanceMetric parse_distance_metric(const std::string& name);

/// Per-session knobs. A value type; copy it freely.
struct UsarConfig {
  int m = 5;                 // number of user favorites
  int k = 5;                 // length of the reranked prefix
  int max_iterations = 3;    // interaction budget N
  std::optional<int> neighbors_per_favorite;  // retrieval fan-out, defaults to m
  DistanceMetric distance_metric = DistanceMetric::euclidean;
  double tradeoff_c = 1.0;
  double solver_tolerance = 1e-6;  // relative duality gap for the ranking solver
  int solver_max_epochs = 1000;
  std::uint64_t rng_seed = 0;

  int fan_out() const { return neighbors_per_favorite.value_or(m); }

  /// Throws Error(invalid_argument) naming the first bad field.
  void validate() const;

  /// Stable short hash of the fields that influence training.
  std::string fingerprint() const;

  bool operator==(const UsarConfig&) const = default;
};

void to_json(nlohmann::json& j, const UsarConfig& cfg);
void from_json(const nlohmann::json& j, UsarConfig& cfg);

}  // namespace usar
