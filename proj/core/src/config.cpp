#include "usar/config.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "usar/error.hpp"
#include "usar/hash.hpp"

namespace usar {

const char* to_string(DistanceMetric metric) noexcept {
  return metric == DistanceMetric::cosine ? "cosine" : "euclidean";
}

DistanceMetric parse_distance_metric(const std::string& name) {
  if (name == "euclidean") return DistanceMetric::euclidean;
  if (name == "cosine") return DistanceMetric::cosine;
  throw Error(ErrorCode::invalid_argument, "unknown distance metric '" + name + "'");
}

void UsarConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::invalid_argument, msg); };
  if (m < 1) fail("m must be >= 1");
  if (k < 1) fail("k must be >= 1");
  if (max_iterations < 0) fail("max_iterations must be >= 0");
  if (neighbors_per_favorite && *neighbors_per_favorite < 0) {
    fail("neighbors_per_favorite must be >= 0");
  }
  if (!(tradeoff_c > 0.0) || !std::isfinite(tradeoff_c)) fail("tradeoff_c must be > 0");
  if (!(solver_tolerance > 0.0)) fail("solver_tolerance must be > 0");
  if (solver_max_epochs < 1) fail("solver_max_epochs must be >= 1");
}

std::string UsarConfig::fingerprint() const {
  Fnv1a h;
  h.add(m).add(k).add(max_iterations).add(fan_out());
  h.add(static_cast<int>(distance_metric)).add(tradeoff_c).add(solver_tolerance);
  h.add(solver_max_epochs).add(rng_seed);
  return h.hex();
}

void to_json(nlohmann::json& j, const UsarConfig& cfg) {
  j = nlohmann::json{
      {"m", cfg.m},
      {"k", cfg.k},
      {"max_iterations", cfg.max_iterations},
      // null means "follow m"
      {"neighbors_per_favorite",
       cfg.neighbors_per_favorite ? nlohmann::json(*cfg.neighbors_per_favorite) : nlohmann::json()},
      {"distance_metric", to_string(cfg.distance_metric)},
      {"tradeoff_c", cfg.tradeoff_c},
      {"solver_tolerance", cfg.solver_tolerance},
      {"solver_max_epochs", cfg.solver_max_epochs},
      {"rng_seed", cfg.rng_seed},
  };
}

void from_json(const nlohmann::json& j, UsarConfig& cfg) {
  UsarConfig out;
  out.m = j.value("m", out.m);
  out.k = j.value("k", out.k);
  out.max_iterations = j.value("max_iterations", out.max_iterations);
  if (j.contains("neighbors_per_favorite") && !j.at("neighbors_per_favorite").is_null()) {
    out.neighbors_per_favorite = j.at("neighbors_per_favorite").get<int>();
  }
  if (j.contains("distance_metric")) {
    out.distance_metric = parse_distance_metric(j.at("distance_metric").get<std::string>());
  }
  out.tradeoff_c = j.value("tradeoff_c", out.tradeoff_c);
  out.solver_tolerance = j.value("solver_tolerance", out.solver_tolerance);
  out.solver_max_epochs = j.value("solver_max_epochs", out.solver_max_epochs);
  out.rng_seed = j.value("rng_seed", out.rng_seed);
  cfg = out;
}

}  // namespace usar
