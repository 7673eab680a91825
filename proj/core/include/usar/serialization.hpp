#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "usar/attribute_classifier.hpp"
#include "usar/interaction.hpp"
#include "usar/rank_learner.hpp"
#include "usar/usad.hpp"

namespace usar {

// Persistence formats:
//   model  {"weights", "objective", "epochs", "converged", "config_fingerprint"}
//   bank   {"attributes", "weights", "intercepts", ...}
//   usad   {"attributes", "probs", "generation", "item_count"}

nlohmann::json model_to_json(const RankingModel& model, const std::string& config_fingerprint);
RankingModel model_from_json(const nlohmann::json& j);

void to_json(nlohmann::json& j, const AttributeModelBank& bank);
void from_json(const nlohmann::json& j, AttributeModelBank& bank);

void to_json(nlohmann::json& j, const UserAestheticDistribution& usad);
void from_json(const nlohmann::json& j, UserAestheticDistribution& usad);

void to_json(nlohmann::json& j, const RankedList& list);
void from_json(const nlohmann::json& j, RankedList& list);

void to_json(nlohmann::json& j, const RerankFeedback& fb);
void from_json(const nlohmann::json& j, RerankFeedback& fb);

/// Client-facing projection of a session (no model weights).
nlohmann::json session_to_json(const Session& s, std::size_t ranking_limit = SIZE_MAX);

/// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

void save_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json load_json(const std::filesystem::path& path);

AttributeModelBank load_bank(const std::filesystem::path& path);
UserAestheticDistribution load_usad(const std::filesystem::path& path);

}  // namespace usar
