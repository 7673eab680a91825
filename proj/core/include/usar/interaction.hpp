#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "usar/attribute_classifier.hpp"
#include "usar/catalog.hpp"
#include "usar/config.hpp"
#include "usar/rank_learner.hpp"
#include "usar/usad.hpp"

namespace usar {

// awaiting_favorites -> awaiting_feedback -> (awaiting_feedback)* -> satisfied -> finalized
// awaiting_feedback may also go straight to finalized.
enum class SessionStatus { awaiting_favorites, awaiting_feedback, satisfied, finalized };

const char* to_string(SessionStatus status) noexcept;
SessionStatus parse_session_status(const std::string& name);
bool is_allowed_transition(SessionStatus from, SessionStatus to) noexcept;

struct RerankFeedback {
  std::vector<ItemId> ordered_prefix;  // user's order of (part of) the shown top-k
  std::vector<ItemId> deletions;
  bool satisfied = false;

  bool operator==(const RerankFeedback&) const = default;
};

struct Session {
  std::string session_id;
  UsarConfig config;
  std::vector<ItemId> favorite_ids;
  int iteration = 0;
  RankedList current_ranking;
  RankingModel current_model;
  std::vector<std::string> model_history;  // fingerprints, one per training run
  SessionStatus status = SessionStatus::awaiting_favorites;
  std::optional<UserAestheticDistribution> usad;
  std::vector<ItemId> training_pool;
  std::vector<ItemId> excluded_ids;  // withheld by the caller, e.g. a test split
  std::vector<ItemId> deleted_ids;   // removed by the user, sorted

  /// The prefix currently offered for reranking.
  std::vector<ItemId> shown() const {
    return current_ranking.top(static_cast<std::size_t>(config.k));
  }

  bool operator==(const Session&) const = default;
};

struct SessionOptions {
  std::string session_id;            // generated when empty
  std::vector<ItemId> excluded_ids;  // never retrieved, trained on or ranked
};

/// Retrieves neighbors of the favorites, trains on the pool and yields the
/// generation-0 ranking.
Session start_session(const Catalog& catalog, const AttributeModelBank& bank,
                      const UsarConfig& cfg, std::vector<ItemId> favorite_ids,
                      SessionOptions options = {});

/// Applies one rerank. Identity feedback (or an explicit satisfied flag)
/// ends the loop; anything else replaces the favorites and retrains.
Session submit_feedback(const Session& session, const RerankFeedback& feedback,
                        const Catalog& catalog);

/// Builds the user's aesthetic distribution from the current ranking.
Session finalize(const Session& session, const AttributeModelBank& bank, const Catalog& catalog);

std::string generate_session_id();

// Append-only session history. Replaying the events against the same
// catalog and bank reproduces the session exactly.
struct SessionEvent {
  enum class Kind { started, feedback_submitted, finalized };

  Kind kind = Kind::started;
  std::string session_id;
  // started
  UsarConfig config;
  std::vector<ItemId> favorites;
  std::vector<ItemId> excluded_ids;
  // feedback_submitted
  RerankFeedback feedback;
  int iteration = 0;  // session iteration the feedback was given against

  static SessionEvent started(const Session& s);
  static SessionEvent feedback_submitted(const Session& before, const RerankFeedback& fb);
  static SessionEvent finalized(const Session& s);

  nlohmann::json to_json() const;
  static SessionEvent from_json(const nlohmann::json& j);
};

Session replay(std::span<const SessionEvent> events, const Catalog& catalog,
               const AttributeModelBank& bank);

void write_event_log(std::ostream& out, std::span<const SessionEvent> events);
std::vector<SessionEvent> read_event_log(std::istream& in);

}  // namespace usar
