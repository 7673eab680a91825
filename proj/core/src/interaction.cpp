#include "usar/interaction.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <istream>
#include <ostream>
#include <random>
#include <unordered_set>

#include "usar/error.hpp"
#include "usar/hash.hpp"
#include "usar/retrieval.hpp"

namespace usar {

const char* to_string(SessionStatus status) noexcept {
  switch (status) {
    case SessionStatus::awaiting_favorites: return "awaiting_favorites";
    case SessionStatus::awaiting_feedback: return "awaiting_feedback";
    case SessionStatus::satisfied: return "satisfied";
    case SessionStatus::finalized: return "finalized";
  }
  return "unknown";
}

SessionStatus parse_session_status(const std::string& name) {
  for (auto s : {SessionStatus::awaiting_favorites, SessionStatus::awaiting_feedback,
                 SessionStatus::satisfied, SessionStatus::finalized}) {
    if (name == to_string(s)) return s;
  }
  throw Error(ErrorCode::data, "unknown session status '" + name + "'");
}

bool is_allowed_transition(SessionStatus from, SessionStatus to) noexcept {
  using S = SessionStatus;
  switch (from) {
    case S::awaiting_favorites: return to == S::awaiting_feedback;
    case S::awaiting_feedback:
      return to == S::awaiting_feedback || to == S::satisfied || to == S::finalized;
    case S::satisfied: return to == S::finalized;
    case S::finalized: return false;
  }
  return false;
}

std::string generate_session_id() {
  static std::atomic<std::uint64_t> counter{0};
  static const std::uint64_t salt = [] {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd() ^
           static_cast<std::uint64_t>(
               std::chrono::steady_clock::now().time_since_epoch().count());
  }();
  Fnv1a h;
  h.add(mix_seed(salt, counter.fetch_add(1)));
  return "s-" + h.hex();
}

namespace {

void transition(Session& s, SessionStatus to) {
  if (!is_allowed_transition(s.status, to)) {
    throw Error(ErrorCode::conflict, std::string("session cannot move from ") +
                                         to_string(s.status) + " to " + to_string(to));
  }
  s.status = to;
}

// retrieve -> pool -> pairs -> train -> score, for the session's current favorites.
void run_pipeline(Session& s, const Catalog& catalog) {
  IdSet blocked(s.excluded_ids.begin(), s.excluded_ids.end());
  blocked.insert(s.deleted_ids.begin(), s.deleted_ids.end());

  const auto results = retrieve_neighbors(catalog, s.favorite_ids, s.config, blocked);
  s.training_pool = build_training_pool(results, s.favorite_ids);
  if (s.training_pool.size() < 2) {
    throw Error(ErrorCode::invalid_argument,
                "training pool has fewer than 2 items; increase neighbors_per_favorite");
  }

  const auto generation_seed = mix_seed(s.config.rng_seed, static_cast<std::uint64_t>(s.iteration));
  const auto pairs = derive_pairs(s.training_pool, generation_seed);
  UsarConfig train_cfg = s.config;
  train_cfg.rng_seed = generation_seed;
  s.current_model = train(catalog, pairs, train_cfg);
  s.model_history.push_back(s.current_model.fingerprint());
  s.current_ranking = score_items(s.current_model, catalog, s.training_pool, s.iteration);
}

std::vector<ItemId> sorted_unique(std::vector<ItemId> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

}  // namespace

Session start_session(const Catalog& catalog, const AttributeModelBank& bank,
                      const UsarConfig& cfg, std::vector<ItemId> favorite_ids,
                      SessionOptions options) {
  cfg.validate();
  if (favorite_ids.size() != static_cast<std::size_t>(cfg.m)) {
    throw Error(ErrorCode::invalid_argument,
                "expected exactly m = " + std::to_string(cfg.m) + " favorites, got " +
                    std::to_string(favorite_ids.size()));
  }
  if (bank.dim != catalog.dim()) {
    throw Error(ErrorCode::invalid_argument, "attribute bank dimension does not match catalog");
  }
  if (!bank.extractor.empty() && !catalog.extractor().empty() &&
      bank.extractor != catalog.extractor()) {
    throw Error(ErrorCode::invalid_argument, "attribute bank was trained on '" + bank.extractor +
                                                 "' features but the catalog holds '" +
                                                 catalog.extractor() + "' features");
  }
  const std::unordered_set<ItemId> excluded(options.excluded_ids.begin(),
                                            options.excluded_ids.end());
  for (const auto& id : favorite_ids) {
    if (!catalog.contains(id)) throw Error(ErrorCode::not_found, "unknown favorite id '" + id + "'");
    if (excluded.count(id)) {
      throw Error(ErrorCode::invalid_argument, "favorite '" + id + "' is in the excluded set");
    }
  }

  Session s;
  s.session_id = options.session_id.empty() ? generate_session_id() : options.session_id;
  s.config = cfg;
  s.favorite_ids = std::move(favorite_ids);
  s.excluded_ids = sorted_unique(std::move(options.excluded_ids));
  run_pipeline(s, catalog);
  transition(s, SessionStatus::awaiting_feedback);
  return s;
}

Session submit_feedback(const Session& session, const RerankFeedback& feedback,
                        const Catalog& catalog) {
  if (session.status != SessionStatus::awaiting_feedback) {
    throw Error(ErrorCode::conflict, std::string("cannot submit feedback to a session that is ") +
                                         to_string(session.status));
  }
  if (session.iteration >= session.config.max_iterations) {
    throw Error(ErrorCode::conflict, "interaction budget of " +
                                         std::to_string(session.config.max_iterations) +
                                         " reranks is exhausted");
  }

  const auto shown = session.shown();
  const std::unordered_set<ItemId> shown_set(shown.begin(), shown.end());
  std::unordered_set<ItemId> prefix_set;
  for (const auto& id : feedback.ordered_prefix) {
    if (!shown_set.count(id)) {
      throw Error(ErrorCode::invalid_argument, "item '" + id + "' is not in the shown top-k");
    }
    if (!prefix_set.insert(id).second) {
      throw Error(ErrorCode::invalid_argument, "item '" + id + "' appears twice in the prefix");
    }
  }
  for (const auto& id : feedback.deletions) {
    if (!shown_set.count(id)) {
      throw Error(ErrorCode::invalid_argument,
                  "deleted item '" + id + "' is not in the shown top-k");
    }
    if (prefix_set.count(id)) {
      throw Error(ErrorCode::invalid_argument, "item '" + id + "' is both reranked and deleted");
    }
  }

  Session next = session;
  if (feedback.satisfied || (feedback.ordered_prefix == shown && feedback.deletions.empty())) {
    transition(next, SessionStatus::satisfied);
    return next;
  }

  const std::unordered_set<ItemId> deleted(feedback.deletions.begin(), feedback.deletions.end());
  std::vector<ItemId> favorites = feedback.ordered_prefix;
  for (const auto& id : shown) {
    if (!prefix_set.count(id) && !deleted.count(id)) favorites.push_back(id);
  }
  if (favorites.empty()) {
    throw Error(ErrorCode::invalid_argument, "feedback deletes every shown item");
  }

  next.favorite_ids = std::move(favorites);
  auto all_deleted = next.deleted_ids;
  all_deleted.insert(all_deleted.end(), feedback.deletions.begin(), feedback.deletions.end());
  next.deleted_ids = sorted_unique(std::move(all_deleted));
  next.iteration += 1;
  run_pipeline(next, catalog);
  transition(next, SessionStatus::awaiting_feedback);
  return next;
}

Session finalize(const Session& session, const AttributeModelBank& bank, const Catalog& catalog) {
  if (session.status != SessionStatus::awaiting_feedback &&
      session.status != SessionStatus::satisfied) {
    throw Error(ErrorCode::conflict,
                std::string("cannot finalize a session that is ") + to_string(session.status));
  }
  Session next = session;
  next.usad = build_usad(session.current_ranking, bank, catalog);
  transition(next, SessionStatus::finalized);
  return next;
}

SessionEvent SessionEvent::started(const Session& s) {
  SessionEvent e;
  e.kind = Kind::started;
  e.session_id = s.session_id;
  e.config = s.config;
  e.favorites = s.favorite_ids;  // taken right after start, before any feedback
  e.excluded_ids = s.excluded_ids;
  return e;
}

SessionEvent SessionEvent::feedback_submitted(const Session& before, const RerankFeedback& fb) {
  SessionEvent e;
  e.kind = Kind::feedback_submitted;
  e.session_id = before.session_id;
  e.feedback = fb;
  e.iteration = before.iteration;
  return e;
}

SessionEvent SessionEvent::finalized(const Session& s) {
  SessionEvent e;
  e.kind = Kind::finalized;
  e.session_id = s.session_id;
  return e;
}

nlohmann::json SessionEvent::to_json() const {
  nlohmann::json j;
  j["session_id"] = session_id;
  switch (kind) {
    case Kind::started:
      j["event"] = "started";
      j["config"] = config;
      j["favorites"] = favorites;
      j["excluded_ids"] = excluded_ids;
      break;
    case Kind::feedback_submitted:
      j["event"] = "feedback_submitted";
      j["iteration"] = iteration;
      j["ordered_prefix"] = feedback.ordered_prefix;
      j["deletions"] = feedback.deletions;
      j["satisfied"] = feedback.satisfied;
      break;
    case Kind::finalized:
      j["event"] = "finalized";
      break;
  }
  return j;
}

SessionEvent SessionEvent::from_json(const nlohmann::json& j) {
  SessionEvent e;
  try {
    e.session_id = j.at("session_id").get<std::string>();
    const auto kind = j.at("event").get<std::string>();
    if (kind == "started") {
      e.kind = Kind::started;
      e.config = j.at("config").get<UsarConfig>();
      e.favorites = j.at("favorites").get<std::vector<ItemId>>();
      e.excluded_ids = j.value("excluded_ids", std::vector<ItemId>{});
    } else if (kind == "feedback_submitted") {
      e.kind = Kind::feedback_submitted;
      e.iteration = j.at("iteration").get<int>();
      e.feedback.ordered_prefix = j.at("ordered_prefix").get<std::vector<ItemId>>();
      e.feedback.deletions = j.value("deletions", std::vector<ItemId>{});
      e.feedback.satisfied = j.value("satisfied", false);
    } else if (kind == "finalized") {
      e.kind = Kind::finalized;
    } else {
      throw Error(ErrorCode::data, "unknown session event '" + kind + "'");
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::data, std::string("malformed session event: ") + ex.what());
  }
  return e;
}

Session replay(std::span<const SessionEvent> events, const Catalog& catalog,
               const AttributeModelBank& bank) {
  if (events.empty() || events.front().kind != SessionEvent::Kind::started) {
    throw Error(ErrorCode::data, "event log must begin with a 'started' event");
  }
  const auto& first = events.front();
  Session s = start_session(catalog, bank, first.config, first.favorites,
                            SessionOptions{first.session_id, first.excluded_ids});
  for (std::size_t i = 1; i < events.size(); ++i) {
    const auto& e = events[i];
    switch (e.kind) {
      case SessionEvent::Kind::started:
        throw Error(ErrorCode::data, "duplicate 'started' event at position " + std::to_string(i));
      case SessionEvent::Kind::feedback_submitted:
        if (e.iteration != s.iteration) {
          throw Error(ErrorCode::data, "event " + std::to_string(i) +
                                           " was recorded at iteration " +
                                           std::to_string(e.iteration) + " but replay is at " +
                                           std::to_string(s.iteration));
        }
        s = submit_feedback(s, e.feedback, catalog);
        break;
      case SessionEvent::Kind::finalized:
        s = finalize(s, bank, catalog);
        break;
    }
  }
  return s;
}

void write_event_log(std::ostream& out, std::span<const SessionEvent> events) {
  for (const auto& e : events) out << e.to_json().dump() << '\n';
}

std::vector<SessionEvent> read_event_log(std::istream& in) {
  std::vector<SessionEvent> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& ex) {
      throw Error(ErrorCode::data,
                  "event log line " + std::to_string(line_no) + ": " + ex.what());
    }
    events.push_back(SessionEvent::from_json(j));
  }
  return events;
}

}  // namespace usar
