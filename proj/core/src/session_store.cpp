#include "usar/session_store.hpp"

#include <fstream>

#include "usar/error.hpp"

namespace usar {

namespace {

std::unique_lock<std::mutex> lock_or_reject(std::mutex& m, const std::string& id) {
  std::unique_lock<std::mutex> lock(m, std::try_to_lock);
  if (!lock.owns_lock()) {
    throw Error(ErrorCode::conflict, "session '" + id + "' is being modified by another request");
  }
  return lock;
}

}  // namespace

SessionStore::SessionStore(std::shared_ptr<const Catalog> catalog,
                           std::shared_ptr<const AttributeModelBank> bank, UsarConfig defaults,
                           std::optional<std::filesystem::path> log_dir)
    : catalog_(std::move(catalog)),
      bank_(std::move(bank)),
      defaults_(defaults),
      log_dir_(std::move(log_dir)) {
  defaults_.validate();
  if (log_dir_) std::filesystem::create_directories(*log_dir_);
}

std::shared_ptr<SessionStore::Entry> SessionStore::entry(const std::string& session_id) const {
  std::shared_lock lock(map_mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) {
    throw Error(ErrorCode::not_found, "unknown session '" + session_id + "'");
  }
  return it->second;
}

void SessionStore::append(const Entry& e, const SessionEvent& event) const {
  if (!log_dir_) return;
  const auto path = *log_dir_ / (e.session.session_id + ".events.jsonl");
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error(ErrorCode::io, "cannot append to '" + path.string() + "'");
  out << event.to_json().dump() << '\n';
  out.flush();
}

Session SessionStore::create(std::vector<ItemId> favorites, const std::optional<UsarConfig>& cfg,
                             const std::optional<std::string>& idempotency_key) {
  if (idempotency_key) {
    std::shared_lock lock(map_mutex_);
    auto it = created_by_key_.find(*idempotency_key);
    if (it != created_by_key_.end()) {
      auto e = sessions_.at(it->second);
      std::lock_guard state(e->state);
      return e->session;
    }
  }

  // Training runs outside the registry lock.
  auto e = std::make_shared<Entry>();
  e->session = start_session(*catalog_, *bank_, cfg.value_or(defaults_), std::move(favorites));
  e->events.push_back(SessionEvent::started(e->session));

  std::unique_lock lock(map_mutex_);
  if (idempotency_key) {
    auto it = created_by_key_.find(*idempotency_key);
    if (it != created_by_key_.end()) {
      auto existing = sessions_.at(it->second);
      std::lock_guard state(existing->state);
      return existing->session;
    }
    created_by_key_[*idempotency_key] = e->session.session_id;
  }
  append(*e, e->events.back());
  sessions_[e->session.session_id] = e;
  return e->session;
}

Session SessionStore::get(const std::string& session_id) const {
  auto e = entry(session_id);
  std::lock_guard lock(e->state);
  return e->session;
}

Session SessionStore::submit(const std::string& session_id, const RerankFeedback& feedback,
                             std::optional<int> expected_iteration,
                             const std::optional<std::string>& idempotency_key) {
  auto e = entry(session_id);
  auto writer = lock_or_reject(e->writer, session_id);

  Session current;
  {
    std::lock_guard state(e->state);
    if (idempotency_key) {
      auto it = e->by_idempotency_key.find(*idempotency_key);
      if (it != e->by_idempotency_key.end()) return it->second;
    }
    if (expected_iteration && *expected_iteration != e->session.iteration) {
      if (e->last_feedback && e->last_feedback->iteration == *expected_iteration &&
          e->last_feedback->feedback == feedback) {
        return *e->last_feedback_result;
      }
      throw Error(ErrorCode::conflict, "feedback targets iteration " +
                                           std::to_string(*expected_iteration) +
                                           " but the session is at iteration " +
                                           std::to_string(e->session.iteration));
    }
    current = e->session;
  }

  // Retraining happens with only the writer lock held, so reads proceed.
  Session next = submit_feedback(current, feedback, *catalog_);
  auto event = SessionEvent::feedback_submitted(current, feedback);
  append(*e, event);

  std::lock_guard state(e->state);
  e->events.push_back(event);
  e->last_feedback = event;
  e->last_feedback_result = next;
  e->session = next;
  if (idempotency_key) e->by_idempotency_key[*idempotency_key] = next;
  return next;
}

Session SessionStore::finalize(const std::string& session_id,
                               const std::optional<std::string>& idempotency_key) {
  auto e = entry(session_id);
  auto writer = lock_or_reject(e->writer, session_id);
  Session current;
  {
    std::lock_guard state(e->state);
    if (idempotency_key) {
      auto it = e->by_idempotency_key.find(*idempotency_key);
      if (it != e->by_idempotency_key.end()) return it->second;
    }
    current = e->session;
  }
  Session next = usar::finalize(current, *bank_, *catalog_);
  auto event = SessionEvent::finalized(next);
  append(*e, event);

  std::lock_guard state(e->state);
  e->events.push_back(event);
  e->session = next;
  if (idempotency_key) e->by_idempotency_key[*idempotency_key] = next;
  return next;
}

std::vector<SessionEvent> SessionStore::events(const std::string& session_id) const {
  auto e = entry(session_id);
  std::lock_guard lock(e->state);
  return e->events;
}

std::vector<std::string> SessionStore::session_ids() const {
  std::shared_lock lock(map_mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, _] : sessions_) ids.push_back(id);
  return ids;
}

std::size_t SessionStore::load_persisted() {
  if (!log_dir_) return 0;
  std::size_t loaded = 0;
  for (const auto& file : std::filesystem::directory_iterator(*log_dir_)) {
    const auto name = file.path().filename().string();
    const std::string suffix = ".events.jsonl";
    if (name.size() <= suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) {
      continue;
    }
    std::ifstream in(file.path());
    auto events = read_event_log(in);
    if (events.empty()) continue;
    auto e = std::make_shared<Entry>();
    e->session = replay(events, *catalog_, *bank_);
    e->events = std::move(events);
    std::unique_lock lock(map_mutex_);
    sessions_[e->session.session_id] = std::move(e);
    ++loaded;
  }
  return loaded;
}

}  // namespace usar
