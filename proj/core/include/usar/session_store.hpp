#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "usar/attribute_classifier.hpp"
#include "usar/catalog.hpp"
#include "usar/config.hpp"
#include "usar/interaction.hpp"

namespace usar {

/// Thread-safe registry of live sessions over a shared catalog and bank.
///
/// Mutations of one session are serialized: a second concurrent mutation of
/// the same session is rejected with Error(conflict) instead of queued.
/// Requests carrying an idempotency key that was already applied return the
/// recorded result without touching the session. When a log directory is
/// set, every event is appended to `<dir>/<session_id>.events.jsonl`.
class SessionStore {
 public:
  SessionStore(std::shared_ptr<const Catalog> catalog,
               std::shared_ptr<const AttributeModelBank> bank, UsarConfig defaults,
               std::optional<std::filesystem::path> log_dir = std::nullopt);

  Session create(std::vector<ItemId> favorites, const std::optional<UsarConfig>& cfg = std::nullopt,
                 const std::optional<std::string>& idempotency_key = std::nullopt);

  Session get(const std::string& session_id) const;

  /// `expected_iteration`, when given, must match the session's iteration;
  /// a retry of the last applied feedback for that iteration is a no-op.
  Session submit(const std::string& session_id, const RerankFeedback& feedback,
                 std::optional<int> expected_iteration = std::nullopt,
                 const std::optional<std::string>& idempotency_key = std::nullopt);

  Session finalize(const std::string& session_id,
                   const std::optional<std::string>& idempotency_key = std::nullopt);

  std::vector<SessionEvent> events(const std::string& session_id) const;
  std::vector<std::string> session_ids() const;

  /// Replays every event log found in the log directory. Returns the count.
  std::size_t load_persisted();

  const Catalog& catalog() const { return *catalog_; }
  const AttributeModelBank& bank() const { return *bank_; }
  const UsarConfig& defaults() const { return defaults_; }

 private:
  struct Entry {
    std::mutex writer;         // held for a whole mutation; contenders are rejected
    mutable std::mutex state;  // guards the fields below, held briefly
    Session session;
    std::vector<SessionEvent> events;
    std::map<std::string, Session> by_idempotency_key;
    std::optional<SessionEvent> last_feedback;
    std::optional<Session> last_feedback_result;
  };

  std::shared_ptr<Entry> entry(const std::string& session_id) const;
  void append(const Entry& e, const SessionEvent& event) const;

  std::shared_ptr<const Catalog> catalog_;
  std::shared_ptr<const AttributeModelBank> bank_;
  UsarConfig defaults_;
  std::optional<std::filesystem::path> log_dir_;

  mutable std::shared_mutex map_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::map<std::string, std::string> created_by_key_;  // idempotency key -> session id
};

}  // namespace usar
