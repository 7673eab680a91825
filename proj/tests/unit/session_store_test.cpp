#include <gtest/gtest.h>

#include <atomic>
#include <fstream>
#include <thread>

#include "test_support.hpp"
#include "usar/error.hpp"
#include "usar/session_store.hpp"
#include "usar/synthetic.hpp"

using namespace usar;

namespace {

std::shared_ptr<const Catalog> shared_catalog() {
  static auto c = std::make_shared<const Catalog>(toy_corpus());
  return c;
}

std::shared_ptr<const AttributeModelBank> shared_bank() {
  static auto b = [] {
    UsarConfig cfg;
    cfg.tradeoff_c = kDefaultBankTradeoffC;
    return std::make_shared<const AttributeModelBank>(train_bank(*shared_catalog(), cfg));
  }();
  return b;
}

std::vector<ItemId> favorites(std::size_t offset = 0) {
  std::vector<ItemId> out;
  for (std::size_t i = 0; i < 5; ++i) out.push_back(shared_catalog()->item(offset + i * 11).id);
  return out;
}

RerankFeedback reversed(const Session& s) {
  RerankFeedback fb;
  fb.ordered_prefix = s.shown();
  std::reverse(fb.ordered_prefix.begin(), fb.ordered_prefix.end());
  return fb;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::io;
}

}  // namespace

TEST(SessionStore, CreateGetSubmitFinalize) {
  SessionStore store(shared_catalog(), shared_bank(), UsarConfig{});
  const auto s = store.create(favorites());
  EXPECT_EQ(store.get(s.session_id), s);
  const auto next = store.submit(s.session_id, reversed(s), 0);
  EXPECT_EQ(next.iteration, 1);
  const auto done = store.finalize(s.session_id);
  EXPECT_TRUE(done.usad.has_value());
  EXPECT_EQ(store.events(s.session_id).size(), 3u);
  EXPECT_EQ(code_of([&] { store.get("missing"); }), ErrorCode::not_found);
  EXPECT_EQ(code_of([&] { store.finalize(s.session_id); }), ErrorCode::conflict);
}

TEST(SessionStore, IdempotentCreate) {
  SessionStore store(shared_catalog(), shared_bank(), UsarConfig{});
  const auto a = store.create(favorites(), std::nullopt, "key-1");
  const auto b = store.create(favorites(), std::nullopt, "key-1");
  EXPECT_EQ(a.session_id, b.session_id);
  EXPECT_EQ(store.session_ids().size(), 1u);
}

TEST(SessionStore, RetriedFeedbackIsANoOp) {
  SessionStore store(shared_catalog(), shared_bank(), UsarConfig{});
  const auto s = store.create(favorites());
  const auto fb = reversed(s);
  const auto first = store.submit(s.session_id, fb, 0, "fb-1");
  const auto again = store.submit(s.session_id, fb, 0, "fb-1");
  EXPECT_EQ(first, again);
  // Same payload for the same iteration without a key is also recognized.
  const auto third = store.submit(s.session_id, fb, 0);
  EXPECT_EQ(first, third);
  EXPECT_EQ(store.get(s.session_id).iteration, 1);
  EXPECT_EQ(store.events(s.session_id).size(), 2u);
}

TEST(SessionStore, StaleIterationWithDifferentPayloadConflicts) {
  SessionStore store(shared_catalog(), shared_bank(), UsarConfig{});
  const auto s = store.create(favorites());
  store.submit(s.session_id, reversed(s), 0);
  RerankFeedback other;
  other.ordered_prefix = {s.shown()[1], s.shown()[0]};
  EXPECT_EQ(code_of([&] { store.submit(s.session_id, other, 0); }), ErrorCode::conflict);
}

TEST(SessionStore, ConcurrentMutationsAreSerializedOrRejected) {
  SessionStore store(shared_catalog(), shared_bank(), UsarConfig{});
  UsarConfig cfg;
  cfg.max_iterations = 100;
  const auto s = store.create(favorites(), cfg);
  std::atomic<int> applied{0}, rejected{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 5; ++i) {
        try {
          const auto cur = store.get(s.session_id);
          store.submit(s.session_id, reversed(cur), cur.iteration);
          ++applied;
        } catch (const Error& e) {
          EXPECT_EQ(e.code(), ErrorCode::conflict) << e.what();
          ++rejected;
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  const auto final_state = store.get(s.session_id);
  EXPECT_EQ(applied + rejected, 20);
  // Identical retries count as applied without advancing; every advance is one event.
  EXPECT_EQ(store.events(s.session_id).size(), static_cast<std::size_t>(final_state.iteration) + 1);
  EXPECT_EQ(replay(store.events(s.session_id), *shared_catalog(), *shared_bank()), final_state);
}

TEST(SessionStore, EventLogsSurviveRestart) {
  usar::testing::TempDir dir;
  std::string id;
  Session before;
  {
    SessionStore store(shared_catalog(), shared_bank(), UsarConfig{}, dir.path());
    const auto s = store.create(favorites(3));
    id = s.session_id;
    store.submit(id, reversed(s), 0);
    before = store.get(id);
    store.create(favorites(7));
  }
  EXPECT_TRUE(std::filesystem::exists(dir / (id + ".events.jsonl")));
  SessionStore restored(shared_catalog(), shared_bank(), UsarConfig{}, dir.path());
  EXPECT_EQ(restored.load_persisted(), 2u);
  EXPECT_EQ(restored.get(id), before);
  const auto done = restored.finalize(id);
  EXPECT_TRUE(done.usad.has_value());
}
