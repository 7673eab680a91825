#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "test_support.hpp"
#include "usar/error.hpp"
#include "usar/interaction.hpp"
#include "usar/synthetic.hpp"

using namespace usar;
using usar::testing::item;

namespace {

struct Toy {
  Catalog catalog = toy_corpus();
  AttributeModelBank bank = [&] {
    UsarConfig cfg;
    cfg.tradeoff_c = kDefaultBankTradeoffC;
    return train_bank(catalog, cfg);
  }();
};

const Toy& toy() {
  static const Toy t;
  return t;
}

// First m items carrying `label`.
std::vector<ItemId> same_attribute(const Catalog& c, const std::string& label, std::size_t m) {
  std::vector<ItemId> out;
  for (const auto& it : c.items()) {
    if (std::find(it.attribute_labels.begin(), it.attribute_labels.end(), label) != it.attribute_labels.end()) {
      out.push_back(it.id);
    }
    if (out.size() == m) break;
  }
  return out;
}

std::vector<ItemId> spread_favorites(const Catalog& c, std::size_t m, std::size_t stride = 13) {
  std::vector<ItemId> out;
  for (std::size_t i = 0; i < m; ++i) out.push_back(c.item(i * stride).id);
  return out;
}

}  // namespace

TEST(StartSession, MutuallySimilarFavoritesLeadTheRanking) {
  const auto& t = toy();
  const auto favorites = same_attribute(t.catalog, "Tone", 5);
  ASSERT_EQ(favorites.size(), 5u);
  const auto s = start_session(t.catalog, t.bank, UsarConfig{}, favorites);
  EXPECT_EQ(s.status, SessionStatus::awaiting_feedback);
  EXPECT_EQ(s.iteration, 0);
  EXPECT_EQ(s.current_ranking.generation, 0);
  EXPECT_EQ(s.model_history.size(), 1u);

  const auto top = s.current_ranking.top(5);
  EXPECT_EQ(std::set<ItemId>(top.begin(), top.end()), std::set<ItemId>(favorites.begin(), favorites.end()));
  for (const auto& e : s.current_ranking.entries) {
    EXPECT_NEAR(e.score, dot(s.current_model.weights, t.catalog.features(t.catalog.index_of(e.id))), 1e-12);
  }
}

TEST(StartSession, SingleFavoriteOnALine) {
  const auto c = Catalog::validate({item("A", {0}), item("B", {1}), item("C", {3}), item("D", {10})});
  AttributeModelBank bank;
  bank.dim = 1;
  bank.attribute_names = {"x", "y"};
  bank.weights = {{1.0}, {-1.0}};
  bank.intercepts = {0, 0};
  UsarConfig cfg;
  cfg.m = 1;
  cfg.neighbors_per_favorite = 2;
  const auto s = start_session(c, bank, cfg, {"A"});
  EXPECT_EQ(s.training_pool, (std::vector<ItemId>{"A", "B", "C"}));
  EXPECT_LT(s.current_model.weights[0], 0.0);
  EXPECT_EQ(s.current_ranking.ids(), (std::vector<ItemId>{"A", "B", "C"}));
}

TEST(StartSession, Preconditions) {
  const auto& t = toy();
  auto fav = spread_favorites(t.catalog, 5);
  fav[2] = "no-such-item";
  EXPECT_THROW(start_session(t.catalog, t.bank, UsarConfig{}, fav), Error);
  EXPECT_THROW(start_session(t.catalog, t.bank, UsarConfig{}, spread_favorites(t.catalog, 4)), Error);
  auto favorites = spread_favorites(t.catalog, 5);
  EXPECT_THROW(start_session(t.catalog, t.bank, UsarConfig{}, favorites,
                             SessionOptions{"", {favorites[0]}}),
               Error);
  AttributeModelBank wrong = t.bank;
  wrong.extractor = "toy-v1";
  EXPECT_THROW(start_session(t.catalog, wrong, UsarConfig{}, favorites), Error);
}

TEST(SubmitFeedback, IdentityOrderMeansSatisfied) {
  const auto& t = toy();
  const auto s = start_session(t.catalog, t.bank, UsarConfig{}, spread_favorites(t.catalog, 5));
  RerankFeedback fb;
  fb.ordered_prefix = s.shown();
  const auto next = submit_feedback(s, fb, t.catalog);
  EXPECT_EQ(next.status, SessionStatus::satisfied);
  EXPECT_EQ(next.current_model, s.current_model);
  EXPECT_EQ(next.current_ranking, s.current_ranking);
  EXPECT_EQ(next.iteration, 0);
}

TEST(SubmitFeedback, SatisfiedFlagWinsOverReorder) {
  const auto& t = toy();
  const auto s = start_session(t.catalog, t.bank, UsarConfig{}, spread_favorites(t.catalog, 5));
  RerankFeedback fb;
  fb.ordered_prefix = s.shown();
  std::reverse(fb.ordered_prefix.begin(), fb.ordered_prefix.end());
  fb.satisfied = true;
  const auto next = submit_feedback(s, fb, t.catalog);
  EXPECT_EQ(next.status, SessionStatus::satisfied);
  EXPECT_EQ(next.current_model, s.current_model);
}

TEST(SubmitFeedback, SwappedPairIsLearned) {
  const auto& t = toy();
  UsarConfig cfg;
  cfg.k = 2;
  const auto s = start_session(t.catalog, t.bank, cfg, spread_favorites(t.catalog, 5));
  const auto shown = s.shown();
  ASSERT_EQ(shown.size(), 2u);
  RerankFeedback fb;
  fb.ordered_prefix = {shown[1], shown[0]};
  const auto next = submit_feedback(s, fb, t.catalog);
  EXPECT_EQ(next.status, SessionStatus::awaiting_feedback);
  EXPECT_EQ(next.iteration, 1);
  EXPECT_EQ(next.favorite_ids, fb.ordered_prefix);
  EXPECT_EQ(next.current_ranking.generation, 1);
  EXPECT_EQ(next.model_history.size(), 2u);
  const auto score = [&](const ItemId& id) {
    return dot(next.current_model.weights, t.catalog.features(t.catalog.index_of(id)));
  };
  EXPECT_GT(score(shown[1]), score(shown[0]));
}

TEST(SubmitFeedback, BudgetIsEnforced) {
  const auto& t = toy();
  UsarConfig cfg;
  cfg.max_iterations = 3;
  auto s = start_session(t.catalog, t.bank, cfg, spread_favorites(t.catalog, 5));
  for (int i = 0; i < 3; ++i) {
    RerankFeedback fb;
    fb.ordered_prefix = s.shown();
    std::rotate(fb.ordered_prefix.begin(), fb.ordered_prefix.begin() + 1, fb.ordered_prefix.end());
    s = submit_feedback(s, fb, t.catalog);
  }
  EXPECT_EQ(s.iteration, 3);
  RerankFeedback fb;
  fb.ordered_prefix = {s.shown()[1], s.shown()[0]};
  try {
    submit_feedback(s, fb, t.catalog);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::conflict);
  }
  // Finalizing stays possible.
  EXPECT_EQ(finalize(s, t.bank, t.catalog).status, SessionStatus::finalized);
}

TEST(SubmitFeedback, RejectsItemsOutsideTheShownPrefix) {
  const auto& t = toy();
  const auto s = start_session(t.catalog, t.bank, UsarConfig{}, spread_favorites(t.catalog, 5));
  const auto shown = s.shown();
  RerankFeedback outside;
  outside.ordered_prefix = {shown[0], s.current_ranking.entries.back().id};
  EXPECT_THROW(submit_feedback(s, outside, t.catalog), Error);
  RerankFeedback dup;
  dup.ordered_prefix = {shown[0], shown[0]};
  EXPECT_THROW(submit_feedback(s, dup, t.catalog), Error);
  RerankFeedback both;
  both.ordered_prefix = {shown[0]};
  both.deletions = {shown[0]};
  EXPECT_THROW(submit_feedback(s, both, t.catalog), Error);
  RerankFeedback everything;
  everything.deletions = shown;
  EXPECT_THROW(submit_feedback(s, everything, t.catalog), Error);
}

TEST(SubmitFeedback, DeletedItemsNeverReappear) {
  const auto& t = toy();
  UsarConfig cfg;
  cfg.max_iterations = 5;
  auto s = start_session(t.catalog, t.bank, cfg, spread_favorites(t.catalog, 5));
  std::set<ItemId> deleted;
  for (int round = 0; round < 5; ++round) {
    const auto shown = s.shown();
    RerankFeedback fb;
    fb.deletions = {shown.back()};
    fb.ordered_prefix.assign(shown.begin(), shown.end() - 1);
    std::reverse(fb.ordered_prefix.begin(), fb.ordered_prefix.end());
    deleted.insert(shown.back());
    s = submit_feedback(s, fb, t.catalog);
    for (const auto& e : s.current_ranking.entries) EXPECT_FALSE(deleted.count(e.id)) << e.id;
    for (const auto& id : s.training_pool) EXPECT_FALSE(deleted.count(id));
  }
  EXPECT_EQ(std::set<ItemId>(s.deleted_ids.begin(), s.deleted_ids.end()), deleted);
}

TEST(Finalize, PopulatesUsadFromCurrentRanking) {
  const auto& t = toy();
  auto s = start_session(t.catalog, t.bank, UsarConfig{}, spread_favorites(t.catalog, 5));
  RerankFeedback fb;
  fb.ordered_prefix = s.shown();
  std::swap(fb.ordered_prefix[0], fb.ordered_prefix[3]);
  s = submit_feedback(s, fb, t.catalog);
  fb = {};
  fb.ordered_prefix = s.shown();
  s = submit_feedback(s, fb, t.catalog);
  ASSERT_EQ(s.status, SessionStatus::satisfied);
  const auto done = finalize(s, t.bank, t.catalog);
  ASSERT_TRUE(done.usad.has_value());
  EXPECT_EQ(done.status, SessionStatus::finalized);
  EXPECT_EQ(done.usad->source_ranking_generation, 1);
  EXPECT_EQ(done.current_ranking, s.current_ranking);
  EXPECT_EQ(*done.usad, build_usad(s.current_ranking, t.bank, t.catalog));
  EXPECT_THROW(finalize(done, t.bank, t.catalog), Error);
  EXPECT_THROW(submit_feedback(done, fb, t.catalog), Error);
}

TEST(StateMachine, TransitionTable) {
  using S = SessionStatus;
  const std::set<std::pair<S, S>> allowed = {{S::awaiting_favorites, S::awaiting_feedback},
                                             {S::awaiting_feedback, S::awaiting_feedback},
                                             {S::awaiting_feedback, S::satisfied},
                                             {S::awaiting_feedback, S::finalized},
                                             {S::satisfied, S::finalized}};
  for (auto a : {S::awaiting_favorites, S::awaiting_feedback, S::satisfied, S::finalized}) {
    EXPECT_EQ(parse_session_status(to_string(a)), a);
    for (auto b : {S::awaiting_favorites, S::awaiting_feedback, S::satisfied, S::finalized}) {
      EXPECT_EQ(is_allowed_transition(a, b), allowed.count({a, b}) == 1);
    }
  }
}

// Random walks over the public operations: every observed status change is
// an allowed transition, the iteration never exceeds the budget and only
// rises by one per accepted rerank.
TEST(StateMachine, RandomWalksRespectInvariants) {
  const auto& t = toy();
  std::mt19937_64 rng(2718);
  for (int walk = 0; walk < 40; ++walk) {
    UsarConfig cfg;
    cfg.max_iterations = static_cast<int>(rng() % 4);
    cfg.k = 2 + static_cast<int>(rng() % 4);
    cfg.rng_seed = rng();
    std::vector<ItemId> fav;
    for (int i = 0; i < cfg.m; ++i) fav.push_back(t.catalog.item((rng() % 48) * 5 + static_cast<std::size_t>(i)).id);
    std::sort(fav.begin(), fav.end());
    fav.erase(std::unique(fav.begin(), fav.end()), fav.end());
    if (fav.size() != static_cast<std::size_t>(cfg.m)) continue;
    Session s = start_session(t.catalog, t.bank, cfg, fav);
    for (int step = 0; step < 8; ++step) {
      const Session before = s;
      const int action = static_cast<int>(rng() % 5);
      try {
        if (action == 4) {
          s = finalize(s, t.bank, t.catalog);
        } else {
          RerankFeedback fb;
          fb.ordered_prefix = s.shown();
          if (action == 1) std::shuffle(fb.ordered_prefix.begin(), fb.ordered_prefix.end(), rng);
          if (action == 2 && fb.ordered_prefix.size() > 1) {
            fb.deletions = {fb.ordered_prefix.back()};
            fb.ordered_prefix.pop_back();
            std::reverse(fb.ordered_prefix.begin(), fb.ordered_prefix.end());
          }
          if (action == 3) fb.satisfied = true;
          s = submit_feedback(s, fb, t.catalog);
        }
      } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::conflict) << e.what();
        EXPECT_EQ(s, before);
        continue;
      }
      if (s.status != before.status) EXPECT_TRUE(is_allowed_transition(before.status, s.status));
      EXPECT_LE(s.iteration, cfg.max_iterations);
      EXPECT_TRUE(s.iteration == before.iteration || s.iteration == before.iteration + 1);
      EXPECT_EQ(s.usad.has_value(), s.status == SessionStatus::finalized);
      EXPECT_EQ(s.model_history.size(), static_cast<std::size_t>(s.iteration) + 1);
    }
  }
}

TEST(Replay, EventLogReproducesSession) {
  const auto& t = toy();
  UsarConfig cfg;
  cfg.rng_seed = 31337;
  auto s = start_session(t.catalog, t.bank, cfg, spread_favorites(t.catalog, 5, 17),
                         SessionOptions{"s-replay", {t.catalog.item(1).id, t.catalog.item(2).id}});
  std::vector<SessionEvent> events = {SessionEvent::started(s)};
  for (int i = 0; i < 2; ++i) {
    RerankFeedback fb;
    fb.ordered_prefix = s.shown();
    std::reverse(fb.ordered_prefix.begin(), fb.ordered_prefix.end());
    fb.deletions = {fb.ordered_prefix.front()};
    fb.ordered_prefix.erase(fb.ordered_prefix.begin());
    events.push_back(SessionEvent::feedback_submitted(s, fb));
    s = submit_feedback(s, fb, t.catalog);
  }
  s = finalize(s, t.bank, t.catalog);
  events.push_back(SessionEvent::finalized(s));

  std::stringstream log;
  write_event_log(log, events);
  const auto read = read_event_log(log);
  ASSERT_EQ(read.size(), events.size());
  const auto replayed = replay(read, t.catalog, t.bank);
  EXPECT_EQ(replayed, s);
  EXPECT_EQ(replayed.current_model.weights, s.current_model.weights);  // bitwise
}

TEST(Replay, RejectsMalformedLogs) {
  const auto& t = toy();
  EXPECT_THROW(replay(std::vector<SessionEvent>{}, t.catalog, t.bank), Error);
  std::stringstream bad("{\"session_id\":\"x\",\"event\":\"exploded\"}\n");
  EXPECT_THROW(read_event_log(bad), Error);
  std::stringstream garbage("not json\n");
  EXPECT_THROW(read_event_log(garbage), Error);
}

TEST(SessionIds, Unique) {
  std::set<std::string> ids;
  for (int i = 0; i < 1000; ++i) EXPECT_TRUE(ids.insert(generate_session_id()).second);
}
