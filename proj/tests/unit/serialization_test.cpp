#include <gtest/gtest.h>

#include "test_support.hpp"
#include "usar/attribute_classifier.hpp"
#include "usar/config.hpp"
#include "usar/error.hpp"
#include "usar/serialization.hpp"
#include "usar/synthetic.hpp"

using namespace usar;
using nlohmann::json;

TEST(Serialization, ConfigRoundTripAndValidation) {
  UsarConfig cfg;
  cfg.m = 7;
  cfg.neighbors_per_favorite = 3;
  cfg.distance_metric = DistanceMetric::cosine;
  cfg.rng_seed = 0xFFFFFFFFFFFFFFFFULL;
  const json j = cfg;
  EXPECT_EQ(j.get<UsarConfig>(), cfg);
  EXPECT_EQ(cfg.fingerprint(), j.get<UsarConfig>().fingerprint());
  UsarConfig other = cfg;
  other.tradeoff_c = 2.0;
  EXPECT_NE(cfg.fingerprint(), other.fingerprint());

  UsarConfig bad;
  bad.tradeoff_c = -1;
  EXPECT_THROW(bad.validate(), Error);
  bad = {};
  bad.k = 0;
  EXPECT_THROW(bad.validate(), Error);
  EXPECT_THROW(parse_distance_metric("manhattan"), Error);
}

TEST(Serialization, BankRoundTrip) {
  const auto c = generate_synthetic(toy_corpus_spec());
  UsarConfig cfg;
  cfg.tradeoff_c = kDefaultBankTradeoffC;
  const auto bank = train_bank(c, cfg);
  usar::testing::TempDir dir;
  save_json(dir / "bank.json", bank);
  EXPECT_EQ(load_bank(dir / "bank.json"), bank);
}

TEST(Serialization, UsadAndRankingRoundTrip) {
  UserAestheticDistribution usad;
  usad.attribute_names = {"a", "b", "c"};
  usad.dist.probs = {0.5, 0.25, 0.25};
  usad.source_ranking_generation = 3;
  usad.source_item_count = 9;
  usar::testing::TempDir dir;
  save_json(dir / "usad.json", usad);
  EXPECT_EQ(load_usad(dir / "usad.json"), usad);

  const RankedList list{{{"x", 2.5}, {"y", -1.0}}, 4};
  EXPECT_EQ(json(list).get<RankedList>(), list);
  const RerankFeedback fb{{"b", "a"}, {"c"}, true};
  EXPECT_EQ(json(fb).get<RerankFeedback>(), fb);
}

TEST(Serialization, RejectsInvalidUsad) {
  json j = {{"attributes", {"a", "b"}}, {"probs", {0.9, 0.9}}};
  EXPECT_THROW(j.get<UserAestheticDistribution>(), Error);
  j = {{"attributes", {"a", "b"}}, {"probs", {0.5}}};
  EXPECT_THROW(j.get<UserAestheticDistribution>(), Error);
}

TEST(Serialization, ModelRoundTrip) {
  RankingModel m;
  m.weights = {0.1, -2.0, 3.5};
  m.objective_value = 1.25;
  m.epochs_run = 12;
  m.converged = true;
  const auto j = model_to_json(m, "abc");
  EXPECT_EQ(j["config_fingerprint"], "abc");
  EXPECT_EQ(model_from_json(j), m);
  EXPECT_EQ(model_from_json(j).fingerprint(), m.fingerprint());
}

TEST(Serialization, AtomicWriteReplacesContent) {
  usar::testing::TempDir dir;
  write_file_atomic(dir / "f.txt", "one");
  write_file_atomic(dir / "f.txt", "two");
  EXPECT_EQ(read_file(dir / "f.txt"), "two");
  EXPECT_FALSE(std::filesystem::exists(dir / "f.txt.tmp"));
  try {
    read_file(dir / "absent");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::io);
  }
  EXPECT_THROW(write_file_atomic(dir / "no/such/dir/f", "x"), Error);
}

TEST(Serialization, SessionProjection) {
  const auto c = generate_synthetic(toy_corpus_spec());
  UsarConfig cfg;
  cfg.tradeoff_c = kDefaultBankTradeoffC;
  const auto bank = train_bank(c, cfg);
  const std::vector<ItemId> favs{c.items()[0].id, c.items()[1].id, c.items()[2].id,
                                 c.items()[3].id, c.items()[4].id};
  const auto s = start_session(c, bank, UsarConfig{}, favs);
  const auto j = session_to_json(s, 7);
  EXPECT_EQ(j["session_id"], s.session_id);
  EXPECT_EQ(j["status"], "awaiting_feedback");
  EXPECT_EQ(j["iteration"], 0);
  EXPECT_EQ(j["ranking"]["entries"].size(), 7u);
  EXPECT_EQ(j["shown"].size(), 5u);
  EXPECT_FALSE(j.contains("usad"));
  EXPECT_EQ(session_to_json(s)["ranking"]["entries"].size(), s.current_ranking.entries.size());
}
