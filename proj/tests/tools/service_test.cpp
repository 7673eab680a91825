#include <gtest/gtest.h>
#include <httplib.h>

#include <thread>

#include <nlohmann/json.hpp>

#include "service.hpp"
#include "test_support.hpp"
#include "usar/dataset_io.hpp"
#include "usar/error.hpp"
#include "usar/serialization.hpp"
#include "usar/synthetic.hpp"

using namespace usar;
using nlohmann::json;

namespace {

// One server for the whole suite; the bank takes a moment to train.
class ServiceTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    auto items = toy_corpus().raw_items();
    items[0].media_path = std::string(USAR_SOURCE_DIR) + "/tests/data/images/sunset.png";
    auto catalog = std::make_shared<const Catalog>(
        Catalog::validate(std::move(items), {}, "synthetic"));
    UsarConfig bank_cfg;
    bank_cfg.tradeoff_c = kDefaultBankTradeoffC;
    auto bank = std::make_shared<const AttributeModelBank>(train_bank(*catalog, bank_cfg));
    auto store = std::make_shared<SessionStore>(catalog, bank, UsarConfig{});

    service::ServiceConfig cfg;
    cfg.port = 0;
    server_ = new service::Server(cfg, store);
    server_->bind();
    thread_ = new std::thread([] { server_->listen(); });
    while (!server_->running()) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }

  static void TearDownTestSuite() {
    server_->stop();
    thread_->join();
    delete thread_;
    delete server_;
  }

  static httplib::Client client() {
    httplib::Client c("127.0.0.1", server_->port());
    c.set_read_timeout(30, 0);
    return c;
  }

  static std::vector<std::string> five_favorites() {
    const auto& c = server_->store().catalog();
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < 5; ++i) ids.push_back(c.item(i * 7).id);
    return ids;
  }

  static json create_session() {
    auto res = client().Post("/sessions", json{{"favorites", five_favorites()}}.dump(),
                             "application/json");
    EXPECT_TRUE(res);
    EXPECT_EQ(res->status, 201);
    return json::parse(res->body);
  }

  static inline service::Server* server_ = nullptr;
  static inline std::thread* thread_ = nullptr;
};

TEST_F(ServiceTest, Health) {
  auto res = client().Get("/health");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["status"], "ok");
}

TEST_F(ServiceTest, CreateSessionReturnsInitialRanking) {
  const auto s = create_session();
  EXPECT_FALSE(s["session_id"].get<std::string>().empty());
  EXPECT_EQ(s["ranking"]["generation"], 0);
  EXPECT_EQ(s["status"], "awaiting_feedback");
  EXPECT_EQ(s["shown"].size(), 5u);
  EXPECT_GT(s["ranking"]["entries"].size(), 5u);
}

TEST_F(ServiceTest, IdentityFeedbackSatisfiesThenFinalize) {
  const auto s = create_session();
  const std::string id = s["session_id"];
  const std::string base = "/sessions/" + id;

  auto early = client().Get(base + "/usad");
  ASSERT_TRUE(early);
  EXPECT_EQ(early->status, 409);

  const json fb{{"ordered_prefix", s["shown"]}, {"deletions", json::array()}};
  auto res = client().Post(base + "/feedback", fb.dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200) << res->body;
  EXPECT_EQ(json::parse(res->body)["status"], "satisfied");

  res = client().Post(base + "/finalize", "", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200) << res->body;

  res = client().Get(base + "/usad");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const auto usad = json::parse(res->body).get<UserAestheticDistribution>();
  EXPECT_TRUE(usad.dist.is_valid(1e-9));

  res = client().Post("/score", json{{"session_id", id}}.dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const auto ranking = json::parse(res->body)["ranking"];
  EXPECT_EQ(ranking.size(), server_->store().catalog().size());
  for (std::size_t i = 1; i < ranking.size(); ++i) {
    EXPECT_GE(ranking[i - 1]["score"].get<double>(), ranking[i]["score"].get<double>());
  }
}

TEST_F(ServiceTest, FeedbackRetryWithSameKeyIsNoOp) {
  const auto s = create_session();
  const std::string base = "/sessions/" + s["session_id"].get<std::string>();
  auto shown = s["shown"].get<std::vector<std::string>>();
  std::swap(shown[0], shown[1]);
  const json fb{{"ordered_prefix", shown}, {"iteration", 0}};
  httplib::Headers headers{{"Idempotency-Key", "retry-1"}};

  auto first = client().Post(base + "/feedback", headers, fb.dump(), "application/json");
  auto second = client().Post(base + "/feedback", headers, fb.dump(), "application/json");
  ASSERT_TRUE(first && second);
  EXPECT_EQ(first->status, 200) << first->body;
  EXPECT_EQ(second->status, 200);
  EXPECT_EQ(first->body, second->body);
  EXPECT_EQ(json::parse(second->body)["iteration"], 1);

  // Stale iteration with different content conflicts.
  std::swap(shown[2], shown[3]);
  auto stale = client().Post(base + "/feedback", json{{"ordered_prefix", shown}, {"iteration", 0}}.dump(),
                             "application/json");
  ASSERT_TRUE(stale);
  EXPECT_EQ(stale->status, 409);
}

TEST_F(ServiceTest, ErrorStatuses) {
  auto res = client().Get("/sessions/nope");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);
  EXPECT_TRUE(json::parse(res->body).contains("error"));

  res = client().Post("/sessions", "{not json", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);

  auto favs = five_favorites();
  favs.pop_back();
  res = client().Post("/sessions", json{{"favorites", favs}}.dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 422);

  res = client().Post("/sessions", json{{"favorites", {"missing-item"}}, {"config", {{"m", 1}}}}.dump(),
                      "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);

  res = client().Get("/catalog/items?page_size=abc");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
}

TEST_F(ServiceTest, PartialConfigOverride) {
  const auto& c = server_->store().catalog();
  const json body{{"favorites", {c.item(3).id, c.item(90).id}}, {"config", {{"m", 2}, {"k", 3}}}};
  auto res = client().Post("/sessions", body.dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 201) << res->body;
  const auto s = json::parse(res->body);
  EXPECT_EQ(s["m"], 2);
  EXPECT_EQ(s["k"], 3);
  EXPECT_EQ(s["shown"].size(), 3u);

  res = client().Get("/sessions/" + s["session_id"].get<std::string>() + "/ranking?top=2");
  ASSERT_TRUE(res);
  EXPECT_EQ(json::parse(res->body)["ranking"]["entries"].size(), 2u);
}

TEST_F(ServiceTest, CatalogPaging) {
  const auto total = server_->store().catalog().size();
  auto res = client().Get("/catalog/items?page=1&page_size=50");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const auto j = json::parse(res->body);
  EXPECT_EQ(j["total"], total);
  EXPECT_EQ(j["pages"], (total + 49) / 50);
  EXPECT_EQ(j["items"].size(), 50u);
  EXPECT_EQ(j["items"][0]["id"], server_->store().catalog().item(50).id);

  auto a = client().Get("/catalog/sample?n=10&seed=4");
  auto b = client().Get("/catalog/sample?n=10&seed=4");
  ASSERT_TRUE(a && b);
  EXPECT_EQ(a->body, b->body);
  EXPECT_EQ(json::parse(a->body)["items"].size(), 10u);
}

TEST_F(ServiceTest, MediaServesBytes) {
  const auto& c = server_->store().catalog();
  auto res = client().Get("/media/" + c.item(0).id);
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->get_header_value("Content-Type"), "image/png");
  EXPECT_EQ(res->body, read_file(*c.item(0).media_path));

  res = client().Get("/media/" + c.item(1).id);
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);
}

TEST(ServiceConfigTest, RejectsUnknownKeysAndResolvesPaths) {
  usar::testing::TempDir dir;
  write_file_atomic(dir / "svc.json", R"({"port": 9000, "catalog": "cat.jsonl"})");
  const auto cfg = service::load_service_config(dir / "svc.json");
  EXPECT_EQ(cfg.port, 9000);
  ASSERT_TRUE(cfg.catalog_path);
  EXPECT_EQ(*cfg.catalog_path, dir.path() / "cat.jsonl");

  write_file_atomic(dir / "bad.json", R"({"prot": 9000})");
  EXPECT_THROW(service::load_service_config(dir / "bad.json"), usar::Error);
}

TEST(ServiceConfigTest, BankMustMatchCatalog) {
  usar::testing::TempDir dir;
  save_catalog(dir / "small.jsonl", usar::testing::random_catalog(40, 3, 1), CatalogFormat::jsonl);
  service::ServiceConfig cfg;
  cfg.catalog_path = dir / "small.jsonl";
  UsarConfig bank_cfg;
  bank_cfg.tradeoff_c = kDefaultBankTradeoffC;
  save_json(dir / "bank.json", train_bank(toy_corpus(), bank_cfg));
  cfg.bank_path = dir / "bank.json";
  EXPECT_THROW(service::load_models(cfg), usar::Error);
}

}  // namespace
