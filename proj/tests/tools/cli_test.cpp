#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "test_support.hpp"
#include "usar/dataset_io.hpp"
#include "usar/evaluation.hpp"
#include "usar/serialization.hpp"
#include "usar/synthetic.hpp"

using namespace usar;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// Runs the installed-style binary through the shell, capturing stdout.
Run run_binary(const std::string& args) {
  const std::string cmd = std::string(USAR_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {-1, "", ""};
  std::string out;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out, ""};
}

TEST(ParseIntList, Forms) {
  EXPECT_EQ(cli::parse_int_list("1..5"), (std::vector<int>{1, 2, 3, 4, 5}));
  EXPECT_EQ(cli::parse_int_list("5,10,15"), (std::vector<int>{5, 10, 15}));
  EXPECT_EQ(cli::parse_int_list("3"), (std::vector<int>{3}));
  EXPECT_ANY_THROW(cli::parse_int_list("5..1"));
  EXPECT_ANY_THROW(cli::parse_int_list("a,b"));
  EXPECT_ANY_THROW(cli::parse_int_list(""));
}

TEST(Cli, SweepMatchesInProcessSweep) {
  const auto r = run({"sweep", "--m", "5", "--interactions", "1..5", "--reps", "20"});
  ASSERT_EQ(r.code, 0) << r.err;

  const auto cat = toy_corpus();
  UsarConfig bank_cfg;
  bank_cfg.tradeoff_c = kDefaultBankTradeoffC;
  const auto bank = train_bank(cat, bank_cfg);
  UsarConfig cfg;
  cfg.rng_seed = 0;
  const auto expected = parameter_sweep(cat, bank, cfg, {5}, {1, 2, 3, 4, 5}, 20, SweepOptions{});
  EXPECT_EQ(r.out, sweep_to_csv(expected));

  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "m,interactions,mean_rho,std_rho,repetitions");
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  EXPECT_EQ(rows, 5);
}

TEST(Cli, SimulateIsDeterministic) {
  const auto a = run({"simulate", "--seed", "7"});
  const auto b = run({"simulate", "--seed", "7"});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  const auto j = json::parse(a.out);
  EXPECT_EQ(j["seed"], 7);
  EXPECT_GE(j["rho"].get<double>(), -1.0);
  EXPECT_LE(j["rho"].get<double>(), 1.0);
  EXPECT_EQ(j["usar_ranking"].size(), j["n"].get<std::size_t>());
}

TEST(Cli, MissingFileExitsTwo) {
  const auto r = run({"ingest", "missing.jsonl"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("file not found"), std::string::npos);
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run({"ingest", "x.jsonl", "--bogus"}).code, 1);
  EXPECT_EQ(run({"no-such-command"}).code, 1);
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"sweep", "--output", "xml"}).code, 1);
  EXPECT_EQ(run({"sweep", "--m", "1..x"}).code, 1);
}

TEST(Cli, GenerateTrainAndScore) {
  usar::testing::TempDir dir;
  const auto cat_path = (dir / "cat.csv").string();
  auto r = run({"gen-synthetic", "n_items=60,dim=4,clusters=3,seed=11", "--format", "csv",
                "--out", cat_path});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto cat = load_catalog(cat_path);
  EXPECT_EQ(cat.size(), 60u);
  EXPECT_EQ(cat.dim(), 4u);

  r = run({"ingest", cat_path});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["items"], 60);

  const auto bank_path = (dir / "bank.json").string();
  r = run({"train-bank", "--catalog", cat_path, "--out", bank_path});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto bank = load_bank(bank_path);
  EXPECT_EQ(bank.size(), 3u);

  UserAestheticDistribution usad;
  usad.attribute_names = bank.attribute_names;
  usad.dist.probs = {0.7, 0.2, 0.1};
  usad.source_item_count = 10;
  save_json(dir / "usad.json", usad);

  r = run({"score", cat_path, (dir / "usad.json").string(), "--bank", bank_path, "--top", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "rank,id,score,undefined");
  std::vector<std::string> rows;
  while (std::getline(lines, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0].substr(0, 2), "1,");

  // A bank trained elsewhere is refused.
  save_json(dir / "toy_bank.json", train_bank(toy_corpus(), UsarConfig{}));
  r = run({"score", cat_path, (dir / "usad.json").string(), "--bank", (dir / "toy_bank.json").string()});
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, BinaryExitCodes) {
  EXPECT_EQ(run_binary("ingest /nonexistent/missing.jsonl").code, 2);
  EXPECT_EQ(run_binary("frobnicate").code, 1);
  const auto help = run_binary("--help");
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("sweep"), std::string::npos);
}

}  // namespace
