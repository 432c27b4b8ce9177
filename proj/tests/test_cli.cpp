#include <gtest/gtest.h>

#include <json.hpp>

#include <sstream>

#include "test_support.hpp"
#include "tutela/cli.hpp"

namespace tutela {
namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

const std::string kTiny = testing::fixture("tiny").string();

TEST(Cli, HelpExitsZero) {
  auto r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("audit"), std::string::npos);
}

TEST(Cli, UnknownFlagIsUsageError) {
  EXPECT_EQ(run({"audit", "--data", kTiny, "--colour"}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({}).code, 1);
}

TEST(Cli, MissingDataIsError2) {
  auto r = run({"audit", "--data", "/nonexistent/tutela"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("error"), std::string::npos);
}

TEST(Cli, Audit) {
  auto r = run({"audit", "--data", kTiny});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("eth-1,4,1,3"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("eth-0.1,2,1,1"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("eth-10,2,0,2"), std::string::npos) << r.out;
  auto one = run({"audit", "--data", kTiny, "--pool", "eth-1"});
  EXPECT_EQ(one.code, 0);
  EXPECT_EQ(one.out.find("eth-10"), std::string::npos);
  EXPECT_EQ(run({"audit", "--data", kTiny, "--pool", "eth-1000"}).code, 2);
}

TEST(Cli, ScoreKnownAndUnknown) {
  auto known = run({"score", "--data", kTiny, "0xa1a1a1a1a1a1a1a1a1a1a1a1a1a1a1a1a1a1a106"});
  ASSERT_EQ(known.code, 0) << known.err;
  EXPECT_EQ(nlohmann::json::parse(known.out)["score_display"], 71);

  auto unknown = run({"score", "--data", kTiny, "0x9999999999999999999999999999999999999999"});
  ASSERT_EQ(unknown.code, 0) << unknown.err;
  EXPECT_EQ(nlohmann::json::parse(unknown.out)["score_display"], 100);

  EXPECT_EQ(run({"score", "--data", kTiny, "0x99"}).code, 1);
}

TEST(Cli, IngestReportsAndNormalizes) {
  const auto out_dir = testing::scratch_dir("cli-ingest");
  auto r = run({"ingest", "--data", kTiny, "--out", out_dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"transactions.csv", "events.csv", "known_addresses.csv", "pools.csv"}) {
    EXPECT_TRUE(std::filesystem::exists(out_dir / f)) << f;
  }
  // A normalized copy loads back to the same audit.
  EXPECT_NE(run({"audit", "--data", out_dir.string()}).out.find("eth-1,4,1,3"), std::string::npos);
}

TEST(Cli, ClusterAndRevealToStdout) {
  auto c = run({"cluster-dar", "--data", kTiny, "--out", "-"});
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_NE(c.out.find("0xd3d3d3d3d3d3d3d3d3d3d3d3d3d3d3d3d3d3d308"), std::string::npos);
  EXPECT_EQ(run({"cluster-dar", "--data", kTiny, "--out", "-", "--alpha", "-1"}).code, 2);

  auto t = run({"tornado-reveal", "--data", kTiny, "--out", "-"});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_NE(t.out.find("address_match"), std::string::npos);
  EXPECT_NE(t.out.find("torn_mining"), std::string::npos);
  // eth-10 has no rate, but none of its withdraws claims points.
  EXPECT_EQ(t.err.find("warning"), std::string::npos);
}

TEST(Cli, SynthIsDeterministic) {
  const auto dir = testing::scratch_dir("cli-synth");
  const auto config = dir / "small.toml";
  std::ofstream(config) << "n_entities = 150\nintra_entity_txs = 500\nnoise_txs = 2000\n";
  const auto a = dir / "a", b = dir / "b";
  ASSERT_EQ(run({"synth", "--config", config.string(), "--seed", "7", "--out", a.string()}).code, 0);
  ASSERT_EQ(run({"synth", "--config", config.string(), "--seed", "7", "--out", b.string()}).code, 0);
  for (const char* f : {"transactions.csv", "events.csv", "known_addresses.csv", "pools.csv", "truth.json"}) {
    const auto text = testing::read_file(a / f);
    EXPECT_FALSE(text.empty()) << f;
    EXPECT_EQ(text, testing::read_file(b / f)) << f;
  }
  EXPECT_EQ(run({"synth", "--config", (dir / "missing.toml").string()}).code, 2);
}

}  // namespace
}  // namespace tutela
