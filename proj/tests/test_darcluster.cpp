#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "oracles.hpp"
#include "test_support.hpp"
#include "tutela/darcluster.hpp"
#include "tutela/error.hpp"

namespace tutela {
namespace {

using dar::DarConfig;
using dar::DepositTuple;
using testing::addr;
using testing::ether;
using testing::transfer;

const Address kCex = addr(1, 0xce);
const Address kEoa = addr(1);
const Address kDeposit = addr(2);

LedgerStore base_store() {
  LedgerStore s;
  s.add_known_address({kCex, "Exchange", Category::cex_main});
  return s;
}

DepositTuple tuple(std::string_view a_r, std::string_view a_f, std::uint64_t t_r, std::uint64_t t_f) {
  DepositTuple t;
  t.eoa = kEoa;
  t.deposit = kDeposit;
  t.exchange = kCex;
  t.a_r = ether(a_r);
  t.a_f = ether(a_f);
  t.t_r = t_r;
  t.t_f = t_f;
  return t;
}

DepositTuple edge(const Address& eoa, const Address& deposit, double kappa) {
  DepositTuple t;
  t.eoa = eoa;
  t.deposit = deposit;
  t.exchange = kCex;
  t.kappa = kappa;
  return t;
}

TEST(DarConfig, DefaultsAndValidation) {
  DarConfig c;
  EXPECT_DOUBLE_EQ(c.alpha, 0.01);
  EXPECT_EQ(c.tau, 3200u);
  EXPECT_EQ(c.alpha_wei().value(), kWeiPerEther / 100);
  EXPECT_THROW((DarConfig{0.0, 3200}).validate(), ConfigError);
  EXPECT_THROW((DarConfig{-1.0, 3200}).validate(), ConfigError);
  EXPECT_THROW((DarConfig{0.01, 0}).validate(), ConfigError);
}

TEST(DetectTuples, ForwardWithFeeAndDelay) {
  auto s = base_store();
  s.add_transaction(transfer(1, kEoa, kDeposit, ether("1.000"), 100));
  s.add_transaction(transfer(2, kDeposit, kCex, ether("0.998"), 600));
  s.seal();
  auto tuples = dar::detect_tuples(s, {});
  ASSERT_EQ(tuples.size(), 1u);
  EXPECT_EQ(tuples[0].eoa, kEoa);
  EXPECT_EQ(tuples[0].deposit, kDeposit);
  EXPECT_EQ(tuples[0].exchange, kCex);
  EXPECT_EQ(tuples[0].t_r, 100u);
  EXPECT_EQ(tuples[0].t_f, 600u);
  EXPECT_NEAR(tuples[0].kappa, 0.821875, 1e-12);
}

TEST(DetectTuples, DelayBeyondTauGivesNothing) {
  auto s = base_store();
  s.add_transaction(transfer(1, kEoa, kDeposit, ether("1"), 100));
  s.add_transaction(transfer(2, kDeposit, kCex, ether("1"), 4000));
  s.seal();
  EXPECT_TRUE(dar::detect_tuples(s, {}).empty());
}

TEST(DetectTuples, RegisteredCandidateExcluded) {
  auto s = base_store();
  const Address dex = addr(3, 0xd0);
  s.add_known_address({dex, "Dex", Category::dex});
  s.add_transaction(transfer(1, kEoa, dex, ether("1"), 100));
  s.add_transaction(transfer(2, dex, kCex, ether("1"), 110));
  s.seal();
  EXPECT_TRUE(dar::detect_tuples(s, {}).empty());
}

TEST(DetectTuples, MissingExchangeIsConfigError) {
  LedgerStore s;
  s.add_transaction(transfer(1, kEoa, kDeposit, ether("1"), 100));
  s.seal();
  EXPECT_THROW(dar::detect_tuples(s, {}), ConfigError);
}

TEST(DetectTuples, ForwardBeforeReceiptIgnored) {
  auto s = base_store();
  s.add_transaction(transfer(1, kDeposit, kCex, ether("1"), 90));
  s.add_transaction(transfer(2, kEoa, kDeposit, ether("1"), 100));
  s.seal();
  EXPECT_TRUE(dar::detect_tuples(s, {}).empty());
}

TEST(DetectTuples, AmountGapBeyondAlpha) {
  auto s = base_store();
  s.add_transaction(transfer(1, kEoa, kDeposit, ether("1"), 100));
  s.add_transaction(transfer(2, kDeposit, kCex, ether("0.989"), 100));
  s.seal();
  EXPECT_TRUE(dar::detect_tuples(s, {}).empty());
}

TEST(DetectTuples, EarliestForwardIsUsed) {
  auto s = base_store();
  s.add_transaction(transfer(1, kEoa, kDeposit, ether("1"), 100));
  s.add_transaction(transfer(2, kDeposit, kCex, ether("5"), 150));
  s.add_transaction(transfer(3, kDeposit, kCex, ether("1"), 200));
  s.seal();
  // The first forward at or after the receipt is out of the amount threshold, so no match.
  EXPECT_TRUE(dar::detect_tuples(s, {}).empty());
}

TEST(DetectTuples, EachReceiptMatchedOnce) {
  auto s = base_store();
  s.add_transaction(transfer(1, kEoa, kDeposit, ether("1"), 100));
  s.add_transaction(transfer(2, kDeposit, kCex, ether("1"), 100));
  s.add_transaction(transfer(3, kDeposit, kCex, ether("1"), 120));
  s.seal();
  auto tuples = dar::detect_tuples(s, {});
  ASSERT_EQ(tuples.size(), 1u);
  EXPECT_EQ(tuples[0].kappa, 1.0);
}

TEST(TupleConfidence, Endpoints) {
  DarConfig c;
  EXPECT_DOUBLE_EQ(dar::tuple_confidence(tuple("1", "1", 100, 100), c), 1.0);
  EXPECT_NEAR(dar::tuple_confidence(tuple("1", "0.99", 100, 3300), c), 0.0, 1e-12);
  EXPECT_NEAR(dar::tuple_confidence(tuple("1", "0.995", 100, 1700), c), 0.5, 1e-12);
  EXPECT_NEAR(dar::tuple_confidence(tuple("1", "0.998", 100, 600), c), 0.821875, 1e-12);
}

TEST(TupleConfidence, ViolatedThresholdsThrow) {
  DarConfig c;
  EXPECT_THROW(dar::tuple_confidence(tuple("1", "0.98", 100, 100), c), DomainError);
  EXPECT_THROW(dar::tuple_confidence(tuple("1", "1", 100, 3301), c), DomainError);
  EXPECT_THROW(dar::tuple_confidence(tuple("1", "1", 100, 99), c), DomainError);
}

TEST(BuildClusters, ChainedDepositsMerge) {
  const Address a = addr(10), b = addr(11), c = addr(12), d1 = addr(20), d2 = addr(21);
  std::vector<DepositTuple> ts{edge(a, d1, 1), edge(b, d1, 1), edge(b, d2, 1), edge(c, d2, 1)};
  auto clusters = dar::build_clusters(ts);
  ASSERT_EQ(clusters.size(), 1u);
  std::set<Address> members;
  for (const auto& m : clusters[0].members) members.insert(m.addr);
  EXPECT_EQ(members, (std::set<Address>{a, b, c, d1, d2}));
  EXPECT_EQ(clusters[0].find(d1)->role, MemberRole::deposit);
  EXPECT_EQ(clusters[0].find(a)->role, MemberRole::eoa);
}

TEST(BuildClusters, DisjointTuplesStaySeparate) {
  std::vector<DepositTuple> ts{edge(addr(10), addr(20), 0.5), edge(addr(11), addr(21), 0.7)};
  auto clusters = dar::build_clusters(ts);
  ASSERT_EQ(clusters.size(), 2u);
  EXPECT_EQ(clusters[0].members.size(), 2u);
  EXPECT_EQ(clusters[1].members.size(), 2u);
  EXPECT_EQ(clusters[0].cluster_id, 0u);
  EXPECT_EQ(clusters[1].cluster_id, 1u);
}

TEST(BuildClusters, SingleTupleKappaCarriesToEoa) {
  std::vector<DepositTuple> ts{edge(addr(10), addr(20), 0.82)};
  auto clusters = dar::build_clusters(ts);
  ASSERT_EQ(clusters.size(), 1u);
  EXPECT_DOUBLE_EQ(clusters[0].find(addr(10))->kappa, 0.82);
  EXPECT_DOUBLE_EQ(clusters[0].find(addr(20))->kappa, 0.82);
  EXPECT_EQ(clusters[0].find(addr(10))->heuristic, "dar");
}

TEST(BuildClusters, DepositTakesBestAndEoaTakesMean) {
  const Address a = addr(10), b = addr(11), d1 = addr(20), d2 = addr(21);
  std::vector<DepositTuple> ts{edge(a, d1, 0.4), edge(a, d1, 0.9), edge(a, d2, 0.5), edge(b, d2, 0.3)};
  auto clusters = dar::build_clusters(ts);
  ASSERT_EQ(clusters.size(), 1u);
  const auto& c = clusters[0];
  EXPECT_DOUBLE_EQ(c.find(d1)->kappa, 0.9);
  EXPECT_DOUBLE_EQ(c.find(d2)->kappa, 0.5);
  EXPECT_DOUBLE_EQ(c.find(a)->kappa, 0.7);
  EXPECT_DOUBLE_EQ(c.find(b)->kappa, 0.7);
}

TEST(BuildClusters, EmptyInput) { EXPECT_TRUE(dar::build_clusters({}).empty()); }

TEST(DarProperty, ComponentsMatchFloodFill) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto rng = make_rng(seed, 11);
    auto ts = oracle::random_tuples(rng, 200);
    auto clusters = dar::build_clusters(ts);
    EXPECT_EQ(oracle::partition_of(clusters), oracle::flood_fill(ts)) << "seed " << seed;
    std::set<Address> seen;
    for (const auto& c : clusters) {
      ASSERT_FALSE(c.members.empty());
      for (const auto& m : c.members) {
        EXPECT_TRUE(seen.insert(m.addr).second);
        EXPECT_GT(m.kappa, 0.0);
        EXPECT_LE(m.kappa, 1.0);
      }
    }
  }
}

TEST(DarProperty, ShrinkingThresholdsNeverAddsTuples) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto rng = make_rng(seed, 12);
    auto store = oracle::random_dar_store(rng);
    DarConfig wide{0.01, 3200};
    DarConfig narrow{0.01 * (0.1 + 0.9 * uniform_unit(rng)), 1 + uniform_below(rng, 3200)};
    auto big = dar::detect_tuples(store, wide);
    auto small = dar::detect_tuples(store, narrow);
    for (const auto& t : small) {
      bool found = std::any_of(big.begin(), big.end(), [&](const auto& u) { return same_match(t, u); });
      EXPECT_TRUE(found) << "seed " << seed;
    }
  }
}

TEST(DarProperty, KappaBoundsAndExclusion) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto rng = make_rng(seed, 13);
    auto store = oracle::random_dar_store(rng);
    DarConfig c;
    auto ts = dar::detect_tuples(store, c);
    for (const auto& t : ts) {
      EXPECT_GT(t.kappa, 0.0);
      EXPECT_LE(t.kappa, 1.0);
      EXPECT_EQ(t.kappa == 1.0, t.a_f == t.a_r && t.t_f == t.t_r);
      EXPECT_GE(t.t_f, t.t_r);
      EXPECT_LE(t.t_f - t.t_r, c.tau);
      EXPECT_LE(t.a_f.abs_diff(t.a_r), c.alpha_wei());
      EXPECT_FALSE(store.registry().contains(t.deposit));
      EXPECT_TRUE(store.registry().is(t.exchange, Category::cex_main));
      EXPECT_NEAR(t.kappa, oracle::dar_kappa(t, c), 1e-12);
    }
    for (const auto& cl : dar::build_clusters(ts)) {
      for (const auto& m : cl.members) {
        if (m.role == MemberRole::deposit) {
          EXPECT_FALSE(store.registry().contains(m.addr));
        }
      }
    }
  }
}

}  // namespace
}  // namespace tutela
