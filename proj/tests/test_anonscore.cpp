#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"
#include "tutela/anonscore.hpp"
#include "tutela/error.hpp"
#include "tutela/rng.hpp"

namespace tutela {
namespace {

using testing::addr;

// 1 - tanh(x) written through exp, independent of std::tanh.
double score_oracle(double beta, double kappa, double size) {
  const double e = std::exp(2.0 * beta * kappa * size);
  return 1.0 - (e - 1.0) / (e + 1.0);
}

Cluster cluster_of(std::initializer_list<std::pair<Address, double>> members, std::string heuristic) {
  Cluster c;
  for (const auto& [a, k] : members) c.members.push_back({a, MemberRole::eoa, k, heuristic});
  std::sort(c.members.begin(), c.members.end(), [](const auto& x, const auto& y) { return x.addr < y.addr; });
  return c;
}

TEST(Score, EmptyClusterIsFullyAnonymous) {
  EXPECT_EQ(score::anonymity_score(1.0, 0), 1.0);
  EXPECT_EQ(score::display_score(1.0), 100);
}

TEST(Score, SingleMember) {
  const double s = score::anonymity_score(1.0, 1);
  EXPECT_NEAR(s, 0.90033, 1e-5);
  EXPECT_NEAR(s, score_oracle(0.1, 1.0, 1.0), 1e-12);
  EXPECT_EQ(score::display_score(s), 90);
}

TEST(Score, LargeClusterScoresZero) {
  const double s = score::anonymity_score(1.0, 1000);
  EXPECT_LT(s, 1e-6);
  EXPECT_GE(s, 0.0);
  EXPECT_EQ(score::display_score(s), 0);
}

TEST(Score, NegativeInputsRejected) {
  EXPECT_THROW(score::anonymity_score(-0.1, 3), DomainError);
  EXPECT_THROW(score::anonymity_score(0.5, -1), DomainError);
  EXPECT_THROW(score::anonymity_score(std::nan(""), 1), DomainError);
}

TEST(Score, ConfigValidation) {
  score::ScoreConfig c;
  c.beta = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(score::anonymity_score(1.0, 1, c), ConfigError);
}

TEST(Score, BetaSteepens) {
  score::ScoreConfig steep;
  steep.beta = 0.5;
  EXPECT_LT(score::anonymity_score(1.0, 3, steep), score::anonymity_score(1.0, 3));
  EXPECT_NEAR(score::anonymity_score(1.0, 3, steep), score_oracle(0.5, 1.0, 3.0), 1e-12);
}

TEST(Display, RoundsHalfUp) {
  EXPECT_EQ(score::display_score(0.705), 71);
  EXPECT_EQ(score::display_score(0.125), 13);
  EXPECT_EQ(score::display_score(0.0049), 0);
  EXPECT_EQ(score::display_score(0.995), 100);
  EXPECT_EQ(score::display_score(0.7087), 71);
}

TEST(ScoreProperty, BoundsAndMonotonicity) {
  for (double kappa : {0.01, 0.3, 0.82, 1.0}) {
    double prev = 2.0;
    for (int size = 1; size <= 100; ++size) {
      const double s = score::anonymity_score(kappa, size);
      EXPECT_GE(s, 0.0);
      EXPECT_LE(s, 1.0);
      // Strict until tanh saturates in double precision.
      if (prev > 1e-15) {
        EXPECT_LT(s, prev) << kappa << " " << size;
      } else {
        EXPECT_LE(s, prev);
      }
      prev = s;
    }
  }
  auto rng = make_rng(41);
  for (int i = 0; i < 1000; ++i) {
    const double k1 = uniform_unit(rng), k2 = uniform_unit(rng);
    const double n = static_cast<double>(uniform_below(rng, 200));
    EXPECT_LE(score::anonymity_score(std::max(k1, k2), n), score::anonymity_score(std::min(k1, k2), n));
    const int d = score::display_score(score::anonymity_score(k1, n));
    EXPECT_GE(d, 0);
    EXPECT_LE(d, 100);
  }
}

TEST(Combined, NoClusters) {
  auto r = score::combined_report(addr(1), nullptr, nullptr, {});
  EXPECT_EQ(r.score_display, 100);
  EXPECT_EQ(r.score_unit, 1.0);
  EXPECT_EQ(r.cluster_size, 0u);
  EXPECT_TRUE(r.contributing.empty());
}

TEST(Combined, SameSingletonFromTwoSources) {
  auto dar = cluster_of({{addr(1), 1.0}}, "dar");
  auto node = cluster_of({{addr(1), 1.0}}, "node");
  auto one = score::combined_report(addr(1), &dar, nullptr, {});
  auto two = score::combined_report(addr(1), &dar, &node, {});
  EXPECT_EQ(one.score_unit, two.score_unit);
  EXPECT_EQ(two.cluster_size, 1u);
  EXPECT_EQ(two.contributing.size(), 2u);
}

TEST(Combined, UnionWithMaxKappa) {
  const Address a = addr(1), b = addr(2), c = addr(3);
  auto dar = cluster_of({{a, 1.0}, {b, 1.0}}, "dar");
  auto node = cluster_of({{b, 0.5}, {c, 0.5}}, "node");
  auto r = score::combined_report(a, &dar, &node, {});
  EXPECT_EQ(r.cluster_size, 3u);
  EXPECT_NEAR(r.mean_kappa, (1.0 + 1.0 + 0.5) / 3.0, 1e-12);
  EXPECT_NEAR(r.score_unit, score_oracle(0.1, 2.5 / 3.0, 3.0), 1e-12);
  ASSERT_EQ(r.contributing.size(), 2u);
  EXPECT_EQ(r.contributing[0].source, "dar");
  EXPECT_EQ(r.contributing[0].size, 2u);
  EXPECT_EQ(r.contributing[1].source, "node");
  EXPECT_DOUBLE_EQ(r.contributing[1].kappa, 0.5);
}

TEST(Combined, NodeKappaClampedToOne) {
  auto node = cluster_of({{addr(2), 1e6}, {addr(3), 4.0}}, "node");
  auto r = score::combined_report(addr(1), nullptr, &node, {});
  EXPECT_DOUBLE_EQ(r.mean_kappa, 1.0);
  EXPECT_NEAR(r.score_unit, score_oracle(0.1, 1.0, 2.0), 1e-12);
}

TEST(Combined, TornadoClustersJoinTheUnion) {
  auto dar = cluster_of({{addr(1), 1.0}, {addr(2), 1.0}}, "dar");
  std::vector<Cluster> tc{cluster_of({{addr(1), 0.9}, {addr(4), 0.9}}, "gas_price")};
  auto r = score::combined_report(addr(1), &dar, nullptr, tc);
  EXPECT_EQ(r.cluster_size, 3u);
  EXPECT_NEAR(r.mean_kappa, 2.9 / 3.0, 1e-12);
  EXPECT_EQ(r.contributing.back().source, "gas_price");
  EXPECT_EQ(r.score_display, score::display_score(r.score_unit));
}

TEST(Entropy, Values) {
  EXPECT_EQ(score::entropy(1), 0.0);
  EXPECT_NEAR(score::entropy(3), 1.0986122886681098, 1e-12);
  EXPECT_GT(score::entropy(97365), score::entropy(97364));
  EXPECT_TRUE(std::isfinite(score::entropy(97365)));
  EXPECT_THROW(score::entropy(0), DomainError);
}

TEST(InformationGain, Values) {
  EXPECT_EQ(score::information_gain(4, 4), 0.0);
  EXPECT_NEAR(score::information_gain(4, 2), 0.6931471805599453, 1e-12);
  EXPECT_NEAR(score::information_gain(4, 1), 1.3862943611198906, 1e-12);
  EXPECT_THROW(score::information_gain(4, 5), DomainError);
  EXPECT_THROW(score::information_gain(4, 0), DomainError);
}

TEST(InformationGain, Additivity) {
  auto rng = make_rng(42);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t d = 1 + uniform_below(rng, 100000);
    const std::size_t c1 = 1 + uniform_below(rng, d);
    const std::size_t c2 = 1 + uniform_below(rng, c1);
    EXPECT_NEAR(score::information_gain(d, c1) + score::information_gain(c1, c2), score::information_gain(d, c2),
                1e-12);
  }
}

}  // namespace
}  // namespace tutela
