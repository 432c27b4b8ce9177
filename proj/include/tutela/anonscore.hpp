#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tutela/cluster.hpp"
#include "tutela/types.hpp"

namespace tutela::score {

struct ScoreConfig {
  // Slope of the tanh penalty; larger values punish big clusters harder.
  double beta = 0.1;
  int display_scale = 100;

  void validate() const;
};

// 1 - tanh(beta * kappa * cluster_size). Throws DomainError on negative inputs.
double anonymity_score(double kappa, double cluster_size, const ScoreConfig& config = {});

// round-half-up of scale * score.
int display_score(double score_unit, const ScoreConfig& config = {});

struct SourceCluster {
  std::string source;
  std::size_t size = 0;
  double kappa = 0.0;
};

struct AnonymityReport {
  Address addr;
  double score_unit = 1.0;
  int score_display = 100;
  // Merged view across sources.
  std::size_t cluster_size = 0;
  double mean_kappa = 0.0;
  std::vector<SourceCluster> contributing;
};

// Sources are merged by member union with the per-member maximum kappa, each clamped to
// [0, 1] first. The score uses the union size and its mean kappa; no clusters at all
// scores 1.
AnonymityReport combined_report(const Address& addr, const Cluster* dar_cluster, const Cluster* node_cluster,
                                std::span<const Cluster> tornado_clusters, const ScoreConfig& config = {});

// Shannon entropy of a uniform anonymity set, in nats. Throws DomainError for size 0.
double entropy(std::size_t set_size);

// ln(prior) - ln(refined), requiring 1 <= refined <= prior.
double information_gain(std::size_t prior_size, std::size_t refined_size);

}  // namespace tutela::score
