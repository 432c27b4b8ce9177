#include "tutela/anonscore.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "tutela/error.hpp"

namespace tutela::score {

void ScoreConfig::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be > 0");
  if (display_scale <= 0) throw ConfigError("display scale must be > 0");
}

double anonymity_score(double kappa, double cluster_size, const ScoreConfig& config) {
  config.validate();
  if (kappa < 0.0 || cluster_size < 0.0 || std::isnan(kappa) || std::isnan(cluster_size)) {
    throw DomainError("anonymity score inputs must be non-negative");
  }
  return std::clamp(1.0 - std::tanh(config.beta * kappa * cluster_size), 0.0, 1.0);
}

int display_score(double score_unit, const ScoreConfig& config) {
  return static_cast<int>(std::floor(static_cast<double>(config.display_scale) * score_unit + 0.5));
}

AnonymityReport combined_report(const Address& addr, const Cluster* dar_cluster, const Cluster* node_cluster,
                                std::span<const Cluster> tornado_clusters, const ScoreConfig& config) {
  AnonymityReport report;
  report.addr = addr;

  std::map<Address, double> merged;
  auto absorb = [&](const Cluster& c, std::string source) {
    double sum = 0.0;
    for (const auto& m : c.members) {
      double k = std::clamp(m.kappa, 0.0, 1.0);
      sum += k;
      auto [it, inserted] = merged.emplace(m.addr, k);
      if (!inserted) it->second = std::max(it->second, k);
    }
    double mean = c.members.empty() ? 0.0 : sum / static_cast<double>(c.members.size());
    report.contributing.push_back({std::move(source), c.members.size(), mean});
  };
  if (dar_cluster) absorb(*dar_cluster, "dar");
  if (node_cluster) absorb(*node_cluster, "node");
  for (const auto& c : tornado_clusters) {
    absorb(c, c.members.empty() ? std::string("tornado") : c.members.front().heuristic);
  }

  report.cluster_size = merged.size();
  if (!merged.empty()) {
    double sum = 0.0;
    for (const auto& [_, k] : merged) sum += k;
    report.mean_kappa = sum / static_cast<double>(merged.size());
  }
  report.score_unit = anonymity_score(report.mean_kappa, static_cast<double>(report.cluster_size), config);
  report.score_display = display_score(report.score_unit, config);
  return report;
}

double entropy(std::size_t set_size) {
  if (set_size == 0) throw DomainError("entropy of an empty anonymity set");
  return std::log(static_cast<double>(set_size));
}

double information_gain(std::size_t prior_size, std::size_t refined_size) {
  if (refined_size == 0 || refined_size > prior_size) {
    throw DomainError("information gain requires 1 <= refined <= prior");
  }
  return std::log(static_cast<double>(prior_size)) - std::log(static_cast<double>(refined_size));
}

}  // namespace tutela::score
