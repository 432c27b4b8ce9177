#pragma once

#include <cstddef>
#include <vector>

#include "tutela/diffembed.hpp"

// Literal two-layer formulation of the walk-feature objective: a one-hot node passes
// through f1 (|V| -> d), a ReLU, and f2 (d -> 2h|V|), trained to predict the node's
// positional co-occurrence frequencies. Dense in 2h|V|, so only small graphs.
namespace tutela::embed::reference {

inline constexpr std::size_t kMaxNodes = 500;

// y(v): block (o - 1) counts nodes o positions before v, block (h + o - 1) nodes o
// positions after, for o in 1..h, summed over every sequence. A revisit of v at offset o
// counts like any other node.
struct CooccurrenceFeatures {
  std::size_t window = 0;
  std::size_t node_count = 0;
  std::vector<std::vector<double>> counts;

  std::size_t width() const { return 2 * window * node_count; }
  double at(NodeId v, std::size_t block, NodeId u) const { return counts[v][block * node_count + u]; }
};

CooccurrenceFeatures cooccurrence_features(const WalkCorpus& corpus, std::size_t window);

enum class Loss { squared_euclidean, cross_entropy };

struct ReferenceModel {
  EmbeddingTable table;
  std::vector<double> epoch_loss;
};

// Plain SGD, one node per step in shuffled order. Targets are y(v) normalized to sum 1;
// nodes with an all-zero y(v) are skipped. Throws DomainError above kMaxNodes nodes
// or on an empty corpus.
ReferenceModel train_reference(const WalkCorpus& corpus, const EmbedConfig& config, Loss loss);

}  // namespace tutela::embed::reference
