#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tutela/ledger.hpp"
#include "tutela/rng.hpp"
#include "tutela/types.hpp"

// Diff2Vec node embeddings: diffusion subgraphs around each node are turned into Euler
// walks over the doubled-edge multigraph, and a skip-gram model with negative sampling
// is trained on the walks.
namespace tutela::embed {

using NodeId = std::uint32_t;

struct Neighbor {
  NodeId id;
  std::uint32_t weight;
};

struct Edge {
  NodeId u;
  NodeId v;
  std::uint32_t weight = 1;
};

// Undirected graph with interaction-count weights.
class InteractionGraph {
 public:
  InteractionGraph() = default;
  // Edge endpoints index `nodes`; duplicate edges accumulate weight.
  // Throws DomainError on self-loops, zero weights, bad ids or duplicate nodes.
  InteractionGraph(std::vector<Address> nodes, std::span<const Edge> edges);

  std::size_t node_count() const { return addresses_.size(); }
  std::size_t edge_count() const { return edge_count_; }
  const Address& address(NodeId v) const { return addresses_[v]; }
  const std::vector<Address>& addresses() const { return addresses_; }
  std::optional<NodeId> find(const Address& a) const;

  // Sorted by neighbor id.
  std::span<const Neighbor> neighbors(NodeId v) const { return adjacency_[v]; }
  std::size_t degree(NodeId v) const { return adjacency_[v].size(); }
  std::uint32_t weight(NodeId u, NodeId v) const;
  bool adjacent(NodeId u, NodeId v) const { return weight(u, v) > 0; }

 private:
  std::vector<Address> addresses_;
  std::unordered_map<Address, NodeId> index_;
  std::vector<std::vector<Neighbor>> adjacency_;
  std::size_t edge_count_ = 0;
};

// w(u, v) counts transactions between u and v in either direction; self-transactions
// add no edge but their address still becomes a node. Node ids follow address order.
InteractionGraph build_graph(const LedgerStore& store);

// A tree grown from nodes.front(); edges hold graph node ids.
struct DiffusionSubgraph {
  std::vector<NodeId> nodes;
  std::vector<std::pair<NodeId, NodeId>> edges;
};

// Repeatedly picks a uniform node u of the subgraph and a uniform neighbor w of u in
// the graph, adding w and (u, w) when w is new, until the subgraph holds `size` nodes or
// the start node's component is exhausted. Edge weights are ignored.
DiffusionSubgraph sample_subgraph(const InteractionGraph& g, NodeId start, std::size_t size, Rng& rng);

// Euler circuit of the subgraph with every edge doubled, starting and ending at
// nodes.front(). Next edges are picked in a random order drawn from rng.
// Throws DomainError when the subgraph is disconnected or references unknown nodes.
std::vector<NodeId> euler_sequence(const DiffusionSubgraph& sub, Rng& rng);
std::vector<NodeId> euler_sequence(const DiffusionSubgraph& sub);

struct EmbedConfig {
  std::size_t dim = 128;
  std::size_t subgraph_size = 40;
  std::size_t window = 5;
  std::size_t walks_per_node = 10;
  std::size_t epochs = 5;
  double learning_rate = 0.025;
  std::size_t negative_samples = 5;
  std::uint64_t seed = 0;
  // Corpus generation only; training always runs on one thread.
  std::size_t threads = 1;

  void validate() const;
};

struct WalkCorpus {
  // Node id -> address, copied from the graph the walks came from.
  std::vector<Address> vocabulary;
  // walks_per_node consecutive sequences per start node, in node order.
  std::vector<std::vector<NodeId>> sequences;
  std::size_t walks_per_node = 0;

  std::span<const std::vector<NodeId>> walks_of(NodeId start) const {
    return std::span(sequences).subspan(start * walks_per_node, walks_per_node);
  }
};

// Per-node rng streams derived from (seed, node id), so output is independent of threads.
WalkCorpus build_corpus(const InteractionGraph& g, const EmbedConfig& config);

// One line per sequence, addresses separated by single spaces.
void write_corpus(std::ostream& out, const WalkCorpus& corpus);

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return addresses_.size(); }
  bool empty() const { return addresses_.empty(); }

  void add(const Address& addr, std::span<const float> vec);
  std::optional<std::size_t> find(const Address& addr) const;
  const Address& address(std::size_t i) const { return addresses_[i]; }
  std::span<const float> vector(std::size_t i) const { return std::span(data_).subspan(i * dim_, dim_); }
  std::span<const float> vector(const Address& addr) const;

  // Header: "TEMB", u32 version, u32 dim, u64 count; then per node 20 address bytes and
  // dim float32 values. All integers and floats little-endian.
  void save(std::ostream& out) const;
  static EmbeddingTable load(std::istream& in);

  friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<Address> addresses_;
  std::vector<float> data_;
  std::unordered_map<Address, std::size_t> index_;
};

struct TrainStats {
  // Mean skip-gram loss per (center, context) pair, one entry per epoch.
  std::vector<double> epoch_loss;
};

// Skip-gram with negative sampling over the corpus; one vector per node that appears.
// Throws DomainError on an empty corpus.
EmbeddingTable train(const WalkCorpus& corpus, const EmbedConfig& config, TrainStats* stats = nullptr);

inline constexpr double kKappaMax = 1e6;
inline constexpr double kMinDistance = 1e-6;

struct NeighborHit {
  Address addr;
  double distance = 0.0;
  double kappa = 0.0;
};

// Inverse Euclidean distance, clamped to kKappaMax below kMinDistance.
double inverse_distance_confidence(double distance);

// Exact search: min(k, size - 1) nearest other entries, ascending distance, ties by
// address. Throws NotFoundError when `query` has no vector; DomainError when k == 0.
std::vector<NeighborHit> neighbors(const EmbeddingTable& table, const Address& query, std::size_t k);

}  // namespace tutela::embed
