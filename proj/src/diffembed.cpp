#include "tutela/diffembed.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <map>
#include <stdexcept>
#include <thread>

#include "tutela/error.hpp"

namespace tutela::embed {

InteractionGraph::InteractionGraph(std::vector<Address> nodes, std::span<const Edge> edges)
    : addresses_(std::move(nodes)), adjacency_(addresses_.size()) {
  for (NodeId i = 0; i < addresses_.size(); ++i) {
    if (!index_.emplace(addresses_[i], i).second) throw DomainError("duplicate graph node");
  }
  std::map<std::pair<NodeId, NodeId>, std::uint64_t> weights;
  for (const auto& e : edges) {
    if (e.u >= addresses_.size() || e.v >= addresses_.size()) throw DomainError("edge references unknown node");
    if (e.u == e.v) throw DomainError("self-loop in interaction graph");
    if (e.weight == 0) throw DomainError("edge weight must be >= 1");
    weights[std::minmax(e.u, e.v)] += e.weight;
  }
  for (const auto& [key, w] : weights) {
    auto weight = static_cast<std::uint32_t>(std::min<std::uint64_t>(w, UINT32_MAX));
    adjacency_[key.first].push_back({key.second, weight});
    adjacency_[key.second].push_back({key.first, weight});
  }
  for (auto& adj : adjacency_) {
    std::sort(adj.begin(), adj.end(), [](const Neighbor& a, const Neighbor& b) { return a.id < b.id; });
  }
  edge_count_ = weights.size();
}

std::optional<NodeId> InteractionGraph::find(const Address& a) const {
  auto it = index_.find(a);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t InteractionGraph::weight(NodeId u, NodeId v) const {
  const auto& adj = adjacency_[u];
  auto it = std::lower_bound(adj.begin(), adj.end(), v, [](const Neighbor& n, NodeId x) { return n.id < x; });
  return it != adj.end() && it->id == v ? it->weight : 0;
}

InteractionGraph build_graph(const LedgerStore& store) {
  std::vector<Address> nodes;
  nodes.reserve(store.transactions().size());
  for (const auto& tx : store.transactions()) {
    nodes.push_back(tx.from_addr);
    nodes.push_back(tx.to_addr);
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

  auto id_of = [&](const Address& a) {
    return static_cast<NodeId>(std::lower_bound(nodes.begin(), nodes.end(), a) - nodes.begin());
  };
  std::vector<Edge> edges;
  edges.reserve(store.transactions().size());
  for (const auto& tx : store.transactions()) {
    if (tx.is_self()) continue;
    edges.push_back({id_of(tx.from_addr), id_of(tx.to_addr), 1});
  }
  return InteractionGraph(std::move(nodes), edges);
}

namespace {

// Local membership for a subgraph of at most a few dozen nodes.
class SubgraphMembers {
 public:
  std::optional<std::size_t> local(NodeId v) const {
    auto it = index_.find(v);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t add(NodeId v) {
    auto i = index_.size();
    index_.emplace(v, i);
    return i;
  }

 private:
  std::unordered_map<NodeId, std::size_t> index_;
};

}  // namespace

DiffusionSubgraph sample_subgraph(const InteractionGraph& g, NodeId start, std::size_t size, Rng& rng) {
  if (start >= g.node_count()) throw DomainError("start node not in graph");
  if (size == 0) throw DomainError("subgraph size must be >= 1");

  DiffusionSubgraph sub;
  sub.nodes.push_back(start);
  SubgraphMembers members;
  members.add(start);
  // inside[i]: neighbors of sub.nodes[i] already in the subgraph. A node is "open" while
  // some neighbor is still outside; with no open node the component is exhausted.
  std::vector<std::size_t> inside{0};
  std::size_t open = g.degree(start) > 0 ? 1 : 0;

  while (sub.nodes.size() < size && open > 0) {
    NodeId u = sub.nodes[uniform_below(rng, sub.nodes.size())];
    auto nbrs = g.neighbors(u);
    if (nbrs.empty()) continue;
    NodeId w = nbrs[uniform_below(rng, nbrs.size())].id;
    if (members.local(w)) continue;

    std::size_t w_local = members.add(w);
    sub.nodes.push_back(w);
    sub.edges.emplace_back(u, w);
    inside.push_back(0);
    // Count adjacency between w and current members via whichever side is smaller.
    auto bump = [&](std::size_t x_local) {
      ++inside[x_local];
      ++inside[w_local];
      if (inside[x_local] == g.degree(sub.nodes[x_local])) --open;
    };
    if (g.degree(w) <= sub.nodes.size()) {
      for (const auto& n : g.neighbors(w)) {
        if (auto x = members.local(n.id); x && *x != w_local) bump(*x);
      }
    } else {
      for (std::size_t x = 0; x + 1 < sub.nodes.size(); ++x) {
        if (g.adjacent(w, sub.nodes[x])) bump(x);
      }
    }
    if (inside[w_local] < g.degree(w)) ++open;
  }
  return sub;
}

std::vector<NodeId> euler_sequence(const DiffusionSubgraph& sub, Rng& rng) {
  if (sub.nodes.empty()) throw DomainError("empty subgraph");
  SubgraphMembers members;
  for (auto v : sub.nodes) {
    if (members.local(v)) throw DomainError("duplicate subgraph node");
    members.add(v);
  }
  const std::size_t n = sub.nodes.size();

  // Doubled multigraph: original edge e yields multi-edges 2e and 2e+1.
  struct Arc {
    std::size_t to;
    std::size_t edge;
  };
  std::vector<std::vector<Arc>> arcs(n);
  for (std::size_t e = 0; e < sub.edges.size(); ++e) {
    auto a = members.local(sub.edges[e].first);
    auto b = members.local(sub.edges[e].second);
    if (!a || !b) throw DomainError("subgraph edge references a node outside the subgraph");
    if (*a == *b) throw DomainError("self-loop in subgraph");
    for (std::size_t copy = 0; copy < 2; ++copy) {
      arcs[*a].push_back({*b, 2 * e + copy});
      arcs[*b].push_back({*a, 2 * e + copy});
    }
  }

  // Connectivity from the start node.
  std::vector<char> seen(n, 0);
  std::vector<std::size_t> stack{0};
  seen[0] = 1;
  std::size_t reached = 1;
  while (!stack.empty()) {
    auto v = stack.back();
    stack.pop_back();
    for (const auto& arc : arcs[v]) {
      if (!seen[arc.to]) {
        seen[arc.to] = 1;
        ++reached;
        stack.push_back(arc.to);
      }
    }
  }
  if (reached != n) throw DomainError("subgraph is disconnected");

  for (const auto& adj : arcs) {
    if (adj.size() % 2 != 0) throw std::logic_error("doubled multigraph has an odd-degree node");
  }

  for (auto& adj : arcs) {
    for (std::size_t i = adj.size(); i > 1; --i) {
      std::swap(adj[i - 1], adj[uniform_below(rng, i)]);
    }
  }

  // Hierholzer: walk unused arcs, backtracking into the circuit when a node is spent.
  std::vector<char> used(2 * sub.edges.size(), 0);
  std::vector<std::size_t> cursor(n, 0);
  std::vector<std::size_t> circuit;
  circuit.reserve(2 * sub.edges.size() + 1);
  stack.assign(1, 0);
  while (!stack.empty()) {
    auto v = stack.back();
    auto& c = cursor[v];
    while (c < arcs[v].size() && used[arcs[v][c].edge]) ++c;
    if (c == arcs[v].size()) {
      circuit.push_back(v);
      stack.pop_back();
    } else {
      used[arcs[v][c].edge] = 1;
      stack.push_back(arcs[v][c].to);
    }
  }

  std::vector<NodeId> seq;
  seq.reserve(circuit.size());
  for (auto it = circuit.rbegin(); it != circuit.rend(); ++it) seq.push_back(sub.nodes[*it]);
  return seq;
}

std::vector<NodeId> euler_sequence(const DiffusionSubgraph& sub) {
  Rng rng = make_rng(0);
  return euler_sequence(sub, rng);
}

void EmbedConfig::validate() const {
  if (dim == 0 || subgraph_size == 0 || window == 0 || walks_per_node == 0 || epochs == 0) {
    throw ConfigError("embedding sizes, window, walks and epochs must be >= 1");
  }
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be > 0");
}

WalkCorpus build_corpus(const InteractionGraph& g, const EmbedConfig& config) {
  config.validate();
  WalkCorpus corpus;
  corpus.vocabulary = g.addresses();
  corpus.walks_per_node = config.walks_per_node;
  corpus.sequences.resize(g.node_count() * config.walks_per_node);

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t v = begin; v < end; ++v) {
      Rng rng = make_rng(config.seed, v);
      for (std::size_t w = 0; w < config.walks_per_node; ++w) {
        auto sub = sample_subgraph(g, static_cast<NodeId>(v), config.subgraph_size, rng);
        corpus.sequences[v * config.walks_per_node + w] = euler_sequence(sub, rng);
      }
    }
  };

  const std::size_t n = g.node_count();
  const std::size_t threads = std::max<std::size_t>(1, std::min(config.threads, n));
  if (threads == 1) {
    work(0, n);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      std::size_t begin = t * chunk;
      std::size_t end = std::min(n, begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
  }
  return corpus;
}

void write_corpus(std::ostream& out, const WalkCorpus& corpus) {
  for (const auto& seq : corpus.sequences) {
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (i) out << ' ';
      out << corpus.vocabulary[seq[i]].hex();
    }
    out << '\n';
  }
}

void EmbeddingTable::add(const Address& addr, std::span<const float> vec) {
  if (vec.size() != dim_) throw DomainError("embedding dimension mismatch");
  if (!index_.emplace(addr, addresses_.size()).second) throw DomainError("duplicate embedding address");
  addresses_.push_back(addr);
  data_.insert(data_.end(), vec.begin(), vec.end());
}

std::optional<std::size_t> EmbeddingTable::find(const Address& addr) const {
  auto it = index_.find(addr);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::span<const float> EmbeddingTable::vector(const Address& addr) const {
  auto i = find(addr);
  if (!i) throw NotFoundError("no embedding for " + addr.hex());
  return vector(*i);
}

namespace {

constexpr char kMagic[4] = {'T', 'E', 'M', 'B'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::ostream& out, T v) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) throw DataError("truncated embedding file");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void EmbeddingTable::save(std::ostream& out) const {
  out.write(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dim_));
  put_le<std::uint64_t>(out, addresses_.size());
  for (std::size_t i = 0; i < addresses_.size(); ++i) {
    out.write(reinterpret_cast<const char*>(addresses_[i].bytes().data()), Address::kBytes);
    for (float f : vector(i)) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
  }
  if (!out) throw DataError("failed writing embedding file");
}

EmbeddingTable EmbeddingTable::load(std::istream& in) {
  char magic[4];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw DataError("not an embedding file");
  }
  if (get_le<std::uint32_t>(in) != kVersion) throw DataError("unsupported embedding file version");
  auto dim = get_le<std::uint32_t>(in);
  auto count = get_le<std::uint64_t>(in);
  if (dim == 0) throw DataError("embedding dimension is zero");
  EmbeddingTable table(dim);
  std::vector<float> vec(dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    Address addr;
    if (!in.read(reinterpret_cast<char*>(addr.bytes().data()), Address::kBytes)) {
      throw DataError("truncated embedding file");
    }
    for (auto& f : vec) f = std::bit_cast<float>(get_le<std::uint32_t>(in));
    table.add(addr, vec);
  }
  return table;
}

namespace {

float sigmoid(float x) { return 1.0f / (1.0f + std::exp(-x)); }

// -log(sigmoid(x)), stable for large |x|.
double neg_log_sigmoid(double x) { return x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x)); }

}  // namespace

EmbeddingTable train(const WalkCorpus& corpus, const EmbedConfig& config, TrainStats* stats) {
  config.validate();
  const std::size_t vocab_size = corpus.vocabulary.size();
  std::vector<std::uint64_t> counts(vocab_size, 0);
  std::uint64_t total_tokens = 0;
  for (const auto& seq : corpus.sequences) {
    for (auto v : seq) {
      if (v >= vocab_size) throw DomainError("corpus token outside vocabulary");
      ++counts[v];
      ++total_tokens;
    }
  }
  if (total_tokens == 0) throw DomainError("empty corpus");

  // Compact ids over nodes that actually occur.
  std::vector<std::uint32_t> local(vocab_size, UINT32_MAX);
  std::vector<NodeId> occurring;
  for (NodeId v = 0; v < vocab_size; ++v) {
    if (counts[v] > 0) {
      local[v] = static_cast<std::uint32_t>(occurring.size());
      occurring.push_back(v);
    }
  }
  const std::size_t n = occurring.size();
  const std::size_t d = config.dim;

  Rng rng = make_rng(config.seed, 0x5EED'7A1Bull);
  std::vector<float> input(n * d);
  std::vector<float> output(n * d, 0.0f);
  for (auto& x : input) x = static_cast<float>((uniform_unit(rng) - 0.5) / static_cast<double>(d));

  // Negatives drawn from the unigram distribution raised to 3/4.
  std::vector<double> cumulative(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += std::pow(static_cast<double>(counts[occurring[i]]), 0.75);
    cumulative[i] = acc;
  }
  auto draw_negative = [&] {
    double u = uniform_unit(rng) * acc;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return static_cast<std::uint32_t>(std::min<std::size_t>(it - cumulative.begin(), n - 1));
  };

  const double total_work = static_cast<double>(config.epochs) * static_cast<double>(total_tokens);
  double processed = 0.0;
  const auto h = static_cast<std::ptrdiff_t>(config.window);
  std::vector<float> grad(d);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double loss = 0.0;
    std::uint64_t pairs = 0;
    for (const auto& seq : corpus.sequences) {
      const auto len = static_cast<std::ptrdiff_t>(seq.size());
      for (std::ptrdiff_t i = 0; i < len; ++i) {
        const float lr = static_cast<float>(config.learning_rate * std::max(1.0 - processed / (total_work + 1.0), 1e-4));
        processed += 1.0;
        const auto center = local[seq[i]];
        float* in = &input[center * d];
        for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(0, i - h); j <= std::min(len - 1, i + h); ++j) {
          const auto context = local[seq[j]];
          if (j == i) continue;
          std::fill(grad.begin(), grad.end(), 0.0f);
          for (std::size_t s = 0; s <= config.negative_samples; ++s) {
            std::uint32_t target = context;
            float label = 1.0f;
            if (s > 0) {
              target = draw_negative();
              if (target == context) continue;
              label = 0.0f;
            }
            float* out = &output[target * d];
            float dot = 0.0f;
            for (std::size_t k = 0; k < d; ++k) dot += in[k] * out[k];
            loss += label > 0 ? neg_log_sigmoid(dot) : neg_log_sigmoid(-dot);
            const float g = (label - sigmoid(dot)) * lr;
            for (std::size_t k = 0; k < d; ++k) {
              grad[k] += g * out[k];
              out[k] += g * in[k];
            }
          }
          for (std::size_t k = 0; k < d; ++k) in[k] += grad[k];
          ++pairs;
        }
      }
    }
    if (stats) stats->epoch_loss.push_back(pairs ? loss / static_cast<double>(pairs) : 0.0);
  }

  EmbeddingTable table(d);
  for (std::size_t i = 0; i < n; ++i) {
    table.add(corpus.vocabulary[occurring[i]], std::span<const float>(&input[i * d], d));
  }
  return table;
}

double inverse_distance_confidence(double distance) {
  if (distance < kMinDistance) return kKappaMax;
  return 1.0 / distance;
}

std::vector<NeighborHit> neighbors(const EmbeddingTable& table, const Address& query, std::size_t k) {
  if (k == 0) throw DomainError("k must be >= 1");
  auto q = table.find(query);
  if (!q) throw NotFoundError("no embedding for " + query.hex());
  auto qv = table.vector(*q);

  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (i == *q) continue;
    auto v = table.vector(i);
    double sum = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      double diff = static_cast<double>(v[j]) - static_cast<double>(qv[j]);
      sum += diff * diff;
    }
    scored.emplace_back(std::sqrt(sum), i);
  }
  auto less = [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return table.address(a.second) < table.address(b.second);
  };
  const std::size_t take = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), less);

  std::vector<NeighborHit> hits;
  hits.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    hits.push_back({table.address(scored[i].second), scored[i].first, inverse_distance_confidence(scored[i].first)});
  }
  return hits;
}

}  // namespace tutela::embed
