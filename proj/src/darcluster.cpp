#include "tutela/darcluster.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "tutela/error.hpp"

namespace tutela::dar {

namespace {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<unsigned> rank_;
};

double confidence_unchecked(Wei diff, std::uint64_t dt, Wei alpha, std::uint64_t tau) {
  double amount_term = static_cast<double>(diff.value()) / static_cast<double>(alpha.value());
  double time_term = static_cast<double>(dt) / static_cast<double>(tau);
  return std::clamp(1.0 - (0.5 * amount_term + 0.5 * time_term), 0.0, 1.0);
}

}  // namespace

void DarConfig::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be > 0");
  if (tau == 0) throw ConfigError("tau must be > 0");
  if (alpha_wei().value() == 0) throw ConfigError("alpha below 1 wei");
}

Wei DarConfig::alpha_wei() const {
  return Wei(static_cast<Wei::value_type>(std::llround(alpha * 1e18)));
}

double tuple_confidence(const DepositTuple& t, const DarConfig& config) {
  config.validate();
  if (t.t_f < t.t_r) throw DomainError("forwarding block precedes receiving block");
  if (t.t_f - t.t_r > config.tau) throw DomainError("block difference exceeds tau");
  Wei diff = t.a_f.abs_diff(t.a_r);
  if (diff > config.alpha_wei()) throw DomainError("amount difference exceeds alpha");
  return confidence_unchecked(diff, t.t_f - t.t_r, config.alpha_wei(), config.tau);
}

std::vector<DepositTuple> detect_tuples(const LedgerStore& store, const DarConfig& config) {
  config.validate();
  const auto& registry = store.registry();
  if (registry.count(Category::cex_main) == 0) {
    throw ConfigError("known-address registry has no cex_main entries");
  }
  const Wei alpha = config.alpha_wei();
  const auto txs = store.transactions();

  // Candidate deposits: unregistered senders of ether to an exchange main address.
  std::unordered_map<Address, std::vector<RecordIndex>> forwards;
  for (RecordIndex i = 0; i < txs.size(); ++i) {
    const auto& tx = txs[i];
    if (!tx.is_ether() || tx.is_self()) continue;
    if (!registry.is(tx.to_addr, Category::cex_main)) continue;
    if (registry.contains(tx.from_addr)) continue;
    forwards[tx.from_addr].push_back(i);
  }

  std::vector<Address> deposits;
  deposits.reserve(forwards.size());
  for (const auto& [addr, _] : forwards) deposits.push_back(addr);
  std::sort(deposits.begin(), deposits.end());

  auto by_block = [&](RecordIndex a, RecordIndex b) {
    return std::tie(txs[a].block_number, txs[a].tx_hash) < std::tie(txs[b].block_number, txs[b].tx_hash);
  };

  std::vector<DepositTuple> tuples;
  std::vector<RecordIndex> receipts;
  for (const auto& deposit : deposits) {
    auto& fwd = forwards[deposit];
    std::sort(fwd.begin(), fwd.end(), by_block);

    receipts.clear();
    for (auto i : store.by_to(deposit)) {
      const auto& tx = txs[i];
      if (!tx.is_ether() || tx.is_self() || registry.contains(tx.from_addr)) continue;
      receipts.push_back(i);
    }
    std::sort(receipts.begin(), receipts.end(), by_block);

    for (auto ri : receipts) {
      const auto& r = txs[ri];
      auto it = std::lower_bound(fwd.begin(), fwd.end(), r.block_number,
                                 [&](RecordIndex fi, std::uint64_t block) { return txs[fi].block_number < block; });
      if (it == fwd.end()) continue;
      const auto& f = txs[*it];
      std::uint64_t dt = f.block_number - r.block_number;
      if (dt > config.tau) continue;
      Wei diff = f.value.abs_diff(r.value);
      if (diff > alpha) continue;
      double kappa = confidence_unchecked(diff, dt, alpha, config.tau);
      if (kappa <= 0.0) continue;
      tuples.push_back(DepositTuple{r.from_addr, deposit, f.to_addr, r.tx_hash, f.tx_hash, r.value,
                                    f.value, r.block_number, f.block_number, kappa});
    }
  }
  return tuples;
}

std::vector<Cluster> build_clusters(std::span<const DepositTuple> tuples) {
  std::unordered_map<Address, std::size_t> ids;
  std::vector<Address> addrs;
  auto id_of = [&](const Address& a) {
    auto [it, inserted] = ids.emplace(a, addrs.size());
    if (inserted) addrs.push_back(a);
    return it->second;
  };

  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (const auto& t : tuples) {
    if (!(t.kappa > 0.0)) continue;
    edges.emplace_back(id_of(t.eoa), id_of(t.deposit));
  }

  const std::size_t n = addrs.size();
  std::vector<double> best_kappa(n, -1.0);
  for (const auto& t : tuples) {
    if (!(t.kappa > 0.0)) continue;
    auto d = ids.at(t.deposit);
    best_kappa[d] = std::max(best_kappa[d], t.kappa);
  }

  UnionFind uf(n);
  for (auto [a, b] : edges) uf.unite(a, b);

  std::unordered_map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[uf.find(i)].push_back(i);

  std::vector<Cluster> clusters;
  clusters.reserve(groups.size());
  for (auto& [_, nodes] : groups) {
    double sum = 0.0;
    std::size_t deposits = 0;
    for (auto i : nodes) {
      if (best_kappa[i] >= 0.0) {
        sum += best_kappa[i];
        ++deposits;
      }
    }
    const double mean = sum / static_cast<double>(deposits);
    Cluster c;
    c.members.reserve(nodes.size());
    for (auto i : nodes) {
      bool is_deposit = best_kappa[i] >= 0.0;
      c.members.push_back(ClusterMember{addrs[i], is_deposit ? MemberRole::deposit : MemberRole::eoa,
                                        is_deposit ? best_kappa[i] : mean, "dar"});
    }
    std::sort(c.members.begin(), c.members.end(),
              [](const auto& x, const auto& y) { return x.addr < y.addr; });
    clusters.push_back(std::move(c));
  }
  std::sort(clusters.begin(), clusters.end(),
            [](const Cluster& x, const Cluster& y) { return x.members.front().addr < y.members.front().addr; });
  for (std::size_t i = 0; i < clusters.size(); ++i) clusters[i].cluster_id = i;
  return clusters;
}

}  // namespace tutela::dar
