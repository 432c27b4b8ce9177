#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tutela/cluster.hpp"
#include "tutela/ledger.hpp"
#include "tutela/types.hpp"

// Deposit-address-reuse clustering: an EOA pays a suspected exchange deposit address,
// which forwards a near-equal amount to an exchange main address shortly afterwards.
// EOAs sharing a deposit address are linked; clusters are connected components of the
// undirected EOA/deposit graph.
namespace tutela::dar {

struct DarConfig {
  // Maximum |a_f - a_r|, in ETH.
  double alpha = 0.01;
  // Maximum t_f - t_r, in blocks.
  std::uint64_t tau = 3200;

  void validate() const;
  // alpha in wei, rounded once to the nearest integer wei.
  Wei alpha_wei() const;
};

struct DepositTuple {
  Address eoa;
  Address deposit;
  Address exchange;
  TxHash receiving_tx;
  TxHash forwarding_tx;
  Wei a_r;
  Wei a_f;
  std::uint64_t t_r = 0;
  std::uint64_t t_f = 0;
  double kappa = 0.0;

  // Identity ignoring kappa, which depends on the config.
  friend bool same_match(const DepositTuple& x, const DepositTuple& y) {
    return x.eoa == y.eoa && x.deposit == y.deposit && x.exchange == y.exchange &&
           x.receiving_tx == y.receiving_tx && x.forwarding_tx == y.forwarding_tx;
  }
};

// 1 - (|a_f - a_r| / alpha + (t_f - t_r) / tau) / 2. Throws DomainError when the tuple
// is outside the thresholds or forwards before it receives.
double tuple_confidence(const DepositTuple& t, const DarConfig& config);

// Tuples sorted by (deposit, receiving block, receiving tx). Each receiving tx is paired
// with the earliest forwarding tx of the same deposit at or after its block; the pair is
// kept when it is within both thresholds and has positive confidence.
// Throws ConfigError when the registry lists no exchange main address.
std::vector<DepositTuple> detect_tuples(const LedgerStore& store, const DarConfig& config);

// Connected components over EOA and deposit nodes. Deposit members carry their best tuple
// confidence; EOA members carry the mean of the cluster's deposit confidences. Cluster ids
// follow the order of each cluster's smallest address.
std::vector<Cluster> build_clusters(std::span<const DepositTuple> tuples);

}  // namespace tutela::dar
