#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "tutela/cluster.hpp"
#include "tutela/ledger.hpp"
#include "tutela/tornado.hpp"

// Synthetic chains with known ownership: planted deposit-address reuse, one kind of
// mixer compromise per heuristic, and background noise that avoids triggering any
// heuristic by accident.
namespace tutela::synth {

struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t n_entities = 1000;
  std::size_t addrs_per_entity_min = 1;
  std::size_t addrs_per_entity_max = 4;
  std::size_t n_cex = 5;
  // Fraction of entities that route funds through an exchange deposit address.
  double dar_rate = 0.3;
  std::size_t dar_receipts_max = 3;
  // Registered non-exchange addresses that mimic deposit forwarding (must never cluster).
  std::size_t decoy_registry_deposits = 20;
  // Fraction of entities doing an uncompromised mixer round trip.
  double tornado_rate = 0.2;
  double relayer_rate = 0.7;
  std::size_t planted_address_match = 5;
  std::size_t planted_gas_price = 5;
  std::size_t planted_linked_eth = 5;
  std::size_t planted_multi_denom = 5;
  std::size_t planted_torn_mining = 5;
  std::size_t intra_entity_txs = 8000;
  std::size_t noise_txs = 90000;

  std::size_t planted_total() const {
    return planted_address_match + planted_gas_price + planted_linked_eth + planted_multi_denom +
           planted_torn_mining;
  }
  // Throws ConfigError on out-of-range values or more planted compromises than entities.
  void validate() const;

  // `key = value` lines; `#` comments and `[section]` headers are ignored. Keys are the
  // field names above. Unknown keys throw ConfigError.
  static SynthConfig parse(std::istream& in);
  static SynthConfig load(const std::filesystem::path& path);
};

struct PlantedReveal {
  tornado::Heuristic type = tornado::Heuristic::address_match;
  std::vector<std::string> pool_ids;
  std::vector<TxHash> deposit_txs;
  std::vector<TxHash> withdraw_txs;
};

struct GroundTruth {
  // Entity id is the index. Address sets are disjoint.
  std::vector<std::vector<Address>> entities;
  // EOAs sharing one planted deposit address, plus the deposit address itself.
  std::vector<std::vector<Address>> dar_groups;
  std::vector<PlantedReveal> planted;

  std::size_t planted_count(tornado::Heuristic h) const;
  std::vector<PlantedReveal> planted_of(tornado::Heuristic h) const;
};

struct Dataset {
  std::vector<TxRecord> transactions;
  std::vector<TornadoEvent> events;
  std::vector<KnownAddress> known_addresses;
  std::vector<TornadoPool> pools;
  GroundTruth truth;
};

// Deterministic under config.seed.
Dataset generate(const SynthConfig& config);

// Ingests a dataset into a sealed store; throws DataError if any row is rejected.
LedgerStore to_store(const Dataset& data);

// Ledger-format files plus truth.json.
void write_dataset(const Dataset& data, const std::filesystem::path& dir);
void write_truth(std::ostream& out, const GroundTruth& truth);
GroundTruth read_truth(std::istream& in);

// Share of co-owned address pairs (all pairs within each truth group) found together in
// at least one predicted cluster. Throws DomainError when the truth has no pairs.
double cluster_pair_recall(std::span<const Cluster> predicted, std::span<const std::vector<Address>> truth_groups);

// Share of planted reveals that some predicted reveal overlaps on both a deposit and a
// withdraw tx. Throws DomainError when nothing was planted.
double reveal_recall(std::span<const tornado::Reveal> predicted, std::span<const PlantedReveal> planted);

}  // namespace tutela::synth
