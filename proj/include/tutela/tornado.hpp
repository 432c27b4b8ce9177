#pragma once

#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tutela/cluster.hpp"
#include "tutela/ledger.hpp"
#include "tutela/types.hpp"

// Heuristics that link mixer deposits to withdrawals, and the pool auditor that subtracts
// linked deposits from each pool's anonymity set.
namespace tutela::tornado {

enum class Heuristic { address_match, gas_price, linked_eth, multi_denom, torn_mining };

inline constexpr Heuristic kAllHeuristics[] = {Heuristic::address_match, Heuristic::gas_price,
                                               Heuristic::linked_eth, Heuristic::multi_denom,
                                               Heuristic::torn_mining};

std::string_view to_string(Heuristic h);
std::optional<Heuristic> parse_heuristic(std::string_view text);

struct Reveal {
  Heuristic heuristic = Heuristic::address_match;
  std::set<TxHash> deposit_txs;
  std::set<TxHash> withdraw_txs;
  std::set<std::string> pool_ids;
  double confidence = 1.0;
  std::string evidence;
};

// Confidence constants are artifact-defined; the heuristics are not ranked against
// each other.
struct TornadoConfig {
  double address_match_confidence = 1.0;
  double gas_price_confidence = 0.9;
  double multi_denom_confidence = 0.8;
  double torn_mining_confidence = 0.7;
  std::size_t linked_eth_min_interactions = 3;
  // Accept depositors whose portfolio dominates the withdrawal portfolio pool by pool.
  bool relaxed_multi_denom = false;
  // Length of the deposit and the withdrawal windows, in seconds.
  std::int64_t multi_denom_window = 24 * 3600;
};

// Same actor deposits and withdraws in one pool.
std::vector<Reveal> address_match(std::span<const TornadoEvent> events, const TornadoConfig& config = {});

// Gas price is an exact multiple of 1 gwei.
bool is_round_gas_price(Wei price);

// A non-round gas price used by exactly one deposit and one later, self-submitted
// withdraw of the same pool, and by no other event there.
std::vector<Reveal> gas_price_match(std::span<const TornadoEvent> events, const TornadoConfig& config = {});

// 1 - 1/(n - 1) for n interactions; 0.5 at the threshold of three.
double linked_eth_confidence(std::size_t interactions);

// Depositor a and withdrawer b (distinct, both unregistered) with enough direct
// transfers: a's deposits preceding b's last withdraw in each shared pool are linked to
// b's withdraws there.
std::vector<Reveal> linked_eth(std::span<const TornadoEvent> events, const LedgerStore& store,
                               const TornadoConfig& config = {});

// Withdraw portfolios of >= 3 withdraws over >= 2 pools inside one window, matched to the
// single depositor whose portfolio (all deposits inside one window, ending before the
// first withdraw) equals it.
std::vector<Reveal> multi_denom(std::span<const TornadoEvent> events, const TornadoConfig& config = {});

// A withdraw's anonymity-point claim divided by the pool's AP rate gives its residence in
// blocks; a unique deposit that many blocks earlier is linked. Pools without a rate are
// skipped and named in `warnings`.
std::vector<Reveal> torn_mining(std::span<const TornadoEvent> events, const PoolRegistry& pools,
                                const TornadoConfig& config = {}, std::vector<std::string>* warnings = nullptr);

// All five heuristics, concatenated in heuristic order; deterministic.
std::vector<Reveal> run_all(const LedgerStore& store, const TornadoConfig& config = {},
                            std::vector<std::string>* warnings = nullptr);

enum class WalletLabel { blocknative_style, legacy, unknown };

std::string_view to_string(WalletLabel w);

struct WalletFingerprint {
  TxHash tx_hash;
  WalletLabel wallet_label = WalletLabel::unknown;
};

// blocknative_style iff max_fee == base_fee + 2 * max_priority_fee with all three present;
// legacy iff max_fee is absent.
WalletFingerprint wallet_fingerprint(const TxRecord& tx);

// Address-level clusters from every non-address-match reveal: the reveal's distinct actors
// minus registry entries, dropped below two members.
std::vector<Cluster> lift_to_addresses(std::span<const Reveal> reveals, const LedgerStore& store);

struct PoolAudit {
  std::string pool_id;
  std::size_t total_deposits = 0;
  std::size_t compromised_deposits = 0;
  std::size_t true_anonymity_set = 0;
};

// Compromised deposits are the union over all reveals. Throws NotFoundError for an
// unregistered pool.
PoolAudit audit_pool(std::string_view pool_id, std::span<const Reveal> reveals, const LedgerStore& store);
// One audit per registered pool, in registry order.
std::vector<PoolAudit> audit_all(std::span<const Reveal> reveals, const LedgerStore& store);

struct RevealPair {
  Heuristic heuristic;
  std::string pool_id;
  TxHash deposit_tx;
  TxHash withdraw_tx;
  double confidence;
};

// Each reveal expanded into (deposit, withdraw) pairs of the same pool, sorted and unique.
std::vector<RevealPair> expand_pairs(std::span<const Reveal> reveals, const LedgerStore& store);

// `heuristic,pool_id,deposit_tx,withdraw_tx,confidence`
void export_reveals(std::ostream& out, std::span<const Reveal> reveals, const LedgerStore& store);
// `pool_id,total_deposits,compromised,true_anonymity_set`
void export_audits(std::ostream& out, std::span<const PoolAudit> audits);

}  // namespace tutela::tornado
