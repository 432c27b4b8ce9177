#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tutela/types.hpp"

namespace tutela {

enum class Category { cex_main, dex, relayer, miner, tornado_contract, defi, other };

std::string_view to_string(Category c);
std::optional<Category> parse_category(std::string_view text);

struct TxRecord {
  TxHash tx_hash;
  std::uint64_t block_number = 0;
  std::int64_t timestamp = 0;
  Address from_addr;
  Address to_addr;
  Wei value;
  // Empty for ether; otherwise the token symbol.
  std::string token;
  Wei gas_price;
  std::optional<Wei> max_fee;
  std::optional<Wei> max_priority_fee;
  std::optional<Wei> base_fee;

  bool is_ether() const { return token.empty() || token == "ETH"; }
  bool is_self() const { return from_addr == to_addr; }
};

struct KnownAddress {
  Address addr;
  std::string label;
  Category category = Category::other;
};

// Anonymity points accrued per block, kept as a reduced positive fraction.
struct ApRate {
  std::uint64_t numerator = 1;
  std::uint64_t denominator = 1;

  static std::optional<ApRate> parse(std::string_view text);
  std::string str() const;

  // Blocks of pool residence implied by a claim, if it divides evenly.
  std::optional<std::uint64_t> blocks_for(std::uint64_t ap_claimed) const;
};

struct TornadoPool {
  std::string pool_id;
  Address contract_addr;
  std::string currency;
  // Kept as written ("0.1", "100"); never used in arithmetic.
  std::string denomination;
  std::optional<ApRate> ap_rate;
};

enum class EventKind { deposit, withdraw };

std::string_view to_string(EventKind k);

struct TornadoEvent {
  EventKind kind = EventKind::deposit;
  std::string pool_id;
  // Depositor, or the decoded recipient of a withdraw.
  Address actor;
  TxHash tx_hash;
  std::uint64_t block_number = 0;
  std::int64_t timestamp = 0;
  Wei gas_price;
  bool via_relayer = false;
  std::optional<std::uint64_t> ap_claimed;
};

struct IngestIssue {
  std::size_t line = 0;
  std::string reason;
};

struct IngestReport {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::vector<IngestIssue> issues;

  IngestReport& operator+=(const IngestReport& other);
};

class AddressRegistry {
 public:
  bool add(const KnownAddress& entry);
  const KnownAddress* find(const Address& addr) const;
  bool contains(const Address& addr) const { return find(addr) != nullptr; }
  bool is(const Address& addr, Category c) const;
  std::size_t size() const { return by_addr_.size(); }
  bool empty() const { return by_addr_.empty(); }
  std::size_t count(Category c) const;
  // Sorted by address.
  std::vector<KnownAddress> entries() const;

 private:
  std::unordered_map<Address, KnownAddress> by_addr_;
};

class PoolRegistry {
 public:
  bool add(const TornadoPool& pool);
  const TornadoPool* find(std::string_view pool_id) const;
  const TornadoPool* find_by_contract(const Address& addr) const;
  // In registration order.
  const std::vector<TornadoPool>& pools() const { return pools_; }
  std::size_t size() const { return pools_.size(); }

 private:
  std::vector<TornadoPool> pools_;
  std::map<std::string, std::size_t, std::less<>> by_id_;
  std::unordered_map<Address, std::size_t> by_contract_;
};

using RecordIndex = std::uint32_t;

// Canonical in-memory ledger. Single writer until seal(); afterwards read-only and
// safe to share between threads. Mutating a sealed store throws std::logic_error.
class LedgerStore {
 public:
  static const std::vector<std::string>& transactions_header();
  static const std::vector<std::string>& events_header();
  static const std::vector<std::string>& known_addresses_header();
  static const std::vector<std::string>& pools_header();

  // Stream ingestion. Row-level problems are counted in the report; a missing stream
  // or wrong header throws DataError. An empty stream yields an empty report.
  IngestReport ingest_transactions(std::istream& in);
  IngestReport ingest_tornado_events(std::istream& in);
  IngestReport ingest_known_addresses(std::istream& in);
  IngestReport ingest_pools(std::istream& in);

  // Programmatic inserts; return the rejection reason, or nullopt when accepted.
  std::optional<std::string> add_transaction(TxRecord tx);
  std::optional<std::string> add_event(TornadoEvent ev);
  std::optional<std::string> add_known_address(KnownAddress entry);
  std::optional<std::string> add_pool(TornadoPool pool);

  // Verifies cross-record invariants and freezes the store.
  void seal();
  bool sealed() const { return sealed_; }

  std::span<const TxRecord> transactions() const { return transactions_; }
  std::span<const TornadoEvent> events() const { return events_; }
  const AddressRegistry& registry() const { return registry_; }
  const PoolRegistry& pools() const { return pools_registry_; }

  std::span<const RecordIndex> by_from(const Address& a) const;
  std::span<const RecordIndex> by_to(const Address& a) const;
  std::span<const RecordIndex> events_by_actor(const Address& a) const;
  std::span<const RecordIndex> events_of(std::string_view pool_id, EventKind kind) const;

  const TxRecord* find_transaction(const TxHash& h) const;
  const TornadoEvent* find_event(const TxHash& h) const;

  // Transactions between a and b in either direction; self-transactions never count.
  std::size_t interactions_between(const Address& a, const Address& b) const;
  // Every distinct counterparty of a with its interaction count, sorted by address.
  std::vector<std::pair<Address, std::size_t>> counterparties(const Address& a) const;

  // Sorted by (block_number, tx_hash).
  void export_transactions(std::ostream& out) const;
  void export_events(std::ostream& out) const;

 private:
  void require_mutable() const;

  std::vector<TxRecord> transactions_;
  std::vector<TornadoEvent> events_;
  AddressRegistry registry_;
  PoolRegistry pools_registry_;

  std::unordered_map<TxHash, RecordIndex> tx_by_hash_;
  std::unordered_map<TxHash, RecordIndex> event_by_hash_;
  std::unordered_map<Address, std::vector<RecordIndex>> by_from_;
  std::unordered_map<Address, std::vector<RecordIndex>> by_to_;
  std::unordered_map<Address, std::vector<RecordIndex>> events_by_actor_;
  std::map<std::pair<std::string, EventKind>, std::vector<RecordIndex>, std::less<>> events_by_pool_;
  bool sealed_ = false;
};

struct LoadedDirectory;

// Loads known_addresses.csv, pools.csv, transactions.csv and events.csv from `dir` and
// seals the store. transactions.csv is required; the others may be absent.
LoadedDirectory load_directory(const std::filesystem::path& dir);

// Row converters shared by ingestion, export and the synthetic generator.
std::vector<std::string> to_row(const TxRecord& tx);
std::vector<std::string> to_row(const TornadoEvent& ev);
std::vector<std::string> to_row(const KnownAddress& k);
std::vector<std::string> to_row(const TornadoPool& p);

struct LoadedDirectory {
  LedgerStore store;
  // Keyed by file name; absent files have no entry.
  std::map<std::string, IngestReport> reports;
};

}  // namespace tutela
