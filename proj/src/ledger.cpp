#include "tutela/ledger.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <variant>

#include "tutela/csv.hpp"
#include "tutela/error.hpp"

namespace tutela {

namespace {

constexpr std::pair<Category, std::string_view> kCategoryNames[] = {
    {Category::cex_main, "cex_main"}, {Category::dex, "dex"},
    {Category::relayer, "relayer"},   {Category::miner, "miner"},
    {Category::tornado_contract, "tornado_contract"},
    {Category::defi, "defi"},         {Category::other, "other"},
};

template <typename T>
std::optional<T> parse_int(std::string_view s) {
  T v{};
  if (s.empty()) return std::nullopt;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<bool> parse_bool(std::string_view s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0" || s.empty()) return false;
  return std::nullopt;
}

template <typename T>
using RowResult = std::variant<T, std::string>;

RowResult<TxRecord> parse_tx_row(const std::vector<std::string>& f) {
  if (f.size() != 11) return "expected 11 fields, got " + std::to_string(f.size());
  TxRecord tx;
  auto hash = TxHash::parse(f[0]);
  if (!hash) return "malformed tx_hash";
  tx.tx_hash = *hash;
  auto block = parse_int<std::uint64_t>(f[1]);
  if (!block) return "non-numeric block_number";
  tx.block_number = *block;
  auto ts = parse_int<std::int64_t>(f[2]);
  if (!ts) return "non-numeric timestamp";
  tx.timestamp = *ts;
  auto from = Address::parse(f[3]);
  if (!from) return "malformed from_addr";
  tx.from_addr = *from;
  auto to = Address::parse(f[4]);
  if (!to) return "malformed to_addr";
  tx.to_addr = *to;
  auto value = Wei::parse(f[5]);
  if (!value) return "non-numeric value_wei";
  tx.value = *value;
  tx.token = f[6];
  auto gas = Wei::parse(f[7]);
  if (!gas) return "non-numeric gas_price_wei";
  tx.gas_price = *gas;
  std::optional<Wei>* optionals[] = {&tx.max_fee, &tx.max_priority_fee, &tx.base_fee};
  const char* names[] = {"max_fee_wei", "max_priority_fee_wei", "base_fee_wei"};
  for (int i = 0; i < 3; ++i) {
    const auto& field = f[8 + i];
    if (field.empty()) continue;
    auto w = Wei::parse(field);
    if (!w) return std::string("non-numeric ") + names[i];
    *optionals[i] = *w;
  }
  return tx;
}

RowResult<TornadoEvent> parse_event_row(const std::vector<std::string>& f) {
  if (f.size() != 9) return "expected 9 fields, got " + std::to_string(f.size());
  TornadoEvent ev;
  auto hash = TxHash::parse(f[0]);
  if (!hash) return "malformed tx_hash";
  ev.tx_hash = *hash;
  auto block = parse_int<std::uint64_t>(f[1]);
  if (!block) return "non-numeric block_number";
  ev.block_number = *block;
  auto ts = parse_int<std::int64_t>(f[2]);
  if (!ts) return "non-numeric timestamp";
  ev.timestamp = *ts;
  ev.pool_id = f[3];
  if (f[4] == "deposit") {
    ev.kind = EventKind::deposit;
  } else if (f[4] == "withdraw") {
    ev.kind = EventKind::withdraw;
  } else {
    return "kind must be deposit or withdraw";
  }
  auto actor = Address::parse(f[5]);
  if (!actor) return "malformed actor";
  ev.actor = *actor;
  auto gas = Wei::parse(f[6]);
  if (!gas) return "non-numeric gas_price_wei";
  ev.gas_price = *gas;
  auto relayer = parse_bool(f[7]);
  if (!relayer) return "via_relayer must be true or false";
  ev.via_relayer = *relayer;
  if (!f[8].empty()) {
    auto ap = parse_int<std::uint64_t>(f[8]);
    if (!ap) return "non-numeric ap_claimed";
    ev.ap_claimed = *ap;
  }
  return ev;
}

RowResult<KnownAddress> parse_known_row(const std::vector<std::string>& f) {
  if (f.size() != 3) return "expected 3 fields, got " + std::to_string(f.size());
  auto addr = Address::parse(f[0]);
  if (!addr) return "malformed addr";
  auto cat = parse_category(f[2]);
  if (!cat) return "unknown category";
  return KnownAddress{*addr, f[1], *cat};
}

RowResult<TornadoPool> parse_pool_row(const std::vector<std::string>& f) {
  if (f.size() != 5) return "expected 5 fields, got " + std::to_string(f.size());
  TornadoPool p;
  p.pool_id = f[0];
  if (p.pool_id.empty()) return "empty pool_id";
  auto addr = Address::parse(f[1]);
  if (!addr) return "malformed contract_addr";
  p.contract_addr = *addr;
  p.currency = f[2];
  p.denomination = f[3];
  // Denominations are decimal amounts; reuse the exact 18-decimal parser to validate.
  auto denom = Wei::parse_ether(f[3]);
  if (!denom || denom->value() == 0) return "denomination must be a positive decimal";
  if (!f[4].empty()) {
    auto rate = ApRate::parse(f[4]);
    if (!rate) return "ap_rate must be a positive decimal";
    p.ap_rate = *rate;
  }
  return p;
}

// Drives one delimited file through parse + insert, collecting the report.
template <typename T, typename Parse, typename Insert>
IngestReport ingest(std::istream& in, const std::vector<std::string>& header, Parse parse,
                    Insert insert) {
  if (!in) throw DataError("unreadable stream");
  IngestReport report;
  csv::Reader reader(in);
  auto first = reader.next();
  if (!first) return report;
  if (*first != header) {
    std::string want;
    for (const auto& f : header) want += (want.empty() ? "" : ",") + f;
    throw DataError("unexpected header, want: " + want);
  }
  while (auto row = reader.next()) {
    auto parsed = parse(*row);
    std::optional<std::string> reason;
    if (auto* err = std::get_if<std::string>(&parsed)) {
      reason = *err;
    } else {
      reason = insert(std::move(std::get<T>(parsed)));
    }
    if (reason) {
      ++report.rejected;
      report.issues.push_back({reader.line_number(), *reason});
    } else {
      ++report.accepted;
    }
  }
  return report;
}

std::string opt_str(const std::optional<Wei>& w) { return w ? w->str() : std::string(); }

const std::vector<RecordIndex> kEmpty;

template <typename Map, typename Key>
std::span<const RecordIndex> lookup(const Map& m, const Key& k) {
  auto it = m.find(k);
  return it == m.end() ? std::span<const RecordIndex>(kEmpty) : std::span<const RecordIndex>(it->second);
}

}  // namespace

std::string_view to_string(Category c) {
  for (auto [cat, name] : kCategoryNames) {
    if (cat == c) return name;
  }
  return "other";
}

std::optional<Category> parse_category(std::string_view text) {
  for (auto [cat, name] : kCategoryNames) {
    if (name == text) return cat;
  }
  return std::nullopt;
}

std::string_view to_string(EventKind k) { return k == EventKind::deposit ? "deposit" : "withdraw"; }

std::optional<ApRate> ApRate::parse(std::string_view text) {
  auto dot = text.find('.');
  std::string digits(text.substr(0, dot));
  std::uint64_t den = 1;
  if (dot != std::string_view::npos) {
    auto frac = text.substr(dot + 1);
    if (frac.empty() || frac.size() > 9) return std::nullopt;
    digits += frac;
    for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
  }
  if (digits.empty() || digits.size() > 18) return std::nullopt;
  auto num = parse_int<std::uint64_t>(digits);
  if (!num || *num == 0) return std::nullopt;
  auto g = std::gcd(*num, den);
  return ApRate{*num / g, den / g};
}

std::string ApRate::str() const {
  if (denominator == 1) return std::to_string(numerator);
  // Denominators come from decimal input, so they are products of 2 and 5.
  std::uint64_t scale = 1;
  int places = 0;
  while (scale % denominator != 0 && places < 18) {
    scale *= 10;
    ++places;
  }
  auto scaled = static_cast<unsigned __int128>(numerator) * (scale / denominator);
  std::string digits = Wei(scaled).str();
  if (digits.size() <= static_cast<std::size_t>(places)) {
    digits.insert(0, static_cast<std::size_t>(places) + 1 - digits.size(), '0');
  }
  digits.insert(digits.size() - static_cast<std::size_t>(places), ".");
  return digits;
}

std::optional<std::uint64_t> ApRate::blocks_for(std::uint64_t ap_claimed) const {
  auto scaled = static_cast<unsigned __int128>(ap_claimed) * denominator;
  if (scaled % numerator != 0) return std::nullopt;
  return static_cast<std::uint64_t>(scaled / numerator);
}

IngestReport& IngestReport::operator+=(const IngestReport& other) {
  accepted += other.accepted;
  rejected += other.rejected;
  issues.insert(issues.end(), other.issues.begin(), other.issues.end());
  return *this;
}

bool AddressRegistry::add(const KnownAddress& entry) {
  return by_addr_.emplace(entry.addr, entry).second;
}

const KnownAddress* AddressRegistry::find(const Address& addr) const {
  auto it = by_addr_.find(addr);
  return it == by_addr_.end() ? nullptr : &it->second;
}

bool AddressRegistry::is(const Address& addr, Category c) const {
  const auto* k = find(addr);
  return k != nullptr && k->category == c;
}

std::size_t AddressRegistry::count(Category c) const {
  return static_cast<std::size_t>(std::count_if(
      by_addr_.begin(), by_addr_.end(), [c](const auto& kv) { return kv.second.category == c; }));
}

std::vector<KnownAddress> AddressRegistry::entries() const {
  std::vector<KnownAddress> out;
  out.reserve(by_addr_.size());
  for (const auto& [_, k] : by_addr_) out.push_back(k);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.addr < b.addr; });
  return out;
}

bool PoolRegistry::add(const TornadoPool& pool) {
  if (by_id_.count(pool.pool_id) || by_contract_.count(pool.contract_addr)) return false;
  by_id_.emplace(pool.pool_id, pools_.size());
  by_contract_.emplace(pool.contract_addr, pools_.size());
  pools_.push_back(pool);
  return true;
}

const TornadoPool* PoolRegistry::find(std::string_view pool_id) const {
  auto it = by_id_.find(pool_id);
  return it == by_id_.end() ? nullptr : &pools_[it->second];
}

const TornadoPool* PoolRegistry::find_by_contract(const Address& addr) const {
  auto it = by_contract_.find(addr);
  return it == by_contract_.end() ? nullptr : &pools_[it->second];
}

const std::vector<std::string>& LedgerStore::transactions_header() {
  static const std::vector<std::string> h = {
      "tx_hash",   "block_number",  "timestamp",      "from_addr",
      "to_addr",   "value_wei",     "token",          "gas_price_wei",
      "max_fee_wei", "max_priority_fee_wei", "base_fee_wei"};
  return h;
}

const std::vector<std::string>& LedgerStore::events_header() {
  static const std::vector<std::string> h = {"tx_hash", "block_number", "timestamp",
                                             "pool_id", "kind",         "actor",
                                             "gas_price_wei", "via_relayer", "ap_claimed"};
  return h;
}

const std::vector<std::string>& LedgerStore::known_addresses_header() {
  static const std::vector<std::string> h = {"addr", "label", "category"};
  return h;
}

const std::vector<std::string>& LedgerStore::pools_header() {
  static const std::vector<std::string> h = {"pool_id", "contract_addr", "currency",
                                             "denomination", "ap_rate"};
  return h;
}

void LedgerStore::require_mutable() const {
  if (sealed_) throw std::logic_error("ledger store is sealed");
}

IngestReport LedgerStore::ingest_transactions(std::istream& in) {
  require_mutable();
  return ingest<TxRecord>(in, transactions_header(), parse_tx_row,
                          [this](TxRecord tx) { return add_transaction(std::move(tx)); });
}

IngestReport LedgerStore::ingest_tornado_events(std::istream& in) {
  require_mutable();
  return ingest<TornadoEvent>(in, events_header(), parse_event_row,
                              [this](TornadoEvent ev) { return add_event(std::move(ev)); });
}

IngestReport LedgerStore::ingest_known_addresses(std::istream& in) {
  require_mutable();
  return ingest<KnownAddress>(in, known_addresses_header(), parse_known_row,
                              [this](KnownAddress k) { return add_known_address(std::move(k)); });
}

IngestReport LedgerStore::ingest_pools(std::istream& in) {
  require_mutable();
  return ingest<TornadoPool>(in, pools_header(), parse_pool_row,
                             [this](TornadoPool p) { return add_pool(std::move(p)); });
}

std::optional<std::string> LedgerStore::add_transaction(TxRecord tx) {
  require_mutable();
  auto idx = static_cast<RecordIndex>(transactions_.size());
  if (!tx_by_hash_.emplace(tx.tx_hash, idx).second) return "duplicate tx_hash";
  by_from_[tx.from_addr].push_back(idx);
  by_to_[tx.to_addr].push_back(idx);
  transactions_.push_back(std::move(tx));
  return std::nullopt;
}

std::optional<std::string> LedgerStore::add_event(TornadoEvent ev) {
  require_mutable();
  if (!pools_registry_.find(ev.pool_id)) return "unknown pool_id '" + ev.pool_id + "'";
  if (ev.kind == EventKind::withdraw && registry_.is(ev.actor, Category::relayer)) {
    return "withdraw actor is a relayer, expected the decoded recipient";
  }
  auto idx = static_cast<RecordIndex>(events_.size());
  if (!event_by_hash_.emplace(ev.tx_hash, idx).second) return "duplicate tx_hash";
  events_by_actor_[ev.actor].push_back(idx);
  events_by_pool_[{ev.pool_id, ev.kind}].push_back(idx);
  events_.push_back(std::move(ev));
  return std::nullopt;
}

std::optional<std::string> LedgerStore::add_known_address(KnownAddress entry) {
  require_mutable();
  if (!registry_.add(entry)) return "duplicate addr";
  return std::nullopt;
}

std::optional<std::string> LedgerStore::add_pool(TornadoPool pool) {
  require_mutable();
  if (pool.pool_id.empty()) return "empty pool_id";
  if (!pools_registry_.add(pool)) return "duplicate pool_id or contract_addr";
  return std::nullopt;
}

void LedgerStore::seal() {
  if (sealed_) return;
  auto check = [](std::vector<std::pair<std::uint64_t, std::int64_t>> points, const char* what) {
    std::sort(points.begin(), points.end());
    for (std::size_t i = 1; i < points.size(); ++i) {
      if (points[i].second < points[i - 1].second) {
        throw DataError(std::string(what) + ": timestamp decreases at block " +
                        std::to_string(points[i].first));
      }
    }
  };
  std::vector<std::pair<std::uint64_t, std::int64_t>> points;
  points.reserve(transactions_.size());
  for (const auto& tx : transactions_) points.emplace_back(tx.block_number, tx.timestamp);
  check(std::move(points), "transactions");
  points.clear();
  for (const auto& ev : events_) points.emplace_back(ev.block_number, ev.timestamp);
  check(std::move(points), "tornado events");
  sealed_ = true;
}

std::span<const RecordIndex> LedgerStore::by_from(const Address& a) const { return lookup(by_from_, a); }
std::span<const RecordIndex> LedgerStore::by_to(const Address& a) const { return lookup(by_to_, a); }
std::span<const RecordIndex> LedgerStore::events_by_actor(const Address& a) const {
  return lookup(events_by_actor_, a);
}

std::span<const RecordIndex> LedgerStore::events_of(std::string_view pool_id, EventKind kind) const {
  auto it = events_by_pool_.find(std::pair<std::string, EventKind>(std::string(pool_id), kind));
  return it == events_by_pool_.end() ? std::span<const RecordIndex>(kEmpty)
                                     : std::span<const RecordIndex>(it->second);
}

const TxRecord* LedgerStore::find_transaction(const TxHash& h) const {
  auto it = tx_by_hash_.find(h);
  return it == tx_by_hash_.end() ? nullptr : &transactions_[it->second];
}

const TornadoEvent* LedgerStore::find_event(const TxHash& h) const {
  auto it = event_by_hash_.find(h);
  return it == event_by_hash_.end() ? nullptr : &events_[it->second];
}

std::size_t LedgerStore::interactions_between(const Address& a, const Address& b) const {
  if (a == b) return 0;
  std::size_t n = 0;
  for (auto i : by_from(a)) n += transactions_[i].to_addr == b;
  for (auto i : by_from(b)) n += transactions_[i].to_addr == a;
  return n;
}

std::vector<std::pair<Address, std::size_t>> LedgerStore::counterparties(const Address& a) const {
  std::unordered_map<Address, std::size_t> counts;
  for (auto i : by_from(a)) {
    const auto& tx = transactions_[i];
    if (!tx.is_self()) ++counts[tx.to_addr];
  }
  for (auto i : by_to(a)) {
    const auto& tx = transactions_[i];
    if (!tx.is_self()) ++counts[tx.from_addr];
  }
  std::vector<std::pair<Address, std::size_t>> out(counts.begin(), counts.end());
  std::sort(out.begin(), out.end());
  return out;
}

void LedgerStore::export_transactions(std::ostream& out) const {
  std::vector<const TxRecord*> sorted;
  sorted.reserve(transactions_.size());
  for (const auto& tx : transactions_) sorted.push_back(&tx);
  std::sort(sorted.begin(), sorted.end(), [](const TxRecord* a, const TxRecord* b) {
    return std::tie(a->block_number, a->tx_hash) < std::tie(b->block_number, b->tx_hash);
  });
  csv::write_row(out, transactions_header());
  for (const auto* tx : sorted) csv::write_row(out, to_row(*tx));
}

void LedgerStore::export_events(std::ostream& out) const {
  std::vector<const TornadoEvent*> sorted;
  sorted.reserve(events_.size());
  for (const auto& ev : events_) sorted.push_back(&ev);
  std::sort(sorted.begin(), sorted.end(), [](const TornadoEvent* a, const TornadoEvent* b) {
    return std::tie(a->block_number, a->tx_hash) < std::tie(b->block_number, b->tx_hash);
  });
  csv::write_row(out, events_header());
  for (const auto* ev : sorted) csv::write_row(out, to_row(*ev));
}

std::vector<std::string> to_row(const TxRecord& tx) {
  return {tx.tx_hash.hex(),
          std::to_string(tx.block_number),
          std::to_string(tx.timestamp),
          tx.from_addr.hex(),
          tx.to_addr.hex(),
          tx.value.str(),
          tx.token,
          tx.gas_price.str(),
          opt_str(tx.max_fee),
          opt_str(tx.max_priority_fee),
          opt_str(tx.base_fee)};
}

std::vector<std::string> to_row(const TornadoEvent& ev) {
  return {ev.tx_hash.hex(),
          std::to_string(ev.block_number),
          std::to_string(ev.timestamp),
          ev.pool_id,
          std::string(to_string(ev.kind)),
          ev.actor.hex(),
          ev.gas_price.str(),
          ev.via_relayer ? "true" : "false",
          ev.ap_claimed ? std::to_string(*ev.ap_claimed) : std::string()};
}

std::vector<std::string> to_row(const KnownAddress& k) {
  return {k.addr.hex(), k.label, std::string(to_string(k.category))};
}

std::vector<std::string> to_row(const TornadoPool& p) {
  return {p.pool_id, p.contract_addr.hex(), p.currency, p.denomination,
          p.ap_rate ? p.ap_rate->str() : std::string()};
}

LoadedDirectory load_directory(const std::filesystem::path& dir) {
  LoadedDirectory out;
  auto load = [&](const char* name, bool required, auto member) {
    const auto path = dir / name;
    std::ifstream in(path);
    if (!in) {
      if (required) throw DataError("cannot open " + path.string());
      return;
    }
    out.reports[name] = (out.store.*member)(in);
  };
  load("known_addresses.csv", false, &LedgerStore::ingest_known_addresses);
  load("pools.csv", false, &LedgerStore::ingest_pools);
  load("transactions.csv", true, &LedgerStore::ingest_transactions);
  load("events.csv", false, &LedgerStore::ingest_tornado_events);
  out.store.seal();
  return out;
}

}  // namespace tutela
