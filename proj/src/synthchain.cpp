#include "tutela/synthchain.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <type_traits>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "tutela/csv.hpp"
#include "tutela/error.hpp"
#include "tutela/rng.hpp"

namespace tutela::synth {

namespace {

constexpr std::int64_t kGenesisTs = 1'600'000'000;
constexpr std::int64_t kBlockTime = 12;
constexpr std::uint64_t kLastBlock = 2'400'000;
// A day of blocks is 7200; portfolios stay well inside it.
constexpr std::uint64_t kPortfolioSpread = 6000;
const std::size_t kLinkThreshold = tornado::TornadoConfig{}.linked_eth_min_interactions;

struct PoolSpec {
  const char* id;
  const char* currency;
  const char* denomination;
  const char* ap_rate;
};

constexpr PoolSpec kPools[] = {
    {"eth-0.1", "ETH", "0.1", "4"},    {"eth-1", "ETH", "1", "10"},      {"eth-10", "ETH", "10", "2.5"},
    {"eth-100", "ETH", "100", "40"},   {"dai-100", "DAI", "100", ""},    {"dai-1000", "DAI", "1000", ""},
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("synth config: bad value for '" + key + "': " + text);
  }
  return value;
}

using Portfolio = std::map<std::string, std::size_t>;

class Generator {
 public:
  explicit Generator(const SynthConfig& config) : cfg_(config), rng_(make_rng(config.seed)) {}

  Dataset run() {
    make_registry();
    make_entities();
    plan_tornado();
    make_dar();
    make_decoys();
    make_cex_withdrawals();
    make_intra_entity();
    make_noise();
    finish();
    return std::move(out_);
  }

 private:
  Address fresh_address() {
    for (;;) {
      std::array<std::uint8_t, 20> b;
      for (auto& x : b) x = static_cast<std::uint8_t>(rng_());
      Address a(b);
      if (used_addrs_.insert(a).second) return a;
    }
  }

  TxHash fresh_hash() {
    for (;;) {
      std::array<std::uint8_t, 32> b;
      for (auto& x : b) x = static_cast<std::uint8_t>(rng_());
      TxHash h(b);
      if (used_hashes_.insert(h).second) return h;
    }
  }

  std::uint64_t random_block(std::uint64_t lo = 1, std::uint64_t hi = kLastBlock) {
    return uniform_range(rng_, lo, hi);
  }

  static std::int64_t ts_of(std::uint64_t block) {
    return kGenesisTs + kBlockTime * static_cast<std::int64_t>(block);
  }

  Wei random_amount(std::uint64_t max_whole_ether) {
    return Wei(static_cast<Wei::value_type>(uniform_below(rng_, max_whole_ether)) * kWeiPerEther +
               uniform_below(rng_, static_cast<std::uint64_t>(kWeiPerEther)) + 1);
  }

  Wei round_gas() { return Wei::from_gwei(uniform_range(rng_, 5, 200)); }

  // A gas price not yet used by any event in the pool, never a whole gwei.
  Wei unique_odd_gas(const std::string& pool) {
    auto& used = odd_prices_[pool];
    for (;;) {
      Wei p(Wei::from_gwei(uniform_range(rng_, 5, 200)).value() + uniform_range(rng_, 1, kWeiPerGwei - 1));
      if (used.insert(p).second) return p;
    }
  }

  // Deposit blocks are unique per pool so residence lookups stay unambiguous.
  std::uint64_t free_deposit_block(const std::string& pool, std::uint64_t lo, std::uint64_t hi) {
    auto& used = deposit_blocks_[pool];
    for (;;) {
      auto b = random_block(lo, hi);
      if (used.insert(b).second) return b;
    }
  }

  void set_gas_fields(TxRecord& tx, Wei gas_price) {
    tx.gas_price = gas_price;
    const auto style = uniform_below(rng_, 10);
    if (style < 5) return;  // legacy
    Wei base(gas_price.value() / 2);
    Wei prio = gas_price - base;
    tx.base_fee = base;
    tx.max_priority_fee = prio;
    tx.max_fee = style < 8 ? base + prio + prio : base + prio + Wei::from_gwei(uniform_range(rng_, 1, 50));
  }

  TxRecord& add_tx(const Address& from, const Address& to, Wei value, std::uint64_t block,
                   std::string token = {}) {
    TxRecord tx;
    tx.tx_hash = fresh_hash();
    tx.block_number = block;
    tx.timestamp = ts_of(block);
    tx.from_addr = from;
    tx.to_addr = to;
    tx.value = value;
    tx.token = std::move(token);
    set_gas_fields(tx, round_gas());
    out_.transactions.push_back(std::move(tx));
    return out_.transactions.back();
  }

  TxHash add_event(EventKind kind, const std::string& pool_id, const Address& actor, std::uint64_t block,
                   Wei gas, bool via_relayer, std::optional<std::uint64_t> ap = std::nullopt) {
    const auto& spec = *pool_specs_.at(pool_id);
    const Address contract = pool_contracts_.at(pool_id);
    TxRecord tx;
    tx.tx_hash = fresh_hash();
    tx.block_number = block;
    tx.timestamp = ts_of(block);
    tx.to_addr = contract;
    if (kind == EventKind::deposit) {
      tx.from_addr = actor;
      tx.value = *Wei::parse_ether(spec.denomination);
      if (std::string_view(spec.currency) != "ETH") tx.token = spec.currency;
    } else {
      tx.from_addr = via_relayer ? relayers_[uniform_below(rng_, relayers_.size())] : actor;
    }
    tx.gas_price = gas;
    out_.transactions.push_back(tx);

    TornadoEvent ev;
    ev.kind = kind;
    ev.pool_id = pool_id;
    ev.actor = actor;
    ev.tx_hash = tx.tx_hash;
    ev.block_number = block;
    ev.timestamp = tx.timestamp;
    ev.gas_price = gas;
    ev.via_relayer = kind == EventKind::withdraw && via_relayer;
    ev.ap_claimed = ap;
    out_.events.push_back(std::move(ev));
    (kind == EventKind::deposit ? depositors_ : withdrawers_).insert(actor);
    return tx.tx_hash;
  }

  void register_known(const Address& a, std::string label, Category c) {
    out_.known_addresses.push_back({a, std::move(label), c});
  }

  void make_registry() {
    for (std::size_t i = 0; i < cfg_.n_cex; ++i) {
      cex_.push_back(fresh_address());
      register_known(cex_.back(), "Exchange " + std::to_string(i + 1), Category::cex_main);
    }
    for (int i = 0; i < 3; ++i) {
      services_.push_back(fresh_address());
      register_known(services_.back(), "Dex router " + std::to_string(i + 1), Category::dex);
    }
    for (int i = 0; i < 3; ++i) {
      services_.push_back(fresh_address());
      register_known(services_.back(), "Lending pool " + std::to_string(i + 1), Category::defi);
    }
    for (int i = 0; i < 2; ++i) {
      relayers_.push_back(fresh_address());
      register_known(relayers_.back(), "Relayer " + std::to_string(i + 1), Category::relayer);
    }
    register_known(fresh_address(), "Mining pool", Category::miner);
    for (const auto& spec : kPools) {
      TornadoPool p;
      p.pool_id = spec.id;
      p.contract_addr = fresh_address();
      p.currency = spec.currency;
      p.denomination = spec.denomination;
      if (*spec.ap_rate) p.ap_rate = ApRate::parse(spec.ap_rate);
      register_known(p.contract_addr, std::string("Mixer ") + spec.id, Category::tornado_contract);
      pool_contracts_[p.pool_id] = p.contract_addr;
      pool_specs_[p.pool_id] = &spec;
      pool_ids_.push_back(p.pool_id);
      if (p.ap_rate) ap_pools_.push_back(p.pool_id);
      out_.pools.push_back(std::move(p));
    }
  }

  void make_entities() {
    out_.truth.entities.resize(cfg_.n_entities);
    for (auto& e : out_.truth.entities) {
      const auto k = uniform_range(rng_, cfg_.addrs_per_entity_min, cfg_.addrs_per_entity_max);
      for (std::size_t i = 0; i < k; ++i) {
        e.push_back(fresh_address());
        active_.push_back(e.back());
      }
      originals_.push_back(e.size());
    }
    order_.resize(cfg_.n_entities);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[uniform_below(rng_, i)]);
  }

  // Address owned by entity e that is never touched by background traffic.
  Address hidden_address(std::size_t e) {
    auto a = fresh_address();
    out_.truth.entities[e].push_back(a);
    return a;
  }

  Address any_address(std::size_t e) {
    return out_.truth.entities[e][uniform_below(rng_, originals_[e])];
  }

  const std::string& random_pool() { return pool_ids_[uniform_below(rng_, pool_ids_.size())]; }

  void plant(tornado::Heuristic h, std::vector<std::string> pools, std::vector<TxHash> deps,
             std::vector<TxHash> wds) {
    std::sort(pools.begin(), pools.end());
    pools.erase(std::unique(pools.begin(), pools.end()), pools.end());
    out_.truth.planted.push_back({h, std::move(pools), std::move(deps), std::move(wds)});
  }

  void plan_tornado() {
    using tornado::Heuristic;
    std::size_t next = 0;
    auto take = [&] { return order_[next++]; };

    for (std::size_t i = 0; i < cfg_.planted_address_match; ++i) {
      const auto e = take();
      const auto a = any_address(e);
      const auto& pool = random_pool();
      const auto bd = free_deposit_block(pool, 1, kLastBlock - 300'000);
      const auto d = add_event(EventKind::deposit, pool, a, bd, round_gas(), false);
      const bool relay = bernoulli(rng_, cfg_.relayer_rate);
      const auto w = add_event(EventKind::withdraw, pool, a, bd + uniform_range(rng_, 100, 200'000),
                               relay ? unique_odd_gas(pool) : round_gas(), relay);
      plant(Heuristic::address_match, {pool}, {d}, {w});
    }

    for (std::size_t i = 0; i < cfg_.planted_gas_price; ++i) {
      const auto e = take();
      const auto a = any_address(e);
      const auto f = hidden_address(e);
      const auto& pool = random_pool();
      const auto price = unique_odd_gas(pool);
      const auto bd = free_deposit_block(pool, 1, kLastBlock - 300'000);
      const auto d = add_event(EventKind::deposit, pool, a, bd, price, false);
      const auto w = add_event(EventKind::withdraw, pool, f, bd + uniform_range(rng_, 100, 200'000), price, false);
      plant(Heuristic::gas_price, {pool}, {d}, {w});
    }

    for (std::size_t i = 0; i < cfg_.planted_linked_eth; ++i) {
      const auto e = take();
      const auto a = any_address(e);
      const auto b = hidden_address(e);
      const auto& pool = random_pool();
      const auto bd = free_deposit_block(pool, 1, kLastBlock - 300'000);
      const auto d = add_event(EventKind::deposit, pool, a, bd, round_gas(), false);
      const auto w = add_event(EventKind::withdraw, pool, b, bd + uniform_range(rng_, 100, 200'000),
                               unique_odd_gas(pool), true);
      const auto n = uniform_range(rng_, kLinkThreshold, kLinkThreshold + 2);
      for (std::uint64_t k = 0; k < n; ++k) {
        const bool forward = bernoulli(rng_, 0.5);
        add_tx(forward ? a : b, forward ? b : a, random_amount(3), random_block());
      }
      planted_links_.insert({a, b});
      plant(Heuristic::linked_eth, {pool}, {d}, {w});
    }

    std::set<Portfolio> portfolios;
    for (std::size_t i = 0; i < cfg_.planted_multi_denom; ++i) {
      const auto e = take();
      const auto y = any_address(e);
      const auto x = hidden_address(e);
      Portfolio p;
      do {
        p.clear();
        const auto n_pools = uniform_range(rng_, 2, 3);
        while (p.size() < n_pools) p[random_pool()] = uniform_range(rng_, 1, 2);
      } while (std::accumulate(p.begin(), p.end(), std::size_t{0},
                               [](std::size_t s, const auto& kv) { return s + kv.second; }) < 3 ||
               !portfolios.insert(p).second);
      const auto start = random_block(1, kLastBlock - 300'000);
      const auto w_start = start + kPortfolioSpread + uniform_range(rng_, 100, 100'000);
      std::vector<std::string> pools;
      std::vector<TxHash> deps, wds;
      for (const auto& [pool, count] : p) {
        pools.push_back(pool);
        for (std::size_t k = 0; k < count; ++k) {
          deps.push_back(add_event(EventKind::deposit, pool, y,
                                   free_deposit_block(pool, start, start + kPortfolioSpread), round_gas(), false));
          wds.push_back(add_event(EventKind::withdraw, pool, x, random_block(w_start, w_start + kPortfolioSpread),
                                  unique_odd_gas(pool), true));
        }
      }
      plant(Heuristic::multi_denom, std::move(pools), std::move(deps), std::move(wds));
    }

    for (std::size_t i = 0; i < cfg_.planted_torn_mining; ++i) {
      const auto e = take();
      const auto a = any_address(e);
      const auto f = hidden_address(e);
      const auto& pool = ap_pools_[uniform_below(rng_, ap_pools_.size())];
      const auto rate = *out_.pools[std::find(pool_ids_.begin(), pool_ids_.end(), pool) - pool_ids_.begin()].ap_rate;
      const auto bd = free_deposit_block(pool, 1, kLastBlock - 300'000);
      const std::uint64_t delta = rate.denominator * uniform_range(rng_, 50, 100'000);
      const auto d = add_event(EventKind::deposit, pool, a, bd, round_gas(), false);
      const auto w = add_event(EventKind::withdraw, pool, f, bd + delta, unique_odd_gas(pool), true,
                               delta / rate.denominator * rate.numerator);
      plant(Heuristic::torn_mining, {pool}, {d}, {w});
    }

    // Uncompromised round trips: fresh withdraw address, at most two withdraws, no shared
    // odd gas price, AP claims (if any) that never divide evenly.
    for (std::size_t idx = next; idx < order_.size(); ++idx) {
      if (!bernoulli(rng_, cfg_.tornado_rate)) continue;
      const auto e = order_[idx];
      const auto a = any_address(e);
      const auto f = hidden_address(e);
      const auto trips = uniform_range(rng_, 1, 2);
      for (std::uint64_t t = 0; t < trips; ++t) {
        const auto& pool = random_pool();
        const auto bd = free_deposit_block(pool, 1, kLastBlock - 300'000);
        add_event(EventKind::deposit, pool, a, bd, bernoulli(rng_, 0.2) ? unique_odd_gas(pool) : round_gas(), false);
        const bool relay = bernoulli(rng_, cfg_.relayer_rate);
        std::optional<std::uint64_t> ap;
        const auto* spec = pool_specs_.at(pool);
        if (*spec->ap_rate && bernoulli(rng_, 0.15)) {
          const auto rate = *ApRate::parse(spec->ap_rate);
          do {
            ap = uniform_range(rng_, 1, 1'000'000);
          } while (rate.blocks_for(*ap));
        }
        add_event(EventKind::withdraw, pool, f, bd + uniform_range(rng_, 100, 200'000),
                  relay ? unique_odd_gas(pool) : round_gas(), relay, ap);
      }
    }
  }

  // Transfers that could create an unplanted depositor/withdrawer link are redrawn.
  bool would_link(const Address& u, const Address& v) {
    if (u == v) return false;
    const bool uv = depositors_.count(u) && withdrawers_.count(v);
    const bool vu = depositors_.count(v) && withdrawers_.count(u);
    if (!uv && !vu) return false;
    auto key = u < v ? std::pair{u, v} : std::pair{v, u};
    if (planted_links_.count({u, v}) || planted_links_.count({v, u})) return false;
    auto& n = guarded_pairs_[key];
    if (n + 1 >= kLinkThreshold) return true;
    ++n;
    return false;
  }

  void make_dar() {
    for (std::size_t e = 0; e < out_.truth.entities.size(); ++e) {
      if (!bernoulli(rng_, cfg_.dar_rate)) continue;
      // Hidden addresses never route through the exchange.
      std::vector<Address> eoas;
      for (std::size_t i = 0; i < originals_[e]; ++i) {
        if (i == 0 || bernoulli(rng_, 0.8)) eoas.push_back(out_.truth.entities[e][i]);
      }
      const auto deposit = fresh_address();
      out_.truth.entities[e].push_back(deposit);
      const auto& cex = cex_[uniform_below(rng_, cex_.size())];

      std::vector<Address> senders;
      for (const auto& eoa : eoas) {
        const auto n = uniform_range(rng_, 1, std::max<std::size_t>(cfg_.dar_receipts_max, 1));
        for (std::uint64_t k = 0; k < n; ++k) senders.push_back(eoa);
      }
      for (std::size_t i = senders.size(); i > 1; --i) std::swap(senders[i - 1], senders[uniform_below(rng_, i)]);

      std::uint64_t block = random_block(1, kLastBlock / 2);
      for (const auto& s : senders) {
        const auto amount = random_amount(20) + Wei(kWeiPerEther / 100);
        const auto fee = Wei(uniform_below(rng_, static_cast<std::uint64_t>(kWeiPerEther / 1000 * 9)));
        add_tx(s, deposit, amount, block);
        const auto fwd = block + uniform_range(rng_, 1, 3000);
        add_tx(deposit, cex, amount - fee, fwd);
        block = fwd + uniform_range(rng_, 1, 20'000);
      }
      auto group = eoas;
      group.push_back(deposit);
      std::sort(group.begin(), group.end());
      out_.truth.dar_groups.push_back(std::move(group));
    }
  }

  // Registered services that receive and pass funds on to an exchange exactly like a
  // deposit address would.
  void make_decoys() {
    for (std::size_t i = 0; i < cfg_.decoy_registry_deposits; ++i) {
      const auto decoy = fresh_address();
      register_known(decoy, "Payment processor " + std::to_string(i + 1), Category::other);
      const auto& cex = cex_[uniform_below(rng_, cex_.size())];
      const auto n = uniform_range(rng_, 2, 4);
      std::uint64_t block = random_block(1, kLastBlock / 2);
      for (std::uint64_t k = 0; k < n && !active_.empty(); ++k) {
        const auto& s = active_[uniform_below(rng_, active_.size())];
        const auto amount = random_amount(10) + Wei(kWeiPerEther / 100);
        add_tx(s, decoy, amount, block);
        const auto fwd = block + uniform_range(rng_, 1, 3000);
        add_tx(decoy, cex, amount - Wei(kWeiPerEther / 1000), fwd);
        block = fwd + uniform_range(rng_, 1, 20'000);
      }
    }
  }

  void make_cex_withdrawals() {
    if (cex_.empty() || active_.empty()) return;
    for (std::size_t i = 0; i < cfg_.n_entities * 2; ++i) {
      add_tx(cex_[uniform_below(rng_, cex_.size())], active_[uniform_below(rng_, active_.size())],
             random_amount(30), random_block());
    }
  }

  void make_intra_entity() {
    std::vector<std::vector<Address>> visible;
    for (std::size_t e = 0; e < out_.truth.entities.size(); ++e) {
      if (originals_[e] < 2) continue;
      const auto& own = out_.truth.entities[e];
      visible.emplace_back(own.begin(), own.begin() + static_cast<std::ptrdiff_t>(originals_[e]));
    }
    if (visible.empty()) return;
    for (std::size_t i = 0; i < cfg_.intra_entity_txs; ++i) {
      const auto& own = visible[uniform_below(rng_, visible.size())];
      const auto& u = own[uniform_below(rng_, own.size())];
      const auto& v = own[uniform_below(rng_, own.size())];
      if (u == v || would_link(u, v)) continue;
      add_tx(u, v, random_amount(5), random_block());
    }
  }

  void make_noise() {
    if (active_.size() < 2) return;
    std::size_t made = 0;
    while (made < cfg_.noise_txs) {
      const auto roll = uniform_below(rng_, 100);
      const auto& u = active_[uniform_below(rng_, active_.size())];
      if (roll < 1) {
        add_tx(u, u, Wei(0), random_block());
      } else if (roll < 20) {
        const auto& s = services_[uniform_below(rng_, services_.size())];
        if (roll < 12) add_tx(u, s, random_amount(10), random_block());
        else add_tx(s, u, random_amount(10), random_block());
      } else {
        const auto& v = active_[uniform_below(rng_, active_.size())];
        if (u == v || would_link(u, v)) continue;
        add_tx(u, v, random_amount(5), random_block(), roll < 30 ? "DAI" : "");
      }
      ++made;
    }
  }

  void finish() {
    auto by_block = [](const auto& a, const auto& b) {
      return std::tie(a.block_number, a.tx_hash) < std::tie(b.block_number, b.tx_hash);
    };
    std::sort(out_.transactions.begin(), out_.transactions.end(), by_block);
    std::sort(out_.events.begin(), out_.events.end(), by_block);
    std::sort(out_.known_addresses.begin(), out_.known_addresses.end(),
              [](const auto& a, const auto& b) { return a.addr < b.addr; });
    for (auto& e : out_.truth.entities) std::sort(e.begin(), e.end());
  }

  const SynthConfig& cfg_;
  Rng rng_;
  Dataset out_;
  std::unordered_set<Address> used_addrs_;
  std::unordered_set<TxHash> used_hashes_;
  std::vector<Address> cex_, services_, relayers_;
  // Addresses that take part in background traffic, and how many each entity started with.
  std::vector<Address> active_;
  std::vector<std::size_t> originals_;
  std::vector<std::size_t> order_;
  std::vector<std::string> pool_ids_, ap_pools_;
  std::map<std::string, Address> pool_contracts_;
  std::map<std::string, const PoolSpec*> pool_specs_;
  std::map<std::string, std::set<Wei>> odd_prices_;
  std::map<std::string, std::set<std::uint64_t>> deposit_blocks_;
  std::unordered_set<Address> depositors_, withdrawers_;
  std::set<std::pair<Address, Address>> planted_links_;
  std::map<std::pair<Address, Address>, std::size_t> guarded_pairs_;
};

struct Field {
  const char* name;
  std::function<void(SynthConfig&, const std::string&)> set;
};

template <typename T>
Field field(const char* name, T SynthConfig::*member) {
  return {name, [name, member](SynthConfig& c, const std::string& v) {
            if constexpr (std::is_same_v<T, double>) {
              char* end = nullptr;
              const double d = std::strtod(v.c_str(), &end);
              if (v.empty() || end != v.c_str() + v.size()) {
                throw ConfigError(std::string("synth config: bad value for '") + name + "': " + v);
              }
              c.*member = d;
            } else {
              c.*member = parse_number<T>(name, v);
            }
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      field("seed", &SynthConfig::seed),
      field("n_entities", &SynthConfig::n_entities),
      field("addrs_per_entity_min", &SynthConfig::addrs_per_entity_min),
      field("addrs_per_entity_max", &SynthConfig::addrs_per_entity_max),
      field("n_cex", &SynthConfig::n_cex),
      field("dar_rate", &SynthConfig::dar_rate),
      field("dar_receipts_max", &SynthConfig::dar_receipts_max),
      field("decoy_registry_deposits", &SynthConfig::decoy_registry_deposits),
      field("tornado_rate", &SynthConfig::tornado_rate),
      field("relayer_rate", &SynthConfig::relayer_rate),
      field("planted_address_match", &SynthConfig::planted_address_match),
      field("planted_gas_price", &SynthConfig::planted_gas_price),
      field("planted_linked_eth", &SynthConfig::planted_linked_eth),
      field("planted_multi_denom", &SynthConfig::planted_multi_denom),
      field("planted_torn_mining", &SynthConfig::planted_torn_mining),
      field("intra_entity_txs", &SynthConfig::intra_entity_txs),
      field("noise_txs", &SynthConfig::noise_txs),
  };
  return f;
}

nlohmann::json hashes_json(const std::vector<TxHash>& hs) {
  auto arr = nlohmann::json::array();
  for (const auto& h : hs) arr.push_back(h.hex());
  return arr;
}

template <typename Id>
std::vector<Id> ids_from(const nlohmann::json& arr) {
  std::vector<Id> out;
  for (const auto& v : arr) out.push_back(Id::from_hex(v.get<std::string>()));
  return out;
}

}  // namespace

void SynthConfig::validate() const {
  auto rate_ok = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (addrs_per_entity_min == 0) throw ConfigError("addrs_per_entity_min must be >= 1");
  if (addrs_per_entity_min > addrs_per_entity_max) {
    throw ConfigError("addrs_per_entity_min exceeds addrs_per_entity_max");
  }
  if (!rate_ok(dar_rate) || !rate_ok(tornado_rate) || !rate_ok(relayer_rate)) {
    throw ConfigError("rates must lie in [0, 1]");
  }
  if (n_cex == 0 && dar_rate > 0.0) throw ConfigError("dar_rate > 0 needs at least one exchange");
  if (n_cex == 0 && decoy_registry_deposits > 0) throw ConfigError("decoys need at least one exchange");
  if (planted_total() > n_entities) {
    throw ConfigError("planted compromises (" + std::to_string(planted_total()) + ") exceed entities (" +
                      std::to_string(n_entities) + ")");
  }
  if (dar_receipts_max == 0 && dar_rate > 0.0) throw ConfigError("dar_receipts_max must be >= 1");
}

SynthConfig SynthConfig::parse(std::istream& in) {
  SynthConfig c;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto t = trim(line);
    if (t.empty() || t.front() == '[') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("synth config line " + std::to_string(n) + ": expected key = value");
    const auto key = trim(std::string_view(t).substr(0, eq));
    auto value = trim(std::string_view(t).substr(eq + 1));
    value.erase(std::remove(value.begin(), value.end(), '_'), value.end());
    const auto& fs = fields();
    auto it = std::find_if(fs.begin(), fs.end(), [&](const Field& f) { return key == f.name; });
    if (it == fs.end()) throw ConfigError("synth config: unknown key '" + key + "'");
    it->set(c, value);
  }
  c.validate();
  return c;
}

SynthConfig SynthConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open synth config " + path.string());
  return parse(in);
}

std::size_t GroundTruth::planted_count(tornado::Heuristic h) const {
  return static_cast<std::size_t>(
      std::count_if(planted.begin(), planted.end(), [h](const PlantedReveal& p) { return p.type == h; }));
}

std::vector<PlantedReveal> GroundTruth::planted_of(tornado::Heuristic h) const {
  std::vector<PlantedReveal> out;
  std::copy_if(planted.begin(), planted.end(), std::back_inserter(out),
               [h](const PlantedReveal& p) { return p.type == h; });
  return out;
}

Dataset generate(const SynthConfig& config) {
  config.validate();
  return Generator(config).run();
}

LedgerStore to_store(const Dataset& data) {
  LedgerStore store;
  auto check = [](std::optional<std::string> reason, const char* what) {
    if (reason) throw DataError(std::string("synthetic ") + what + " rejected: " + *reason);
  };
  for (const auto& k : data.known_addresses) check(store.add_known_address(k), "known address");
  for (const auto& p : data.pools) check(store.add_pool(p), "pool");
  for (const auto& tx : data.transactions) check(store.add_transaction(tx), "transaction");
  for (const auto& ev : data.events) check(store.add_event(ev), "event");
  store.seal();
  return store;
}

void write_truth(std::ostream& out, const GroundTruth& truth) {
  nlohmann::json j;
  auto groups = [](const std::vector<std::vector<Address>>& gs) {
    auto arr = nlohmann::json::array();
    for (const auto& g : gs) {
      auto a = nlohmann::json::array();
      for (const auto& x : g) a.push_back(x.hex());
      arr.push_back(std::move(a));
    }
    return arr;
  };
  j["entities"] = groups(truth.entities);
  j["dar_groups"] = groups(truth.dar_groups);
  j["planted"] = nlohmann::json::array();
  for (const auto& p : truth.planted) {
    j["planted"].push_back({{"type", std::string(tornado::to_string(p.type))},
                            {"pool_ids", p.pool_ids},
                            {"deposit_txs", hashes_json(p.deposit_txs)},
                            {"withdraw_txs", hashes_json(p.withdraw_txs)}});
  }
  out << j.dump(1) << '\n';
}

GroundTruth read_truth(std::istream& in) {
  GroundTruth t;
  try {
    const auto j = nlohmann::json::parse(in);
    for (const auto& g : j.at("entities")) t.entities.push_back(ids_from<Address>(g));
    for (const auto& g : j.at("dar_groups")) t.dar_groups.push_back(ids_from<Address>(g));
    for (const auto& p : j.at("planted")) {
      auto h = tornado::parse_heuristic(p.at("type").get<std::string>());
      if (!h) throw DataError("truth: unknown heuristic " + p.at("type").get<std::string>());
      t.planted.push_back({*h, p.at("pool_ids").get<std::vector<std::string>>(),
                           ids_from<TxHash>(p.at("deposit_txs")), ids_from<TxHash>(p.at("withdraw_txs"))});
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("truth: ") + e.what());
  } catch (const DomainError& e) {
    throw DataError(std::string("truth: ") + e.what());
  }
  return t;
}

void write_dataset(const Dataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const char* name, const std::vector<std::string>& header, const auto& rows) {
    std::ofstream out(dir / name);
    if (!out) throw DataError("cannot write " + (dir / name).string());
    csv::write_row(out, header);
    for (const auto& r : rows) csv::write_row(out, to_row(r));
  };
  write("known_addresses.csv", LedgerStore::known_addresses_header(), data.known_addresses);
  write("pools.csv", LedgerStore::pools_header(), data.pools);
  write("transactions.csv", LedgerStore::transactions_header(), data.transactions);
  write("events.csv", LedgerStore::events_header(), data.events);
  std::ofstream truth(dir / "truth.json");
  if (!truth) throw DataError("cannot write truth.json");
  write_truth(truth, data.truth);
}

double cluster_pair_recall(std::span<const Cluster> predicted, std::span<const std::vector<Address>> truth_groups) {
  std::unordered_map<Address, std::vector<std::size_t>> where;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    for (const auto& m : predicted[i].members) where[m.addr].push_back(i);
  }
  std::size_t pairs = 0, found = 0;
  for (const auto& g : truth_groups) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (std::size_t j = i + 1; j < g.size(); ++j) {
        ++pairs;
        auto a = where.find(g[i]), b = where.find(g[j]);
        if (a == where.end() || b == where.end()) continue;
        // Cluster index lists are built in ascending order.
        std::vector<std::size_t> common;
        std::set_intersection(a->second.begin(), a->second.end(), b->second.begin(), b->second.end(),
                              std::back_inserter(common));
        if (!common.empty()) ++found;
      }
    }
  }
  if (pairs == 0) throw DomainError("truth contains no address pairs");
  return static_cast<double>(found) / static_cast<double>(pairs);
}

double reveal_recall(std::span<const tornado::Reveal> predicted, std::span<const PlantedReveal> planted) {
  if (planted.empty()) throw DomainError("no planted reveals");
  std::size_t hit = 0;
  for (const auto& p : planted) {
    auto overlaps = [](const std::set<TxHash>& s, const std::vector<TxHash>& v) {
      return std::any_of(v.begin(), v.end(), [&](const TxHash& h) { return s.count(h) > 0; });
    };
    for (const auto& r : predicted) {
      if (overlaps(r.deposit_txs, p.deposit_txs) && overlaps(r.withdraw_txs, p.withdraw_txs)) {
        ++hit;
        break;
      }
    }
  }
  return static_cast<double>(hit) / static_cast<double>(planted.size());
}

}  // namespace tutela::synth
