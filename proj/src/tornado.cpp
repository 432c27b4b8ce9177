#include "tutela/tornado.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include "tutela/csv.hpp"
#include "tutela/error.hpp"

namespace tutela::tornado {

namespace {

constexpr std::pair<Heuristic, std::string_view> kHeuristicNames[] = {
    {Heuristic::address_match, "address_match"}, {Heuristic::gas_price, "gas_price"},
    {Heuristic::linked_eth, "linked_eth"},       {Heuristic::multi_denom, "multi_denom"},
    {Heuristic::torn_mining, "torn_mining"},
};

using Portfolio = std::map<std::string, std::size_t>;

// Tornado activity of one address, grouped by kind.
struct Activity {
  std::vector<const TornadoEvent*> deposits;
  std::vector<const TornadoEvent*> withdraws;
};

std::map<Address, Activity> activity_by_actor(std::span<const TornadoEvent> events) {
  std::map<Address, Activity> out;
  for (const auto& ev : events) {
    auto& a = out[ev.actor];
    (ev.kind == EventKind::deposit ? a.deposits : a.withdraws).push_back(&ev);
  }
  return out;
}

Portfolio portfolio_of(const std::vector<const TornadoEvent*>& evs) {
  Portfolio p;
  for (const auto* ev : evs) ++p[ev->pool_id];
  return p;
}

std::pair<std::int64_t, std::int64_t> time_span(const std::vector<const TornadoEvent*>& evs) {
  auto [lo, hi] = std::minmax_element(evs.begin(), evs.end(), [](const auto* a, const auto* b) {
    return a->timestamp < b->timestamp;
  });
  return {(*lo)->timestamp, (*hi)->timestamp};
}

std::size_t total(const Portfolio& p) {
  std::size_t n = 0;
  for (const auto& [_, c] : p) n += c;
  return n;
}

bool dominates(const Portfolio& deposits, const Portfolio& withdraws) {
  for (const auto& [pool, count] : withdraws) {
    auto it = deposits.find(pool);
    if (it == deposits.end() || it->second < count) return false;
  }
  return true;
}

}  // namespace

std::string_view to_string(Heuristic h) {
  for (auto [k, name] : kHeuristicNames) {
    if (k == h) return name;
  }
  return "address_match";
}

std::optional<Heuristic> parse_heuristic(std::string_view text) {
  for (auto [k, name] : kHeuristicNames) {
    if (name == text) return k;
  }
  return std::nullopt;
}

std::vector<Reveal> address_match(std::span<const TornadoEvent> events, const TornadoConfig& config) {
  std::map<std::pair<std::string, Address>, Activity> groups;
  for (const auto& ev : events) {
    auto& a = groups[{ev.pool_id, ev.actor}];
    (ev.kind == EventKind::deposit ? a.deposits : a.withdraws).push_back(&ev);
  }
  std::vector<Reveal> reveals;
  for (const auto& [key, act] : groups) {
    if (act.deposits.empty() || act.withdraws.empty()) continue;
    Reveal r;
    r.heuristic = Heuristic::address_match;
    r.pool_ids.insert(key.first);
    for (const auto* d : act.deposits) r.deposit_txs.insert(d->tx_hash);
    for (const auto* w : act.withdraws) r.withdraw_txs.insert(w->tx_hash);
    r.confidence = config.address_match_confidence;
    r.evidence = key.second.hex() + " deposits and withdraws in " + key.first;
    reveals.push_back(std::move(r));
  }
  return reveals;
}

bool is_round_gas_price(Wei price) { return price.value() % kWeiPerGwei == 0; }

std::vector<Reveal> gas_price_match(std::span<const TornadoEvent> events, const TornadoConfig& config) {
  std::map<std::pair<std::string, Wei>, std::vector<const TornadoEvent*>> by_price;
  for (const auto& ev : events) {
    if (is_round_gas_price(ev.gas_price)) continue;
    by_price[{ev.pool_id, ev.gas_price}].push_back(&ev);
  }
  std::vector<Reveal> reveals;
  for (const auto& [key, evs] : by_price) {
    if (evs.size() != 2 || evs[0]->kind == evs[1]->kind) continue;
    const auto* d = evs[0]->kind == EventKind::deposit ? evs[0] : evs[1];
    const auto* w = evs[0]->kind == EventKind::withdraw ? evs[0] : evs[1];
    if (w->via_relayer || w->block_number <= d->block_number) continue;
    Reveal r;
    r.heuristic = Heuristic::gas_price;
    r.pool_ids.insert(key.first);
    r.deposit_txs.insert(d->tx_hash);
    r.withdraw_txs.insert(w->tx_hash);
    r.confidence = config.gas_price_confidence;
    r.evidence = "gas price " + key.second.str() + " wei unique to one deposit and one withdraw in " + key.first;
    reveals.push_back(std::move(r));
  }
  return reveals;
}

double linked_eth_confidence(std::size_t interactions) {
  if (interactions < 2) return 0.0;
  return 1.0 - 1.0 / static_cast<double>(interactions - 1);
}

std::vector<Reveal> linked_eth(std::span<const TornadoEvent> events, const LedgerStore& store,
                               const TornadoConfig& config) {
  const auto& registry = store.registry();
  std::map<Address, std::map<std::string, std::vector<const TornadoEvent*>>> deposits, withdraws;
  for (const auto& ev : events) {
    if (registry.contains(ev.actor)) continue;
    auto& side = ev.kind == EventKind::deposit ? deposits : withdraws;
    side[ev.actor][ev.pool_id].push_back(&ev);
  }

  std::vector<Reveal> reveals;
  for (const auto& [a, a_pools] : deposits) {
    for (const auto& [b, n] : store.counterparties(a)) {
      if (b == a || n < config.linked_eth_min_interactions) continue;
      auto wit = withdraws.find(b);
      if (wit == withdraws.end()) continue;

      Reveal r;
      r.heuristic = Heuristic::linked_eth;
      for (const auto& [pool, ws] : wit->second) {
        auto dit = a_pools.find(pool);
        if (dit == a_pools.end()) continue;
        std::uint64_t last_withdraw = 0;
        for (const auto* w : ws) last_withdraw = std::max(last_withdraw, w->block_number);
        bool any = false;
        for (const auto* d : dit->second) {
          if (d->block_number < last_withdraw) {
            r.deposit_txs.insert(d->tx_hash);
            any = true;
          }
        }
        if (!any) continue;
        for (const auto* w : ws) r.withdraw_txs.insert(w->tx_hash);
        r.pool_ids.insert(pool);
      }
      if (r.pool_ids.empty()) continue;
      r.confidence = linked_eth_confidence(n);
      r.evidence = std::to_string(n) + " transfers between depositor " + a.hex() + " and withdrawer " + b.hex();
      reveals.push_back(std::move(r));
    }
  }
  return reveals;
}

std::vector<Reveal> multi_denom(std::span<const TornadoEvent> events, const TornadoConfig& config) {
  const auto actors = activity_by_actor(events);

  struct Depositor {
    const Address* addr;
    const Activity* activity;
    Portfolio portfolio;
    std::int64_t last_ts;
  };
  std::vector<Depositor> depositors;
  std::map<Portfolio, std::vector<std::size_t>> by_portfolio;
  for (const auto& [addr, act] : actors) {
    if (act.deposits.empty()) continue;
    auto [first, last] = time_span(act.deposits);
    if (last - first > config.multi_denom_window) continue;
    by_portfolio[portfolio_of(act.deposits)].push_back(depositors.size());
    depositors.push_back({&addr, &act, portfolio_of(act.deposits), last});
  }

  std::vector<Reveal> reveals;
  for (const auto& [x, act] : actors) {
    if (act.withdraws.empty()) continue;
    Portfolio wanted = portfolio_of(act.withdraws);
    if (total(wanted) < 3 || wanted.size() < 2) continue;
    auto [first_w, last_w] = time_span(act.withdraws);
    if (last_w - first_w > config.multi_denom_window) continue;

    std::vector<const Depositor*> matches;
    auto consider = [&](const Depositor& d) {
      if (*d.addr == x || d.last_ts >= first_w) return;
      matches.push_back(&d);
    };
    if (config.relaxed_multi_denom) {
      for (const auto& d : depositors) {
        if (dominates(d.portfolio, wanted)) consider(d);
      }
    } else if (auto it = by_portfolio.find(wanted); it != by_portfolio.end()) {
      for (auto i : it->second) consider(depositors[i]);
    }
    if (matches.size() != 1) continue;

    const auto& y = *matches.front();
    Reveal r;
    r.heuristic = Heuristic::multi_denom;
    for (const auto& [pool, _] : wanted) r.pool_ids.insert(pool);
    for (const auto* d : y.activity->deposits) {
      if (r.pool_ids.count(d->pool_id)) r.deposit_txs.insert(d->tx_hash);
    }
    for (const auto* w : act.withdraws) r.withdraw_txs.insert(w->tx_hash);
    r.confidence = config.multi_denom_confidence;
    r.evidence = "withdraw portfolio of " + x.hex() + " matched only by depositor " + y.addr->hex();
    reveals.push_back(std::move(r));
  }
  return reveals;
}

std::vector<Reveal> torn_mining(std::span<const TornadoEvent> events, const PoolRegistry& pools,
                                const TornadoConfig& config, std::vector<std::string>* warnings) {
  std::map<std::string, std::unordered_map<std::uint64_t, std::vector<const TornadoEvent*>>> deposits_at;
  std::vector<const TornadoEvent*> claims;
  for (const auto& ev : events) {
    if (ev.kind == EventKind::deposit) {
      deposits_at[ev.pool_id][ev.block_number].push_back(&ev);
    } else if (ev.ap_claimed) {
      claims.push_back(&ev);
    }
  }
  std::sort(claims.begin(), claims.end(), [](const auto* a, const auto* b) {
    return std::tie(a->pool_id, a->block_number, a->tx_hash) < std::tie(b->pool_id, b->block_number, b->tx_hash);
  });

  std::set<std::string> warned;
  std::vector<Reveal> reveals;
  for (const auto* w : claims) {
    const auto* pool = pools.find(w->pool_id);
    if (!pool || !pool->ap_rate) {
      if (warned.insert(w->pool_id).second && warnings) {
        warnings->push_back("pool '" + w->pool_id + "' has no ap_rate; skipped for torn_mining");
      }
      continue;
    }
    auto blocks = pool->ap_rate->blocks_for(*w->ap_claimed);
    if (!blocks || *blocks == 0 || *blocks > w->block_number) continue;
    const std::uint64_t deposit_block = w->block_number - *blocks;
    auto pit = deposits_at.find(w->pool_id);
    if (pit == deposits_at.end()) continue;
    auto bit = pit->second.find(deposit_block);
    if (bit == pit->second.end() || bit->second.size() != 1) continue;
    const auto* d = bit->second.front();
    Reveal r;
    r.heuristic = Heuristic::torn_mining;
    r.pool_ids.insert(w->pool_id);
    r.deposit_txs.insert(d->tx_hash);
    r.withdraw_txs.insert(w->tx_hash);
    r.confidence = config.torn_mining_confidence;
    r.evidence = std::to_string(*w->ap_claimed) + " AP claimed implies " + std::to_string(*blocks) +
                 " blocks in " + w->pool_id;
    reveals.push_back(std::move(r));
  }
  return reveals;
}

std::vector<Reveal> run_all(const LedgerStore& store, const TornadoConfig& config, std::vector<std::string>* warnings) {
  const auto events = store.events();
  std::vector<Reveal> out;
  for (auto&& batch : {address_match(events, config), gas_price_match(events, config),
                       linked_eth(events, store, config), multi_denom(events, config),
                       torn_mining(events, store.pools(), config, warnings)}) {
    out.insert(out.end(), batch.begin(), batch.end());
  }
  return out;
}

std::string_view to_string(WalletLabel w) {
  switch (w) {
    case WalletLabel::blocknative_style:
      return "blocknative_style";
    case WalletLabel::legacy:
      return "legacy";
    case WalletLabel::unknown:
      return "unknown";
  }
  return "unknown";
}

WalletFingerprint wallet_fingerprint(const TxRecord& tx) {
  WalletFingerprint fp{tx.tx_hash, WalletLabel::unknown};
  if (!tx.max_fee) {
    fp.wallet_label = WalletLabel::legacy;
  } else if (tx.base_fee && tx.max_priority_fee &&
             tx.max_fee->value() == tx.base_fee->value() + 2 * tx.max_priority_fee->value()) {
    fp.wallet_label = WalletLabel::blocknative_style;
  }
  return fp;
}

std::vector<Cluster> lift_to_addresses(std::span<const Reveal> reveals, const LedgerStore& store) {
  std::vector<Cluster> clusters;
  for (const auto& r : reveals) {
    if (r.heuristic == Heuristic::address_match) continue;
    std::set<Address> actors;
    for (const auto* txs : {&r.deposit_txs, &r.withdraw_txs}) {
      for (const auto& h : *txs) {
        const auto* ev = store.find_event(h);
        if (ev && !store.registry().contains(ev->actor)) actors.insert(ev->actor);
      }
    }
    if (actors.size() < 2) continue;
    Cluster c;
    c.cluster_id = clusters.size();
    for (const auto& a : actors) {
      c.members.push_back(ClusterMember{a, MemberRole::eoa, r.confidence, std::string(to_string(r.heuristic))});
    }
    clusters.push_back(std::move(c));
  }
  return clusters;
}

PoolAudit audit_pool(std::string_view pool_id, std::span<const Reveal> reveals, const LedgerStore& store) {
  if (!store.pools().find(pool_id)) throw NotFoundError("unknown pool '" + std::string(pool_id) + "'");
  std::set<TxHash> compromised;
  for (const auto& r : reveals) {
    if (!r.pool_ids.count(std::string(pool_id))) continue;
    for (const auto& h : r.deposit_txs) {
      const auto* ev = store.find_event(h);
      if (ev && ev->kind == EventKind::deposit && ev->pool_id == pool_id) compromised.insert(h);
    }
  }
  PoolAudit audit;
  audit.pool_id = std::string(pool_id);
  audit.total_deposits = store.events_of(pool_id, EventKind::deposit).size();
  audit.compromised_deposits = compromised.size();
  audit.true_anonymity_set = audit.total_deposits - audit.compromised_deposits;
  return audit;
}

std::vector<PoolAudit> audit_all(std::span<const Reveal> reveals, const LedgerStore& store) {
  std::vector<PoolAudit> out;
  for (const auto& pool : store.pools().pools()) out.push_back(audit_pool(pool.pool_id, reveals, store));
  return out;
}

std::vector<RevealPair> expand_pairs(std::span<const Reveal> reveals, const LedgerStore& store) {
  std::vector<RevealPair> pairs;
  for (const auto& r : reveals) {
    for (const auto& pool : r.pool_ids) {
      std::vector<TxHash> ds, ws;
      for (const auto& h : r.deposit_txs) {
        const auto* ev = store.find_event(h);
        if (ev && ev->pool_id == pool) ds.push_back(h);
      }
      for (const auto& h : r.withdraw_txs) {
        const auto* ev = store.find_event(h);
        if (ev && ev->pool_id == pool) ws.push_back(h);
      }
      for (const auto& d : ds) {
        for (const auto& w : ws) pairs.push_back({r.heuristic, pool, d, w, r.confidence});
      }
    }
  }
  auto key = [](const RevealPair& p) { return std::tie(p.heuristic, p.pool_id, p.deposit_tx, p.withdraw_tx); };
  std::sort(pairs.begin(), pairs.end(), [&](const auto& a, const auto& b) {
    if (key(a) != key(b)) return key(a) < key(b);
    return a.confidence > b.confidence;
  });
  pairs.erase(std::unique(pairs.begin(), pairs.end(), [&](const auto& a, const auto& b) { return key(a) == key(b); }),
              pairs.end());
  return pairs;
}

void export_reveals(std::ostream& out, std::span<const Reveal> reveals, const LedgerStore& store) {
  csv::write_row(out, {"heuristic", "pool_id", "deposit_tx", "withdraw_tx", "confidence"});
  for (const auto& p : expand_pairs(reveals, store)) {
    csv::write_row(out, {std::string(to_string(p.heuristic)), p.pool_id, p.deposit_tx.hex(), p.withdraw_tx.hex(),
                         format_fixed(p.confidence, 6)});
  }
}

void export_audits(std::ostream& out, std::span<const PoolAudit> audits) {
  csv::write_row(out, {"pool_id", "total_deposits", "compromised", "true_anonymity_set"});
  for (const auto& a : audits) {
    csv::write_row(out, {a.pool_id, std::to_string(a.total_deposits), std::to_string(a.compromised_deposits),
                         std::to_string(a.true_anonymity_set)});
  }
}

}  // namespace tutela::tornado
