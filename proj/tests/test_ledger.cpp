#include <gtest/gtest.h>

#include <map>
#include <set>
#include <sstream>

#include "test_support.hpp"
#include "tutela/csv.hpp"
#include "tutela/error.hpp"
#include "tutela/ledger.hpp"
#include "tutela/rng.hpp"

namespace tutela {
namespace {

using testing::addr;
using testing::hash;

const std::string kTxHeader =
    "tx_hash,block_number,timestamp,from_addr,to_addr,value_wei,token,gas_price_wei,max_fee_wei,max_priority_fee_wei,"
    "base_fee_wei\n";
const std::string kEventHeader = "tx_hash,block_number,timestamp,pool_id,kind,actor,gas_price_wei,via_relayer,ap_claimed\n";

std::string tx_line(std::uint64_t id, std::uint64_t block = 10, std::uint64_t from = 1, std::uint64_t to = 2) {
  return hash(id).hex() + "," + std::to_string(block) + "," + std::to_string(testing::ts_of(block)) + "," +
         addr(from).hex() + "," + addr(to).hex() + ",1000000000000000000,,20000000000,,,\n";
}

LedgerStore store_with_pool() {
  LedgerStore s;
  s.add_pool(testing::pool("1 ETH", 1));
  s.add_known_address({addr(99), "relay", Category::relayer});
  return s;
}

TEST(Ingest, EmptyStreamGivesEmptyReport) {
  LedgerStore s;
  std::istringstream in("");
  auto r = s.ingest_transactions(in);
  EXPECT_EQ(r.accepted, 0u);
  EXPECT_EQ(r.rejected, 0u);
}

TEST(Ingest, OneWellFormedRow) {
  LedgerStore s;
  std::istringstream in(kTxHeader + tx_line(1));
  auto r = s.ingest_transactions(in);
  EXPECT_EQ(r.accepted, 1u);
  EXPECT_EQ(r.rejected, 0u);
  EXPECT_EQ(s.transactions().size(), 1u);
  const auto& tx = s.transactions()[0];
  EXPECT_EQ(tx.value.value(), kWeiPerEther);
  EXPECT_TRUE(tx.is_ether());
  EXPECT_FALSE(tx.max_fee);
}

TEST(Ingest, DuplicateRowRejected) {
  LedgerStore s;
  std::istringstream in(kTxHeader + tx_line(1) + tx_line(1));
  auto r = s.ingest_transactions(in);
  EXPECT_EQ(r.accepted, 1u);
  EXPECT_EQ(r.rejected, 1u);
  ASSERT_EQ(r.issues.size(), 1u);
  EXPECT_EQ(r.issues[0].line, 3u);
  EXPECT_NE(r.issues[0].reason.find("duplicate"), std::string::npos);
}

TEST(Ingest, MalformedRowsRejectedWithReasons) {
  LedgerStore s;
  std::string bad_addr = tx_line(2);
  bad_addr.replace(bad_addr.find(addr(1).hex()), 42, "0xZZ");
  std::string bad_value = tx_line(3);
  bad_value.replace(bad_value.find("1000000000000000000"), 19, "12.5");
  std::istringstream in(kTxHeader + bad_addr + bad_value + "0x01,2\n" + tx_line(4));
  auto r = s.ingest_transactions(in);
  EXPECT_EQ(r.accepted, 1u);
  EXPECT_EQ(r.rejected, 3u);
  EXPECT_EQ(r.issues[0].reason, "malformed from_addr");
  EXPECT_EQ(r.issues[1].reason, "non-numeric value_wei");
}

TEST(Ingest, WrongHeaderThrows) {
  LedgerStore s;
  std::istringstream in("a,b,c\n");
  EXPECT_THROW(s.ingest_transactions(in), DataError);
  std::ifstream missing("/nonexistent/file.csv");
  EXPECT_THROW(s.ingest_transactions(missing), DataError);
}

TEST(Ingest, OptionalFeeFieldsAndTokens) {
  LedgerStore s;
  std::istringstream in(kTxHeader + hash(5).hex() + ",1,12," + addr(1).hex() + "," + addr(2).hex() +
                        ",7,DAI,102,104,2,100\n");
  s.ingest_transactions(in);
  ASSERT_EQ(s.transactions().size(), 1u);
  const auto& tx = s.transactions()[0];
  EXPECT_FALSE(tx.is_ether());
  EXPECT_EQ(tx.max_fee->value(), 104u);
  EXPECT_EQ(tx.max_priority_fee->value(), 2u);
  EXPECT_EQ(tx.base_fee->value(), 100u);
}

TEST(IngestEvents, RegisteredPoolAccepted) {
  auto s = store_with_pool();
  std::istringstream in(kEventHeader + hash(1).hex() + ",5,60,1 ETH,deposit," + addr(3).hex() + ",1,false,\n");
  auto r = s.ingest_tornado_events(in);
  EXPECT_EQ(r.accepted, 1u);
  EXPECT_EQ(s.events_of("1 ETH", EventKind::deposit).size(), 1u);
}

TEST(IngestEvents, UnknownPoolAndKindRejected) {
  auto s = store_with_pool();
  std::istringstream in(kEventHeader + hash(1).hex() + ",5,60,7 ETH,deposit," + addr(3).hex() + ",1,false,\n" +
                        hash(2).hex() + ",5,60,1 ETH,refund," + addr(3).hex() + ",1,false,\n");
  auto r = s.ingest_tornado_events(in);
  EXPECT_EQ(r.accepted, 0u);
  EXPECT_EQ(r.rejected, 2u);
  EXPECT_NE(r.issues[0].reason.find("unknown pool_id"), std::string::npos);
}

TEST(IngestEvents, RelayerFlagPreserved) {
  auto s = store_with_pool();
  std::istringstream in(kEventHeader + hash(1).hex() + ",5,60,1 ETH,withdraw," + addr(3).hex() + ",7,true,1000\n");
  ASSERT_EQ(s.ingest_tornado_events(in).accepted, 1u);
  const auto* ev = s.find_event(hash(1));
  ASSERT_NE(ev, nullptr);
  EXPECT_TRUE(ev->via_relayer);
  EXPECT_EQ(ev->actor, addr(3));
  EXPECT_EQ(ev->ap_claimed, 1000u);
}

TEST(IngestEvents, WithdrawActorMayNotBeTheRelayer) {
  auto s = store_with_pool();
  std::istringstream in(kEventHeader + hash(1).hex() + ",5,60,1 ETH,withdraw," + addr(99).hex() + ",7,true,\n");
  EXPECT_EQ(s.ingest_tornado_events(in).rejected, 1u);
}

TEST(IngestRegistry, PoolsAndKnownAddresses) {
  LedgerStore s;
  std::istringstream pools("pool_id,contract_addr,currency,denomination,ap_rate\n"
                           "0.1 ETH," + addr(1, 0xcc).hex() + ",ETH,0.1,2.5\n"
                           "bad," + addr(2, 0xcc).hex() + ",ETH,0,\n"
                           "dup," + addr(1, 0xcc).hex() + ",ETH,1,\n"
                           "100 DAI," + addr(3, 0xcc).hex() + ",DAI,100,\n");
  auto r = s.ingest_pools(pools);
  EXPECT_EQ(r.accepted, 2u);
  EXPECT_EQ(r.rejected, 2u);
  const auto* p = s.pools().find("0.1 ETH");
  ASSERT_NE(p, nullptr);
  EXPECT_EQ(p->ap_rate->numerator, 5u);
  EXPECT_EQ(p->ap_rate->denominator, 2u);
  EXPECT_FALSE(s.pools().find("100 DAI")->ap_rate);
  EXPECT_EQ(s.pools().find_by_contract(addr(3, 0xcc))->pool_id, "100 DAI");

  std::istringstream known("addr,label,category\n" + addr(7).hex() + ",\"Big, Exchange\",cex_main\n" +
                           addr(7).hex() + ",again,dex\n" + addr(8).hex() + ",x,bank\n");
  auto k = s.ingest_known_addresses(known);
  EXPECT_EQ(k.accepted, 1u);
  EXPECT_EQ(k.rejected, 2u);
  EXPECT_EQ(s.registry().find(addr(7))->label, "Big, Exchange");
  EXPECT_TRUE(s.registry().is(addr(7), Category::cex_main));
  EXPECT_EQ(s.registry().count(Category::cex_main), 1u);
}

TEST(ApRate, ParsesReducesAndDivides) {
  auto r = ApRate::parse("2.50");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->numerator, 5u);
  EXPECT_EQ(r->denominator, 2u);
  EXPECT_EQ(r->str(), "2.5");
  EXPECT_EQ(ApRate::parse("10")->str(), "10");
  EXPECT_EQ(ApRate::parse("0.125")->str(), "0.125");
  EXPECT_FALSE(ApRate::parse("0"));
  EXPECT_FALSE(ApRate::parse("-1"));
  EXPECT_FALSE(ApRate::parse("abc"));
  EXPECT_EQ(ApRate::parse("10")->blocks_for(1000), 100u);
  EXPECT_FALSE(ApRate::parse("10")->blocks_for(1005));
  EXPECT_EQ(r->blocks_for(250), 100u);
  EXPECT_FALSE(r->blocks_for(251));
}

TEST(Interactions, CountsBothDirectionsAndSkipsSelf) {
  LedgerStore s;
  const auto a = addr(1), b = addr(2), c = addr(3);
  s.add_transaction(testing::transfer(1, a, b, Wei(1), 1));
  s.add_transaction(testing::transfer(2, a, b, Wei(1), 2));
  s.add_transaction(testing::transfer(3, b, a, Wei(1), 3));
  s.add_transaction(testing::transfer(4, a, a, Wei(1), 4));
  s.add_transaction(testing::transfer(5, a, c, Wei(1), 5));
  s.seal();
  EXPECT_EQ(s.interactions_between(a, b), 3u);
  EXPECT_EQ(s.interactions_between(b, a), 3u);
  EXPECT_EQ(s.interactions_between(a, a), 0u);
  EXPECT_EQ(s.interactions_between(b, c), 0u);
  EXPECT_EQ(s.interactions_between(addr(40), addr(41)), 0u);
  auto cp = s.counterparties(a);
  ASSERT_EQ(cp.size(), 2u);
  EXPECT_EQ(cp[0], std::make_pair(b, std::size_t{3}));
  EXPECT_EQ(cp[1], std::make_pair(c, std::size_t{1}));
}

TEST(Seal, RejectsMutationAfterSeal) {
  LedgerStore s;
  s.seal();
  EXPECT_TRUE(s.sealed());
  EXPECT_THROW(s.add_transaction(testing::transfer(1, addr(1), addr(2), Wei(1), 1)), std::logic_error);
  std::istringstream in("");
  EXPECT_THROW(s.ingest_transactions(in), std::logic_error);
}

TEST(Seal, RejectsTimestampsRunningBackwards) {
  LedgerStore s;
  auto t1 = testing::transfer(1, addr(1), addr(2), Wei(1), 10);
  auto t2 = testing::transfer(2, addr(1), addr(2), Wei(1), 20);
  t2.timestamp = t1.timestamp - 1;
  s.add_transaction(t1);
  s.add_transaction(t2);
  EXPECT_THROW(s.seal(), DataError);
}

// Random store for the index and round-trip properties.
LedgerStore random_store(std::uint64_t seed, std::vector<TxRecord>* txs_out = nullptr,
                         std::vector<TornadoEvent>* evs_out = nullptr) {
  Rng rng = make_rng(seed);
  LedgerStore s;
  s.add_pool(testing::pool("a", 1));
  s.add_pool(testing::pool("b", 2));
  for (std::uint64_t i = 0; i < 2000; ++i) {
    auto block = uniform_range(rng, 1, 5000);
    auto tx = testing::transfer(i, addr(uniform_below(rng, 150)), addr(uniform_below(rng, 150)),
                                Wei(uniform_below(rng, 1'000'000)), block);
    if (bernoulli(rng, 0.3)) tx.max_fee = Wei(uniform_below(rng, 1000));
    if (bernoulli(rng, 0.1)) tx.token = "DAI";
    if (txs_out) txs_out->push_back(tx);
    s.add_transaction(tx);
  }
  for (std::uint64_t i = 0; i < 300; ++i) {
    auto ev = testing::event(i, bernoulli(rng, 0.5) ? EventKind::deposit : EventKind::withdraw,
                             bernoulli(rng, 0.5) ? "a" : "b", addr(uniform_below(rng, 150)),
                             uniform_range(rng, 1, 5000), Wei(uniform_below(rng, 1u << 30)), bernoulli(rng, 0.4));
    if (ev.kind == EventKind::withdraw && bernoulli(rng, 0.3)) ev.ap_claimed = uniform_below(rng, 10000);
    if (evs_out) evs_out->push_back(ev);
    s.add_event(ev);
  }
  s.seal();
  return s;
}

TEST(Properties, IndexesMatchBruteForce) {
  std::vector<TxRecord> txs;
  auto s = random_store(5, &txs);
  ASSERT_EQ(s.transactions().size(), txs.size());
  for (std::uint64_t n = 0; n < 150; ++n) {
    const auto a = addr(n);
    std::size_t from = 0, to = 0;
    for (const auto& tx : txs) {
      from += tx.from_addr == a;
      to += tx.to_addr == a;
    }
    EXPECT_EQ(s.by_from(a).size(), from);
    EXPECT_EQ(s.by_to(a).size(), to);
    for (auto i : s.by_from(a)) EXPECT_EQ(s.transactions()[i].from_addr, a);
  }
}

TEST(Properties, EventPartitionPerPool) {
  auto s = random_store(6);
  for (const char* pool : {"a", "b"}) {
    std::set<TxHash> deposits, withdraws;
    for (auto i : s.events_of(pool, EventKind::deposit)) deposits.insert(s.events()[i].tx_hash);
    for (auto i : s.events_of(pool, EventKind::withdraw)) withdraws.insert(s.events()[i].tx_hash);
    std::size_t in_pool = 0;
    for (const auto& ev : s.events()) {
      if (ev.pool_id != pool) continue;
      ++in_pool;
      EXPECT_TRUE(ev.kind == EventKind::deposit ? deposits.count(ev.tx_hash) : withdraws.count(ev.tx_hash));
    }
    EXPECT_EQ(deposits.size() + withdraws.size(), in_pool);
    for (const auto& h : deposits) EXPECT_FALSE(withdraws.count(h));
  }
}

TEST(Properties, ExportIngestRoundTrip) {
  auto s = random_store(7);
  std::ostringstream txs, evs;
  s.export_transactions(txs);
  s.export_events(evs);

  LedgerStore back;
  back.add_pool(testing::pool("a", 1));
  back.add_pool(testing::pool("b", 2));
  std::istringstream tin(txs.str()), ein(evs.str());
  EXPECT_EQ(back.ingest_transactions(tin).rejected, 0u);
  EXPECT_EQ(back.ingest_tornado_events(ein).rejected, 0u);
  back.seal();

  auto key = [](const auto& rows) {
    std::multiset<std::vector<std::string>> m;
    for (const auto& r : rows) m.insert(to_row(r));
    return m;
  };
  EXPECT_EQ(key(s.transactions()), key(back.transactions()));
  EXPECT_EQ(key(s.events()), key(back.events()));

  std::ostringstream again;
  back.export_transactions(again);
  EXPECT_EQ(again.str(), txs.str());

  // Export order is (block_number, tx_hash).
  std::istringstream ordered(txs.str());
  csv::Reader r(ordered);
  r.next();
  std::pair<std::uint64_t, std::string> prev{0, ""};
  while (auto row = r.next()) {
    std::pair<std::uint64_t, std::string> cur{std::stoull((*row)[1]), (*row)[0]};
    EXPECT_LE(prev, cur);
    prev = cur;
  }
}

TEST(LoadDirectory, ReadsFixtureAndReportsEachFile) {
  auto loaded = load_directory(testing::fixture("tiny"));
  EXPECT_TRUE(loaded.store.sealed());
  EXPECT_EQ(loaded.reports.size(), 4u);
  for (const auto& [name, rep] : loaded.reports) EXPECT_EQ(rep.rejected, 0u) << name;
  EXPECT_EQ(loaded.store.pools().size(), 3u);
  EXPECT_EQ(loaded.store.events().size(), 12u);
  EXPECT_THROW(load_directory("/nonexistent/dir"), DataError);
}

}  // namespace
}  // namespace tutela
