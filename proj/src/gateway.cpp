#include "tutela/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>

#include <httplib.h>
#include <openssl/sha.h>

#include "tutela/error.hpp"

namespace tutela::gateway {

namespace {

constexpr std::int64_t kWeek = 7 * 86400;
constexpr std::string_view kPopulationLabel = "mean reveals per Tornado-active address";

nlohmann::json error_body(std::string_view code, std::string_view message) {
  return {{"error", {{"code", code}, {"message", message}}}};
}

Response json_response(int status, const nlohmann::json& body) { return {status, body.dump() + "\n"}; }

bool is_hex_prefix(std::string_view s) {
  return s.size() == 4 &&
         std::all_of(s.begin(), s.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); });
}

nlohmann::json audit_json(const tornado::PoolAudit& a) {
  return {{"pool_id", a.pool_id},
          {"total_deposits", a.total_deposits},
          {"compromised_deposits", a.compromised_deposits},
          {"true_anonymity_set", a.true_anonymity_set}};
}

}  // namespace

std::string check_digest(const Address& addr) {
  const std::string text = addr.hex();
  unsigned char md[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(text.data()), text.size(), md);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * SHA256_DIGEST_LENGTH);
  for (unsigned char b : md) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xF]);
  }
  return out;
}

Service::Service(const ServiceOptions& options) : options_(options) {
  auto loaded = load_directory(options.data_dir);
  store_ = std::move(loaded.store);
  build(options.data_dir / "dar_clusters.csv", options.data_dir / "embeddings.bin");
}

Service::Service(LedgerStore store, const ServiceOptions& options) : options_(options), store_(std::move(store)) {
  if (!store_.sealed()) store_.seal();
  build(options.data_dir.empty() ? std::filesystem::path() : options.data_dir / "dar_clusters.csv",
        options.data_dir.empty() ? std::filesystem::path() : options.data_dir / "embeddings.bin");
}

void Service::build(const std::filesystem::path& dar_file, const std::filesystem::path& embedding_file) {
  options_.score.validate();
  if (options_.neighbors_k == 0) throw ConfigError("neighbors_k must be >= 1");

  if (!dar_file.empty() && std::filesystem::exists(dar_file)) {
    std::ifstream in(dar_file);
    dar_clusters_ = import_clusters(in);
  } else if (store_.registry().count(Category::cex_main) > 0) {
    dar_clusters_ = dar::build_clusters(dar::detect_tuples(store_, options_.dar));
  }
  for (std::size_t i = 0; i < dar_clusters_.size(); ++i) {
    for (const auto& m : dar_clusters_[i].members) dar_of_.emplace(m.addr, i);
  }

  if (!embedding_file.empty() && std::filesystem::exists(embedding_file)) {
    std::ifstream in(embedding_file, std::ios::binary);
    embeddings_ = embed::EmbeddingTable::load(in);
  }

  reveals_ = tornado::run_all(store_, options_.tornado);
  pairs_ = tornado::expand_pairs(reveals_, store_);
  tornado_clusters_ = tornado::lift_to_addresses(reveals_, store_);
  for (std::size_t i = 0; i < tornado_clusters_.size(); ++i) {
    for (const auto& m : tornado_clusters_[i].members) tornado_of_[m.addr].push_back(i);
  }
  for (const auto& a : tornado::audit_all(reveals_, store_)) audits_.emplace(a.pool_id, a);

  std::set<Address> revealed_actors;
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    const auto* d = store_.find_event(pairs_[i].deposit_tx);
    const auto* w = store_.find_event(pairs_[i].withdraw_tx);
    if (!d || !w) continue;
    revealed_withdraws_[w->tx_hash] = true;
    revealed_actors.insert(d->actor);
    revealed_actors.insert(w->actor);
    // A reveal is dated by its withdraw, the transaction that exposed the link.
    timeline_[d->actor].push_back({w->timestamp, i});
    if (w->actor != d->actor) timeline_[w->actor].push_back({w->timestamp, i});
  }
  for (const auto& r : reveals_) {
    for (const auto& h : r.deposit_txs) {
      if (const auto* ev = store_.find_event(h)) revealed_actors.insert(ev->actor);
    }
    for (const auto& h : r.withdraw_txs) {
      if (const auto* ev = store_.find_event(h)) revealed_actors.insert(ev->actor);
    }
  }
  for (const auto& a : revealed_actors) digests_.push_back(check_digest(a));
  std::sort(digests_.begin(), digests_.end());

  std::set<Address> actors;
  for (const auto& ev : store_.events()) actors.insert(ev.actor);
  tornado_actors_.assign(actors.begin(), actors.end());

  if (options_.as_of) {
    as_of_ = *options_.as_of;
  } else {
    for (const auto& tx : store_.transactions()) as_of_ = std::max(as_of_, tx.timestamp);
    for (const auto& ev : store_.events()) as_of_ = std::max(as_of_, ev.timestamp);
  }
}

std::optional<Cluster> Service::node_cluster(const Address& addr) const {
  if (!embeddings_ || !embeddings_->find(addr)) return std::nullopt;
  const auto hits = embed::neighbors(*embeddings_, addr, options_.neighbors_k);
  if (hits.empty()) return std::nullopt;
  Cluster c;
  double sum = 0.0;
  for (const auto& h : hits) {
    c.members.push_back({h.addr, MemberRole::eoa, h.kappa, "node"});
    sum += std::clamp(h.kappa, 0.0, 1.0);
  }
  c.members.push_back({addr, MemberRole::eoa, sum / static_cast<double>(hits.size()), "node"});
  std::sort(c.members.begin(), c.members.end(), [](const auto& a, const auto& b) { return a.addr < b.addr; });
  return c;
}

score::AnonymityReport Service::report(const Address& addr) const {
  const Cluster* dar = nullptr;
  if (auto it = dar_of_.find(addr); it != dar_of_.end()) dar = &dar_clusters_[it->second];
  const auto node = node_cluster(addr);
  std::vector<Cluster> tc;
  if (auto it = tornado_of_.find(addr); it != tornado_of_.end()) {
    for (auto i : it->second) tc.push_back(tornado_clusters_[i]);
  }
  return score::combined_report(addr, dar, node ? &*node : nullptr, tc, options_.score);
}

nlohmann::json Service::address_summary(const Address& addr) const {
  const auto rep = report(addr);

  auto linked = nlohmann::json::array();
  auto add_members = [&](const Cluster& c) {
    for (const auto& m : c.members) {
      if (m.addr == addr) continue;
      linked.push_back({{"addr", m.addr.hex()},
                        {"type", std::string(to_string(m.role))},
                        {"kappa", m.kappa},
                        {"heuristic", m.heuristic}});
    }
  };
  if (auto it = dar_of_.find(addr); it != dar_of_.end()) add_members(dar_clusters_[it->second]);
  if (const auto node = node_cluster(addr)) add_members(*node);
  if (auto it = tornado_of_.find(addr); it != tornado_of_.end()) {
    for (auto i : it->second) add_members(tornado_clusters_[i]);
  }

  std::size_t deposits = 0, withdraws = 0, linked_withdraws = 0;
  for (auto i : store_.events_by_actor(addr)) {
    const auto& ev = store_.events()[i];
    if (ev.kind == EventKind::deposit) {
      ++deposits;
    } else {
      ++withdraws;
      if (revealed_withdraws_.count(ev.tx_hash)) ++linked_withdraws;
    }
  }

  return {{"addr", addr.hex()},
          {"score_display", rep.score_display},
          {"linked_addresses", std::move(linked)},
          {"tornado_stats",
           {{"deposit_count", deposits}, {"withdraw_count", withdraws}, {"linked_withdraw_count", linked_withdraws}}}};
}

nlohmann::json Service::transactions(const Address& addr, std::int64_t as_of) const {
  std::map<std::int64_t, std::vector<const TimelineEntry*>> buckets;
  std::size_t count = 0;
  if (auto it = timeline_.find(addr); it != timeline_.end()) {
    for (const auto& e : it->second) {
      if (e.timestamp > as_of) continue;
      buckets[(as_of - e.timestamp) / kWeek].push_back(&e);
      ++count;
    }
  }

  auto weekly = nlohmann::json::array();
  for (auto& [week, entries] : buckets) {
    std::sort(entries.begin(), entries.end(), [](const auto* a, const auto* b) {
      return std::tie(a->timestamp, a->pair) < std::tie(b->timestamp, b->pair);
    });
    auto records = nlohmann::json::array();
    for (const auto* e : entries) {
      const auto& p = pairs_[e->pair];
      records.push_back({{"heuristic", std::string(tornado::to_string(p.heuristic))},
                         {"pool_id", p.pool_id},
                         {"deposit_tx", p.deposit_tx.hex()},
                         {"withdraw_tx", p.withdraw_tx.hex()},
                         {"confidence", p.confidence},
                         {"timestamp", e->timestamp}});
    }
    weekly.push_back({{"week_index_before_now", week}, {"reveals", std::move(records)}});
  }

  std::size_t active = 0, total = 0;
  for (const auto& a : tornado_actors_) {
    bool seen = false;
    for (auto i : store_.events_by_actor(a)) {
      if (store_.events()[i].timestamp <= as_of) {
        seen = true;
        break;
      }
    }
    if (!seen) continue;
    ++active;
    if (auto it = timeline_.find(a); it != timeline_.end()) {
      total += static_cast<std::size_t>(std::count_if(it->second.begin(), it->second.end(),
                                                      [&](const TimelineEntry& e) { return e.timestamp <= as_of; }));
    }
  }
  const double mean = active == 0 ? 0.0 : static_cast<double>(total) / static_cast<double>(active);

  return {{"addr", addr.hex()},
          {"as_of", as_of},
          {"weekly_buckets", std::move(weekly)},
          {"stats", {{"reveal_count", count}, {"population_mean", mean}, {"label", kPopulationLabel}}}};
}

nlohmann::json Service::pool(std::string_view pool_id) const {
  auto it = audits_.find(pool_id);
  if (it == audits_.end()) throw NotFoundError("unknown pool '" + std::string(pool_id) + "'");
  return audit_json(it->second);
}

nlohmann::json Service::pools() const {
  auto arr = nlohmann::json::array();
  for (const auto& p : store_.pools().pools()) {
    auto j = audit_json(audits_.at(p.pool_id));
    j["currency"] = p.currency;
    j["denomination"] = p.denomination;
    arr.push_back(std::move(j));
  }
  return {{"pools", std::move(arr)}};
}

nlohmann::json Service::check(std::string_view prefix) const {
  auto lo = std::lower_bound(digests_.begin(), digests_.end(), prefix);
  auto matches = nlohmann::json::array();
  for (auto it = lo; it != digests_.end() && std::string_view(*it).substr(0, prefix.size()) == prefix; ++it) {
    matches.push_back(*it);
  }
  return {{"prefix", prefix}, {"digests", std::move(matches)}};
}

Response Service::handle(std::string_view path, const Query& query) const {
  auto tail = [&](std::string_view route) -> std::optional<std::string_view> {
    if (path.substr(0, route.size()) != route) return std::nullopt;
    return path.substr(route.size());
  };
  auto parse_addr = [](std::string_view s) { return Address::parse(s); };

  try {
    if (auto rest = tail("/api/address/")) {
      auto addr = parse_addr(*rest);
      if (!addr) return json_response(400, error_body("malformed_address", "expected 0x followed by 40 hex digits"));
      return json_response(200, address_summary(*addr));
    }
    if (auto rest = tail("/api/transactions/")) {
      auto addr = parse_addr(*rest);
      if (!addr) return json_response(400, error_body("malformed_address", "expected 0x followed by 40 hex digits"));
      std::int64_t as_of = as_of_;
      if (auto it = query.find("as_of"); it != query.end()) {
        const auto& v = it->second;
        auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), as_of);
        if (ec != std::errc() || ptr != v.data() + v.size()) {
          return json_response(400, error_body("malformed_as_of", "as_of must be an integer unix timestamp"));
        }
      }
      return json_response(200, transactions(*addr, as_of));
    }
    if (auto rest = tail("/api/pool/")) {
      if (audits_.find(*rest) == audits_.end()) {
        return json_response(404, error_body("unknown_pool", "no pool with id '" + std::string(*rest) + "'"));
      }
      return json_response(200, pool(*rest));
    }
    if (auto rest = tail("/api/check/")) {
      if (!is_hex_prefix(*rest)) {
        return json_response(400, error_body("malformed_prefix", "expected exactly 4 hex characters"));
      }
      std::string lower(*rest);
      std::transform(lower.begin(), lower.end(), lower.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      return json_response(200, check(lower));
    }
    if (path == "/api/pools") return json_response(200, pools());
    return json_response(404, error_body("not_found", "no such endpoint"));
  } catch (const std::exception& e) {
    return json_response(500, error_body("internal", e.what()));
  }
}

std::string redact(std::string_view text) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t j = i;
    while (j < text.size() && std::isxdigit(static_cast<unsigned char>(text[j]))) ++j;
    if (j - i >= 16) {
      out.append(text.substr(i, 4));
      out.append("...");
      i = j;
    } else if (j > i) {
      out.append(text.substr(i, j - i));
      i = j;
    } else {
      out.push_back(text[i++]);
    }
  }
  return out;
}

struct Server::Impl {
  std::shared_ptr<const Service> service;
  ServerOptions options;
  httplib::Server http;
  int port = 0;
};

Server::Server(std::shared_ptr<const Service> service, ServerOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->service = std::move(service);
  impl_->options = std::move(options);
  if (!impl_->options.log) {
    impl_->options.log = [](const std::string& line) { std::cerr << line << '\n'; };
  }
  auto& http = impl_->http;
  const auto* svc = impl_->service.get();
  http.Get(R"(/api/.*)", [svc](const httplib::Request& req, httplib::Response& res) {
    Query q;
    for (const auto& [k, v] : req.params) q.emplace(k, v);
    auto r = svc->handle(req.path, q);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  });
  if (impl_->options.static_dir) {
    if (!http.set_mount_point("/", impl_->options.static_dir->string())) {
      throw ConfigError("static directory not found: " + impl_->options.static_dir->string());
    }
  }
  auto log = impl_->options.log;
  http.set_logger([log](const httplib::Request& req, const httplib::Response& res) {
    log(req.method + " " + redact(req.path) + " " + std::to_string(res.status) + " " +
        std::to_string(res.body.size()));
  });
}

Server::~Server() { stop(); }

int Server::bind() {
  auto& o = impl_->options;
  if (o.port == 0) {
    impl_->port = impl_->http.bind_to_any_port(o.host);
  } else {
    impl_->port = impl_->http.bind_to_port(o.host, o.port) ? o.port : -1;
  }
  if (impl_->port < 0) throw ConfigError("cannot bind " + o.host + ":" + std::to_string(o.port));
  return impl_->port;
}

void Server::listen() { impl_->http.listen_after_bind(); }

void Server::stop() {
  if (impl_) impl_->http.stop();
}

bool check_compromised(const Address& addr, const std::function<std::string(const std::string& path)>& fetch) {
  const auto digest = check_digest(addr);
  const auto body = nlohmann::json::parse(fetch("/api/check/" + digest.substr(0, 4)));
  for (const auto& d : body.at("digests")) {
    if (d.get<std::string>() == digest) return true;
  }
  return false;
}

}  // namespace tutela::gateway
