#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "tutela/anonscore.hpp"
#include "tutela/cluster.hpp"
#include "tutela/darcluster.hpp"
#include "tutela/diffembed.hpp"
#include "tutela/ledger.hpp"
#include "tutela/tornado.hpp"

namespace tutela::gateway {

struct ServiceOptions {
  std::filesystem::path data_dir;
  // "Now" for the weekly timeline. Defaults to the newest timestamp in the ledger.
  std::optional<std::int64_t> as_of;
  std::size_t neighbors_k = 9;
  dar::DarConfig dar;
  tornado::TornadoConfig tornado;
  score::ScoreConfig score;
};

struct Response {
  int status = 200;
  std::string body;
};

using Query = std::multimap<std::string, std::string>;

// Hex SHA-256 of the lowercase 0x-prefixed address text.
std::string check_digest(const Address& addr);

// Read-only indexes over one data directory: the ledger files, optional
// dar_clusters.csv (computed when absent) and optional embeddings.bin. Safe for
// concurrent readers once constructed.
class Service {
 public:
  explicit Service(const ServiceOptions& options);
  // For tests: wraps an already sealed store.
  Service(LedgerStore store, const ServiceOptions& options);

  Response handle(std::string_view path, const Query& query = {}) const;

  nlohmann::json address_summary(const Address& addr) const;
  nlohmann::json transactions(const Address& addr, std::int64_t as_of) const;
  // Throws NotFoundError for an unknown pool.
  nlohmann::json pool(std::string_view pool_id) const;
  nlohmann::json pools() const;
  // `prefix` must be 4 lowercase hex characters.
  nlohmann::json check(std::string_view prefix) const;

  score::AnonymityReport report(const Address& addr) const;

  std::int64_t as_of() const { return as_of_; }
  const LedgerStore& store() const { return store_; }
  std::span<const tornado::Reveal> reveals() const { return reveals_; }
  std::span<const Cluster> dar_clusters() const { return dar_clusters_; }
  std::span<const std::string> digests() const { return digests_; }

 private:
  void build(const std::filesystem::path& dar_file, const std::filesystem::path& embedding_file);
  std::optional<Cluster> node_cluster(const Address& addr) const;

  struct TimelineEntry {
    std::int64_t timestamp;
    std::size_t pair;
  };

  ServiceOptions options_;
  LedgerStore store_;
  std::int64_t as_of_ = 0;
  std::vector<Cluster> dar_clusters_;
  std::unordered_map<Address, std::size_t> dar_of_;
  std::optional<embed::EmbeddingTable> embeddings_;
  std::vector<tornado::Reveal> reveals_;
  std::vector<tornado::RevealPair> pairs_;
  std::vector<Cluster> tornado_clusters_;
  std::unordered_map<Address, std::vector<std::size_t>> tornado_of_;
  std::map<std::string, tornado::PoolAudit, std::less<>> audits_;
  std::unordered_map<Address, std::vector<TimelineEntry>> timeline_;
  std::vector<Address> tornado_actors_;
  std::unordered_map<TxHash, bool> revealed_withdraws_;
  // Sorted.
  std::vector<std::string> digests_;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<std::filesystem::path> static_dir;
  // One line per request with long hex runs masked; defaults to stderr.
  std::function<void(const std::string&)> log;
};

// Masks every hex run of 16 or more characters down to its first four.
std::string redact(std::string_view text);

class Server {
 public:
  Server(std::shared_ptr<const Service> service, ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds (port 0 picks a free one) and returns the bound port; throws ConfigError on failure.
  int bind();
  // Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Client side of the private check: hash locally, send only the prefix, compare the
// returned digests locally. `fetch` performs GET /api/check/{prefix} and returns the body.
bool check_compromised(const Address& addr, const std::function<std::string(const std::string& path)>& fetch);

}  // namespace tutela::gateway
