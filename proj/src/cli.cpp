#include "tutela/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <memory>

#include <CLI11.hpp>

#include "tutela/csv.hpp"
#include "tutela/darcluster.hpp"
#include "tutela/diffembed.hpp"
#include "tutela/error.hpp"
#include "tutela/gateway.hpp"
#include "tutela/ledger.hpp"
#include "tutela/synthchain.hpp"
#include "tutela/tornado.hpp"

namespace tutela {

namespace {

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : std::move(fallback);
}

std::filesystem::path require_data(const std::string& data) {
  if (data.empty()) throw ConfigError("no data directory: pass --data or set TUTELA_DATA_DIR");
  return data;
}

// "-" means the given stream.
template <typename Fn>
void with_output(const std::string& target, std::ostream& fallback, Fn fn, bool binary = false) {
  if (target == "-") {
    fn(fallback);
    return;
  }
  std::ofstream out(target, binary ? std::ios::binary : std::ios::out);
  if (!out) throw DataError("cannot write " + target);
  fn(out);
  if (!out) throw DataError("write failed: " + target);
}

void print_reports(std::ostream& out, const LoadedDirectory& loaded) {
  for (const auto& [file, rep] : loaded.reports) {
    out << file << ": accepted " << rep.accepted << ", rejected " << rep.rejected << '\n';
    const std::size_t shown = std::min<std::size_t>(rep.issues.size(), 10);
    for (std::size_t i = 0; i < shown; ++i) {
      out << "  line " << rep.issues[i].line << ": " << rep.issues[i].reason << '\n';
    }
    if (rep.issues.size() > shown) out << "  ... " << rep.issues.size() - shown << " more\n";
  }
}

std::pair<std::string, int> split_bind(const std::string& bind) {
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) throw ConfigError("bind address must be host:port, got '" + bind + "'");
  try {
    return {bind.substr(0, colon), std::stoi(bind.substr(colon + 1))};
  } catch (const std::exception&) {
    throw ConfigError("bad port in bind address '" + bind + "'");
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Address clustering and mixer auditing over transaction data.", "tutela");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::string data = env_or("TUTELA_DATA_DIR", "");
  auto add_data = [&](CLI::App* cmd) {
    cmd->add_option("--data", data, "Directory with transactions.csv, events.csv, pools.csv, known_addresses.csv")
        ->envname("TUTELA_DATA_DIR");
  };

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate ledger files and optionally write normalized copies");
  add_data(ingest);
  std::string ingest_out;
  ingest->add_option("--out", ingest_out, "Directory for normalized, sorted copies");

  // cluster-dar
  auto* cluster = app.add_subcommand("cluster-dar", "Cluster addresses by deposit-address reuse");
  add_data(cluster);
  std::string cluster_out;
  dar::DarConfig dar_cfg;
  cluster->add_option("--out", cluster_out, "Cluster file ('-' for stdout; default <data>/dar_clusters.csv)");
  cluster->add_option("--alpha", dar_cfg.alpha, "Amount threshold in ETH")->capture_default_str();
  cluster->add_option("--tau", dar_cfg.tau, "Time threshold in blocks")->capture_default_str();

  // embed
  auto* embed_cmd = app.add_subcommand("embed", "Train node embeddings on the interaction graph");
  add_data(embed_cmd);
  std::string embed_out, corpus_out;
  embed::EmbedConfig ecfg;
  embed_cmd->add_option("--out", embed_out, "Embedding file (default <data>/embeddings.bin)");
  embed_cmd->add_option("--corpus", corpus_out, "Also write the walk corpus here");
  embed_cmd->add_option("--dim", ecfg.dim, "Embedding dimension")->capture_default_str();
  embed_cmd->add_option("--subgraph-size", ecfg.subgraph_size, "Diffusion subgraph size")->capture_default_str();
  embed_cmd->add_option("--window", ecfg.window, "Context window")->capture_default_str();
  embed_cmd->add_option("--walks", ecfg.walks_per_node, "Walks per node")->capture_default_str();
  embed_cmd->add_option("--epochs", ecfg.epochs, "Training epochs")->capture_default_str();
  embed_cmd->add_option("--lr", ecfg.learning_rate, "Initial learning rate")->capture_default_str();
  embed_cmd->add_option("--negative", ecfg.negative_samples, "Negative samples per pair")->capture_default_str();
  embed_cmd->add_option("--seed", ecfg.seed, "Random seed")->capture_default_str();
  embed_cmd->add_option("--threads", ecfg.threads, "Threads for walk generation")->capture_default_str();

  // tornado-reveal
  auto* reveal = app.add_subcommand("tornado-reveal", "Link mixer deposits to withdrawals");
  add_data(reveal);
  std::string reveal_out = "-";
  tornado::TornadoConfig tcfg;
  reveal->add_option("--out", reveal_out, "Reveal file ('-' for stdout)")->capture_default_str();
  reveal->add_flag("--relaxed-multi-denom", tcfg.relaxed_multi_denom,
                   "Accept depositor portfolios that cover the withdrawals");
  reveal->add_option("--min-interactions", tcfg.linked_eth_min_interactions, "Linked-ETH interaction threshold")
      ->capture_default_str();

  // audit
  auto* audit = app.add_subcommand("audit", "True anonymity set per pool");
  add_data(audit);
  std::string audit_pool;
  audit->add_option("--pool", audit_pool, "Only this pool");
  audit->add_flag("--relaxed-multi-denom", tcfg.relaxed_multi_denom,
                  "Accept depositor portfolios that cover the withdrawals");

  // score
  auto* score_cmd = app.add_subcommand("score", "Anonymity report for one address");
  add_data(score_cmd);
  std::string score_addr;
  std::size_t k = 9;
  score_cmd->add_option("addr", score_addr, "0x-prefixed address")->required();
  score_cmd->add_option("--k", k, "Embedding neighbors")->capture_default_str();

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset with ground truth");
  std::string synth_config, synth_out = "synth";
  std::optional<std::uint64_t> synth_seed;
  std::optional<std::size_t> synth_entities;
  synth_cmd->add_option("--config", synth_config, "Config file of key = value lines");
  synth_cmd->add_option("--seed", synth_seed, "Override the seed");
  synth_cmd->add_option("--entities", synth_entities, "Override n_entities");
  synth_cmd->add_option("--out", synth_out, "Output directory")->capture_default_str();

  // serve
  auto* serve = app.add_subcommand("serve", "HTTP JSON service");
  add_data(serve);
  std::string bind = env_or("TUTELA_BIND", "127.0.0.1:8080");
  std::optional<std::int64_t> as_of;
  std::string static_dir;
  serve->add_option("--bind", bind, "host:port")->envname("TUTELA_BIND")->capture_default_str();
  serve->add_option("--as-of", as_of, "Unix time treated as now (default: newest ledger timestamp)");
  serve->add_option("--static", static_dir, "Directory served at /");
  serve->add_option("--k", k, "Embedding neighbors")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (ingest->parsed()) {
      auto loaded = load_directory(require_data(data));
      print_reports(out, loaded);
      if (!ingest_out.empty()) {
        std::filesystem::create_directories(ingest_out);
        const std::filesystem::path dir(ingest_out);
        with_output((dir / "transactions.csv").string(), out, [&](std::ostream& o) { loaded.store.export_transactions(o); });
        with_output((dir / "events.csv").string(), out, [&](std::ostream& o) { loaded.store.export_events(o); });
        with_output((dir / "known_addresses.csv").string(), out, [&](std::ostream& o) {
          csv::write_row(o, LedgerStore::known_addresses_header());
          for (const auto& e : loaded.store.registry().entries()) csv::write_row(o, to_row(e));
        });
        with_output((dir / "pools.csv").string(), out, [&](std::ostream& o) {
          csv::write_row(o, LedgerStore::pools_header());
          for (const auto& p : loaded.store.pools().pools()) csv::write_row(o, to_row(p));
        });
      }
      return 0;
    }

    if (cluster->parsed()) {
      dar_cfg.validate();
      const auto dir = require_data(data);
      auto loaded = load_directory(dir);
      const auto tuples = dar::detect_tuples(loaded.store, dar_cfg);
      const auto clusters = dar::build_clusters(tuples);
      const std::string target = cluster_out.empty() ? (dir / "dar_clusters.csv").string() : cluster_out;
      with_output(target, out, [&](std::ostream& o) { export_clusters(o, clusters); });
      if (target != "-") out << "tuples: " << tuples.size() << "\nclusters: " << clusters.size() << '\n';
      return 0;
    }

    if (embed_cmd->parsed()) {
      ecfg.validate();
      const auto dir = require_data(data);
      auto loaded = load_directory(dir);
      const auto graph = embed::build_graph(loaded.store);
      const auto corpus = embed::build_corpus(graph, ecfg);
      if (!corpus_out.empty()) {
        with_output(corpus_out, out, [&](std::ostream& o) { embed::write_corpus(o, corpus); });
      }
      embed::TrainStats stats;
      const auto table = embed::train(corpus, ecfg, &stats);
      const std::string target = embed_out.empty() ? (dir / "embeddings.bin").string() : embed_out;
      with_output(target, out, [&](std::ostream& o) { table.save(o); }, true);
      out << "nodes: " << table.size() << "\nsequences: " << corpus.sequences.size() << '\n';
      if (!stats.epoch_loss.empty()) out << "final loss: " << format_fixed(stats.epoch_loss.back(), 6) << '\n';
      return 0;
    }

    if (reveal->parsed()) {
      auto loaded = load_directory(require_data(data));
      std::vector<std::string> warnings;
      const auto reveals = tornado::run_all(loaded.store, tcfg, &warnings);
      for (const auto& w : warnings) err << "warning: " << w << '\n';
      with_output(reveal_out, out, [&](std::ostream& o) { tornado::export_reveals(o, reveals, loaded.store); });
      return 0;
    }

    if (audit->parsed()) {
      auto loaded = load_directory(require_data(data));
      std::vector<std::string> warnings;
      const auto reveals = tornado::run_all(loaded.store, tcfg, &warnings);
      for (const auto& w : warnings) err << "warning: " << w << '\n';
      std::vector<tornado::PoolAudit> audits;
      if (audit_pool.empty()) {
        audits = tornado::audit_all(reveals, loaded.store);
      } else {
        audits.push_back(tornado::audit_pool(audit_pool, reveals, loaded.store));
      }
      tornado::export_audits(out, audits);
      return 0;
    }

    if (score_cmd->parsed()) {
      const auto addr = Address::parse(score_addr);
      if (!addr) {
        err << "error: malformed address '" << score_addr << "'\n";
        return 1;
      }
      gateway::ServiceOptions opts;
      opts.data_dir = require_data(data);
      opts.neighbors_k = k;
      const gateway::Service service(opts);
      out << service.address_summary(*addr).dump(2) << '\n';
      return 0;
    }

    if (synth_cmd->parsed()) {
      synth::SynthConfig cfg = synth_config.empty() ? synth::SynthConfig{} : synth::SynthConfig::load(synth_config);
      if (synth_seed) cfg.seed = *synth_seed;
      if (synth_entities) cfg.n_entities = *synth_entities;
      const auto dataset = synth::generate(cfg);
      synth::write_dataset(dataset, synth_out);
      out << "transactions: " << dataset.transactions.size() << "\nevents: " << dataset.events.size()
          << "\nplanted reveals: " << dataset.truth.planted.size() << "\nwrote " << synth_out << '\n';
      return 0;
    }

    if (serve->parsed()) {
      gateway::ServiceOptions opts;
      opts.data_dir = require_data(data);
      opts.as_of = as_of;
      opts.neighbors_k = k;
      auto service = std::make_shared<const gateway::Service>(opts);
      auto [host, port] = split_bind(bind);
      gateway::ServerOptions sopts;
      sopts.host = host;
      sopts.port = port;
      if (!static_dir.empty()) sopts.static_dir = static_dir;
      gateway::Server server(service, sopts);
      const int bound = server.bind();
      err << "listening on " << host << ':' << bound << '\n';
      server.listen();
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace tutela
