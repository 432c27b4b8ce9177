#include "tutela/cluster.hpp"

#include <algorithm>
#include <charconv>
#include <map>

#include "tutela/csv.hpp"
#include "tutela/error.hpp"

namespace tutela {

namespace {

const std::vector<std::string> kHeader = {"cluster_id", "addr", "role", "kappa", "heuristic"};

}  // namespace

std::string_view to_string(MemberRole r) {
  switch (r) {
    case MemberRole::eoa:
      return "eoa";
    case MemberRole::deposit:
      return "deposit";
    case MemberRole::exchange:
      return "exchange";
  }
  return "eoa";
}

std::optional<MemberRole> parse_member_role(std::string_view text) {
  if (text == "eoa") return MemberRole::eoa;
  if (text == "deposit") return MemberRole::deposit;
  if (text == "exchange") return MemberRole::exchange;
  return std::nullopt;
}

const ClusterMember* Cluster::find(const Address& a) const {
  auto it = std::lower_bound(members.begin(), members.end(), a,
                             [](const ClusterMember& m, const Address& x) { return m.addr < x; });
  return it != members.end() && it->addr == a ? &*it : nullptr;
}

void export_clusters(std::ostream& out, std::span<const Cluster> clusters) {
  std::vector<const Cluster*> sorted;
  for (const auto& c : clusters) sorted.push_back(&c);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const Cluster* a, const Cluster* b) { return a->cluster_id < b->cluster_id; });
  csv::write_row(out, kHeader);
  for (const auto* c : sorted) {
    std::vector<const ClusterMember*> members;
    for (const auto& m : c->members) members.push_back(&m);
    std::stable_sort(members.begin(), members.end(),
                     [](const ClusterMember* a, const ClusterMember* b) { return a->addr < b->addr; });
    for (const auto* m : members) {
      csv::write_row(out, {std::to_string(c->cluster_id), m->addr.hex(), std::string(to_string(m->role)),
                           format_fixed(m->kappa, 6), m->heuristic});
    }
  }
}

std::vector<Cluster> import_clusters(std::istream& in) {
  if (!in) throw DataError("unreadable cluster stream");
  csv::Reader reader(in);
  csv::expect_header(reader, kHeader);
  std::map<std::uint64_t, Cluster> by_id;
  while (auto row = reader.next()) {
    const auto& f = *row;
    auto fail = [&](const char* what) {
      return DataError("cluster file line " + std::to_string(reader.line_number()) + ": " + what);
    };
    if (f.size() != 5) throw fail("expected 5 fields");
    std::uint64_t id = 0;
    auto [p, ec] = std::from_chars(f[0].data(), f[0].data() + f[0].size(), id);
    if (ec != std::errc{} || p != f[0].data() + f[0].size()) throw fail("bad cluster_id");
    auto addr = Address::parse(f[1]);
    if (!addr) throw fail("bad addr");
    auto role = parse_member_role(f[2]);
    if (!role) throw fail("bad role");
    double kappa = 0.0;
    try {
      kappa = std::stod(f[3]);
    } catch (const std::exception&) {
      throw fail("bad kappa");
    }
    auto& c = by_id[id];
    c.cluster_id = id;
    c.members.push_back(ClusterMember{*addr, *role, kappa, f[4]});
  }
  std::vector<Cluster> out;
  for (auto& [_, c] : by_id) {
    std::sort(c.members.begin(), c.members.end(),
              [](const auto& x, const auto& y) { return x.addr < y.addr; });
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace tutela
