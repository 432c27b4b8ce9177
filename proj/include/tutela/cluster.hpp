#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tutela/types.hpp"

namespace tutela {

enum class MemberRole { eoa, deposit, exchange };

std::string_view to_string(MemberRole r);
std::optional<MemberRole> parse_member_role(std::string_view text);

struct ClusterMember {
  Address addr;
  MemberRole role = MemberRole::eoa;
  double kappa = 0.0;
  // Which heuristic bound this member: "dar", "node", "gas_price", ...
  std::string heuristic;
};

// Addresses believed co-owned. Members are kept sorted by address, each at most once.
struct Cluster {
  std::uint64_t cluster_id = 0;
  std::vector<ClusterMember> members;

  const ClusterMember* find(const Address& a) const;
  bool contains(const Address& a) const { return find(a) != nullptr; }
};

// `cluster_id,addr,role,kappa,heuristic`, ordered by (cluster_id, addr).
void export_clusters(std::ostream& out, std::span<const Cluster> clusters);
std::vector<Cluster> import_clusters(std::istream& in);

}  // namespace tutela
