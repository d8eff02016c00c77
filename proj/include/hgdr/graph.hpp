#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "hgdr/data.hpp"

namespace hgdr {

// ItemToUser: targets are users, neighbors are the domain's items.
// UserToItem: targets are the domain's items, neighbors are users.
enum class Direction : std::uint8_t { ItemToUser = 0, UserToItem = 1 };

struct RelationId {
  std::uint32_t domain = 0;
  Direction direction = Direction::ItemToUser;

  friend bool operator==(const RelationId&, const RelationId&) = default;
};

struct Csr {
  std::vector<std::uint32_t> offsets;  // #targets + 1
  std::vector<std::uint32_t> indices;  // sorted ascending within each target

  std::size_t num_targets() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  std::size_t num_edges() const { return indices.size(); }
  std::uint32_t degree(std::size_t t) const { return offsets[t + 1] - offsets[t]; }

  friend bool operator==(const Csr&, const Csr&) = default;
};

// Global user-item graph across all domains. Users are shared; items are
// domain-local. Only user-item edges are stored, two relations per domain.
class HeteroGraph {
 public:
  HeteroGraph() = default;
  HeteroGraph(std::size_t num_users, std::vector<std::size_t> items_per_domain,
              std::vector<Csr> item_to_user, std::vector<Csr> user_to_item);

  std::size_t num_users() const { return num_users_; }
  std::size_t num_domains() const { return items_per_domain_.size(); }
  std::size_t num_items(std::size_t domain) const { return items_per_domain_.at(domain); }
  const std::vector<std::size_t>& items_per_domain() const { return items_per_domain_; }
  std::size_t num_edges() const;

  const Csr& relation(RelationId rel) const;
  const Csr& item_to_user(std::size_t domain) const { return iu_.at(domain); }
  const Csr& user_to_item(std::size_t domain) const { return ui_.at(domain); }

  friend bool operator==(const HeteroGraph&, const HeteroGraph&) = default;

 private:
  std::size_t num_users_ = 0;
  std::vector<std::size_t> items_per_domain_;
  std::vector<Csr> iu_;
  std::vector<Csr> ui_;
};

struct Edge {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  std::uint32_t domain = 0;
};

HeteroGraph build_graph(std::size_t num_users, const std::vector<std::size_t>& items_per_domain,
                        std::span<const Edge> edges);
HeteroGraph build_graph(const InteractionLog& train);

std::span<const std::uint32_t> neighbors(const HeteroGraph& g, RelationId rel,
                                         std::uint32_t node);

// degree -> number of target nodes with that degree
std::map<std::uint32_t, std::size_t> degree_histogram(const HeteroGraph& g, RelationId rel);

// Little-endian u32 dump: |D|, U, I_0..I_{D-1}, then for each domain the IU
// and UI relations as (edge count, offsets, indices).
void dump_graph(const HeteroGraph& g, const std::filesystem::path& path);
HeteroGraph load_graph_dump(const std::filesystem::path& path);

}  // namespace hgdr
