#include "hgdr/graph.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <string>

#include "binary_io.hpp"

namespace hgdr {

namespace {

Csr build_csr(std::size_t num_targets, std::size_t num_sources,
              const std::vector<std::pair<std::uint32_t, std::uint32_t>>& pairs) {
  Csr csr;
  csr.offsets.assign(num_targets + 1, 0);
  for (const auto& [t, s] : pairs) {
    if (t >= num_targets || s >= num_sources)
      throw std::out_of_range("build_graph: edge endpoint out of range");
    csr.offsets[t + 1] += 1;
  }
  for (std::size_t t = 0; t < num_targets; ++t) csr.offsets[t + 1] += csr.offsets[t];
  csr.indices.resize(pairs.size());
  std::vector<std::uint32_t> cursor(csr.offsets.begin(), csr.offsets.end() - 1);
  for (const auto& [t, s] : pairs) csr.indices[cursor[t]++] = s;
  for (std::size_t t = 0; t < num_targets; ++t) {
    std::sort(csr.indices.begin() + csr.offsets[t], csr.indices.begin() + csr.offsets[t + 1]);
  }
  return csr;
}

void check_csr(const Csr& csr, std::size_t targets, std::size_t sources) {
  if (csr.offsets.size() != targets + 1 || csr.offsets.front() != 0 ||
      csr.offsets.back() != csr.indices.size())
    throw std::invalid_argument("graph: malformed CSR offsets");
  for (std::size_t t = 0; t < targets; ++t) {
    if (csr.offsets[t] > csr.offsets[t + 1])
      throw std::invalid_argument("graph: CSR offsets not monotone");
  }
  for (auto s : csr.indices) {
    if (s >= sources) throw std::out_of_range("graph: CSR index out of range");
  }
}

}  // namespace

HeteroGraph::HeteroGraph(std::size_t num_users, std::vector<std::size_t> items_per_domain,
                         std::vector<Csr> item_to_user, std::vector<Csr> user_to_item)
    : num_users_(num_users),
      items_per_domain_(std::move(items_per_domain)),
      iu_(std::move(item_to_user)),
      ui_(std::move(user_to_item)) {
  if (iu_.size() != items_per_domain_.size() || ui_.size() != items_per_domain_.size())
    throw std::invalid_argument("graph: relation count does not match domain count");
  for (std::size_t d = 0; d < items_per_domain_.size(); ++d) {
    check_csr(iu_[d], num_users_, items_per_domain_[d]);
    check_csr(ui_[d], items_per_domain_[d], num_users_);
    if (iu_[d].num_edges() != ui_[d].num_edges())
      throw std::invalid_argument("graph: IU and UI edge counts differ");
  }
}

std::size_t HeteroGraph::num_edges() const {
  std::size_t n = 0;
  for (const auto& c : iu_) n += c.num_edges();
  return n;
}

const Csr& HeteroGraph::relation(RelationId rel) const {
  if (rel.domain >= num_domains()) throw std::out_of_range("graph: domain out of range");
  return rel.direction == Direction::ItemToUser ? iu_[rel.domain] : ui_[rel.domain];
}

HeteroGraph build_graph(std::size_t num_users, const std::vector<std::size_t>& items_per_domain,
                        std::span<const Edge> edges) {
  const std::size_t num_domains = items_per_domain.size();
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> iu_pairs(num_domains);
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> ui_pairs(num_domains);
  for (const auto& e : edges) {
    if (e.domain >= num_domains) throw std::out_of_range("build_graph: domain out of range");
    iu_pairs[e.domain].emplace_back(e.user, e.item);
    ui_pairs[e.domain].emplace_back(e.item, e.user);
  }
  std::vector<Csr> iu;
  std::vector<Csr> ui;
  for (std::size_t d = 0; d < num_domains; ++d) {
    iu.push_back(build_csr(num_users, items_per_domain[d], iu_pairs[d]));
    ui.push_back(build_csr(items_per_domain[d], num_users, ui_pairs[d]));
  }
  return HeteroGraph(num_users, items_per_domain, std::move(iu), std::move(ui));
}

HeteroGraph build_graph(const InteractionLog& train) {
  if (train.interactions.empty()) throw std::invalid_argument("build_graph: empty training log");
  std::vector<Edge> edges;
  edges.reserve(train.interactions.size());
  for (const auto& r : train.interactions) edges.push_back({r.user, r.item, r.domain});
  return build_graph(train.num_users(), train.items_per_domain(), edges);
}

std::span<const std::uint32_t> neighbors(const HeteroGraph& g, RelationId rel,
                                         std::uint32_t node) {
  const Csr& csr = g.relation(rel);
  if (node >= csr.num_targets()) {
    throw std::out_of_range("neighbors: node " + std::to_string(node) + " out of range");
  }
  return std::span<const std::uint32_t>(csr.indices)
      .subspan(csr.offsets[node], csr.offsets[node + 1] - csr.offsets[node]);
}

std::map<std::uint32_t, std::size_t> degree_histogram(const HeteroGraph& g, RelationId rel) {
  const Csr& csr = g.relation(rel);
  std::map<std::uint32_t, std::size_t> hist;
  for (std::size_t t = 0; t < csr.num_targets(); ++t) hist[csr.degree(t)] += 1;
  return hist;
}

void dump_graph(const HeteroGraph& g, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  detail::write_u32(out, g.num_domains());
  detail::write_u32(out, g.num_users());
  for (auto n : g.items_per_domain()) detail::write_u32(out, n);
  auto write_csr = [&](const Csr& c) {
    detail::write_u32(out, c.num_edges());
    for (auto v : c.offsets) detail::write_u32(out, v);
    for (auto v : c.indices) detail::write_u32(out, v);
  };
  for (std::size_t d = 0; d < g.num_domains(); ++d) {
    write_csr(g.item_to_user(d));
    write_csr(g.user_to_item(d));
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

HeteroGraph load_graph_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::size_t num_domains = detail::read_u32(in);
  const std::size_t num_users = detail::read_u32(in);
  std::vector<std::size_t> items(num_domains);
  for (auto& n : items) n = detail::read_u32(in);
  auto read_csr = [&](std::size_t targets) {
    Csr c;
    const std::size_t edges = detail::read_u32(in);
    c.offsets.resize(targets + 1);
    for (auto& v : c.offsets) v = detail::read_u32(in);
    c.indices.resize(edges);
    for (auto& v : c.indices) v = detail::read_u32(in);
    return c;
  };
  std::vector<Csr> iu;
  std::vector<Csr> ui;
  for (std::size_t d = 0; d < num_domains; ++d) {
    iu.push_back(read_csr(num_users));
    ui.push_back(read_csr(items[d]));
  }
  return HeteroGraph(num_users, std::move(items), std::move(iu), std::move(ui));
}

}  // namespace hgdr
