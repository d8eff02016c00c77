#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hgdr {

using Timestamp = std::int64_t;

struct RawInteraction {
  std::string user_key;
  std::string item_key;
  std::string domain_key;
  Timestamp timestamp = 0;
};

// Dense ids: user in [0, U), item domain-local in [0, I_d), domain in [0, |D|).
struct Interaction {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  std::uint32_t domain = 0;
  Timestamp timestamp = 0;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

// Bidirectional key <-> dense id table; ids are assigned in first-seen order.
class KeyMap {
 public:
  std::uint32_t intern(std::string_view key);
  std::optional<std::uint32_t> find(std::string_view key) const;
  const std::string& key(std::uint32_t id) const { return keys_.at(id); }
  std::size_t size() const { return keys_.size(); }
  const std::vector<std::string>& keys() const { return keys_; }

  friend bool operator==(const KeyMap& a, const KeyMap& b) { return a.keys_ == b.keys_; }

 private:
  std::vector<std::string> keys_;
  std::unordered_map<std::string, std::uint32_t> ids_;
};

// Item identity is (domain, item_key): an item key reused in two domains names two
// distinct items, so every item belongs to exactly one domain.
struct InteractionLog {
  KeyMap users;
  KeyMap domains;
  std::vector<KeyMap> items;  // one per domain
  std::vector<Interaction> interactions;

  std::size_t num_users() const { return users.size(); }
  std::size_t num_domains() const { return domains.size(); }
  std::vector<std::size_t> items_per_domain() const;

  RawInteraction to_raw(const Interaction& rec) const;

  // Throws std::out_of_range if any record references an unknown id.
  void validate() const;
};

// Accumulates raw records into an InteractionLog. Repeated (user, item, domain)
// records collapse to one that keeps the largest timestamp and the position of
// the first occurrence.
class LogBuilder {
 public:
  LogBuilder() = default;
  // Continue interning into an existing log's id maps.
  explicit LogBuilder(InteractionLog seed_maps);

  void add(const RawInteraction& raw);
  std::size_t size() const { return log_.interactions.size(); }
  InteractionLog finish() &&;

 private:
  struct PairHash {
    std::size_t operator()(const std::pair<std::uint64_t, std::uint64_t>& k) const noexcept {
      return std::hash<std::uint64_t>{}(k.first * 0x9E3779B97F4A7C15ULL ^ k.second);
    }
  };
  InteractionLog log_;
  std::unordered_map<std::pair<std::uint64_t, std::uint64_t>, std::size_t, PairHash> index_;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& msg);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct TsvFormat {
  char delimiter = '\t';
  char comment = '#';
};

// Reads `user_key <TAB> item_key <TAB> domain_key <TAB> timestamp` lines.
// Blank lines and comment lines are skipped; a file with no records is an error.
InteractionLog parse_log(const std::filesystem::path& path, const TsvFormat& fmt = {});
InteractionLog parse_log(std::istream& in, const std::string& source_name,
                         const TsvFormat& fmt = {});

void write_log_tsv(const InteractionLog& log, std::ostream& out);
void write_records_tsv(const InteractionLog& maps, const std::vector<Interaction>& records,
                       std::ostream& out);

struct SplitDataset {
  InteractionLog train;            // id maps cover every user and item of the full log
  std::vector<Interaction> test;   // at most one per (user, domain)

  InteractionLog combined() const;
};

// Holds out the latest interaction of every (user, domain) pair that has at
// least two. Ties on timestamp go to the larger item id.
SplitDataset split_leave_latest(const InteractionLog& log);

// Writes train.tsv and test.tsv into `dir` (created if missing).
void write_split(const SplitDataset& split, const std::filesystem::path& dir);
// Reads a directory produced by write_split. Ids are assigned by scanning
// train.tsv then test.tsv, so repeated reads agree.
SplitDataset read_split(const std::filesystem::path& dir);

struct DomainStats {
  std::string name;
  std::size_t users = 0;         // users with at least one interaction in the domain
  std::size_t items = 0;
  std::size_t interactions = 0;
  double sparsity_pct = 0.0;     // 100 * interactions / (users * items)
};

struct DatasetStats {
  std::vector<DomainStats> domains;
};

DatasetStats compute_stats(const InteractionLog& log);
double sparsity_percent(std::size_t users, std::size_t items, std::size_t interactions);

// Plain-text table with one column per domain and rows
// "# Users", "# Items", "# Interactions", "sparsity (%)".
std::string format_stats_table(const DatasetStats& stats);

}  // namespace hgdr
