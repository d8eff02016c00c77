#include "hgdr/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace hgdr {

std::uint32_t KeyMap::intern(std::string_view key) {
  auto it = ids_.find(std::string(key));
  if (it != ids_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(keys_.size());
  keys_.emplace_back(key);
  ids_.emplace(keys_.back(), id);
  return id;
}

std::optional<std::uint32_t> KeyMap::find(std::string_view key) const {
  auto it = ids_.find(std::string(key));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::size_t> InteractionLog::items_per_domain() const {
  std::vector<std::size_t> out;
  out.reserve(items.size());
  for (const auto& m : items) out.push_back(m.size());
  return out;
}

RawInteraction InteractionLog::to_raw(const Interaction& rec) const {
  return {users.key(rec.user), items.at(rec.domain).key(rec.item), domains.key(rec.domain),
          rec.timestamp};
}

void InteractionLog::validate() const {
  if (items.size() != domains.size())
    throw std::out_of_range("interaction log: item maps do not match domain count");
  for (std::size_t k = 0; k < interactions.size(); ++k) {
    const auto& r = interactions[k];
    if (r.user >= users.size() || r.domain >= domains.size() ||
        r.item >= items[r.domain].size()) {
      throw std::out_of_range("interaction log: record " + std::to_string(k) +
                              " references an unknown id");
    }
  }
}

LogBuilder::LogBuilder(InteractionLog seed_maps) : log_(std::move(seed_maps)) {
  for (std::size_t k = 0; k < log_.interactions.size(); ++k) {
    const auto& r = log_.interactions[k];
    index_.emplace(std::make_pair(std::uint64_t{r.user},
                                  (std::uint64_t{r.domain} << 32) | r.item),
                   k);
  }
}

void LogBuilder::add(const RawInteraction& raw) {
  const std::uint32_t u = log_.users.intern(raw.user_key);
  const std::uint32_t d = log_.domains.intern(raw.domain_key);
  if (log_.items.size() <= d) log_.items.resize(d + 1);
  const std::uint32_t i = log_.items[d].intern(raw.item_key);
  const auto key = std::make_pair(std::uint64_t{u}, (std::uint64_t{d} << 32) | i);
  auto [it, inserted] = index_.try_emplace(key, log_.interactions.size());
  if (inserted) {
    log_.interactions.push_back({u, i, d, raw.timestamp});
  } else {
    auto& existing = log_.interactions[it->second];
    existing.timestamp = std::max(existing.timestamp, raw.timestamp);
  }
}

InteractionLog LogBuilder::finish() && {
  index_.clear();
  return std::move(log_);
}

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& msg)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + msg), line_(line) {}

namespace {

std::vector<std::string_view> split_fields(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

void parse_into(std::istream& in, const std::string& source, const TsvFormat& fmt,
                LogBuilder& builder) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view(line);
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    if (view.empty() || view.front() == fmt.comment) continue;
    const auto fields = split_fields(view, fmt.delimiter);
    if (fields.size() != 4) {
      throw ParseError(source, lineno,
                       "expected 4 fields, found " + std::to_string(fields.size()));
    }
    for (std::size_t f = 0; f < 4; ++f) {
      if (fields[f].empty())
        throw ParseError(source, lineno, "field " + std::to_string(f + 1) + " is empty");
    }
    Timestamp ts = 0;
    const auto ts_field = fields[3];
    auto [ptr, ec] = std::from_chars(ts_field.data(), ts_field.data() + ts_field.size(), ts);
    if (ec != std::errc{} || ptr != ts_field.data() + ts_field.size()) {
      throw ParseError(source, lineno, "timestamp is not an integer: '" +
                                           std::string(ts_field) + "'");
    }
    builder.add({std::string(fields[0]), std::string(fields[1]), std::string(fields[2]), ts});
  }
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

}  // namespace

InteractionLog parse_log(std::istream& in, const std::string& source_name,
                         const TsvFormat& fmt) {
  LogBuilder builder;
  parse_into(in, source_name, fmt, builder);
  if (builder.size() == 0) throw ParseError(source_name, 0, "no interaction records");
  return std::move(builder).finish();
}

InteractionLog parse_log(const std::filesystem::path& path, const TsvFormat& fmt) {
  auto in = open_input(path);
  return parse_log(in, path.string(), fmt);
}

void write_records_tsv(const InteractionLog& maps, const std::vector<Interaction>& records,
                       std::ostream& out) {
  for (const auto& r : records) {
    const auto raw = maps.to_raw(r);
    out << raw.user_key << '\t' << raw.item_key << '\t' << raw.domain_key << '\t'
        << raw.timestamp << '\n';
  }
}

void write_log_tsv(const InteractionLog& log, std::ostream& out) {
  write_records_tsv(log, log.interactions, out);
}

InteractionLog SplitDataset::combined() const {
  InteractionLog out = train;
  out.interactions.insert(out.interactions.end(), test.begin(), test.end());
  return out;
}

SplitDataset split_leave_latest(const InteractionLog& log) {
  if (log.interactions.empty()) throw std::invalid_argument("split_leave_latest: empty log");
  const std::size_t num_domains = log.num_domains();
  const std::size_t n = log.interactions.size();

  // Per (user, domain): interaction count and index of the current latest record.
  struct Slot {
    std::size_t count = 0;
    std::size_t best = 0;
  };
  std::vector<Slot> slots(log.num_users() * num_domains);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& r = log.interactions[k];
    Slot& s = slots[std::size_t{r.user} * num_domains + r.domain];
    if (s.count == 0) {
      s.best = k;
    } else {
      const auto& b = log.interactions[s.best];
      // Later file order wins remaining ties, hence >= on the item comparison.
      if (r.timestamp > b.timestamp || (r.timestamp == b.timestamp && r.item >= b.item))
        s.best = k;
    }
    ++s.count;
  }

  std::vector<bool> held_out(n, false);
  for (const Slot& s : slots) {
    if (s.count >= 2) held_out[s.best] = true;
  }

  SplitDataset split;
  split.train.users = log.users;
  split.train.domains = log.domains;
  split.train.items = log.items;
  split.train.interactions.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (held_out[k]) {
      split.test.push_back(log.interactions[k]);
    } else {
      split.train.interactions.push_back(log.interactions[k]);
    }
  }
  return split;
}

void write_split(const SplitDataset& split, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream train(dir / "train.tsv", std::ios::binary);
  std::ofstream test(dir / "test.tsv", std::ios::binary);
  if (!train || !test) throw std::runtime_error("cannot write split files in " + dir.string());
  write_log_tsv(split.train, train);
  write_records_tsv(split.train, split.test, test);
}

SplitDataset read_split(const std::filesystem::path& dir) {
  LogBuilder builder;
  {
    auto in = open_input(dir / "train.tsv");
    parse_into(in, (dir / "train.tsv").string(), {}, builder);
  }
  const std::size_t train_count = builder.size();
  if (train_count == 0) throw ParseError((dir / "train.tsv").string(), 0, "no records");
  {
    auto in = open_input(dir / "test.tsv");
    parse_into(in, (dir / "test.tsv").string(), {}, builder);
  }
  InteractionLog all = std::move(builder).finish();
  SplitDataset split;
  split.test.assign(all.interactions.begin() + static_cast<std::ptrdiff_t>(train_count),
                    all.interactions.end());
  all.interactions.resize(train_count);
  split.train = std::move(all);
  return split;
}

double sparsity_percent(std::size_t users, std::size_t items, std::size_t interactions) {
  if (users == 0 || items == 0)
    throw std::invalid_argument("sparsity: domain has no users or no items");
  return 100.0 * static_cast<double>(interactions) /
         (static_cast<double>(users) * static_cast<double>(items));
}

DatasetStats compute_stats(const InteractionLog& log) {
  if (log.interactions.empty()) throw std::invalid_argument("compute_stats: empty log");
  const std::size_t num_domains = log.num_domains();
  DatasetStats stats;
  stats.domains.resize(num_domains);
  std::vector<std::vector<bool>> active(num_domains, std::vector<bool>(log.num_users(), false));
  for (const auto& r : log.interactions) {
    auto& ds = stats.domains[r.domain];
    ds.interactions += 1;
    if (!active[r.domain][r.user]) {
      active[r.domain][r.user] = true;
      ds.users += 1;
    }
  }
  for (std::size_t d = 0; d < num_domains; ++d) {
    auto& ds = stats.domains[d];
    ds.name = log.domains.key(static_cast<std::uint32_t>(d));
    ds.items = log.items[d].size();
    if (ds.items == 0) throw std::invalid_argument("compute_stats: domain '" + ds.name +
                                                   "' has zero items");
    ds.sparsity_pct = ds.users == 0 ? 0.0 : sparsity_percent(ds.users, ds.items, ds.interactions);
  }
  return stats;
}

std::string format_stats_table(const DatasetStats& stats) {
  std::ostringstream os;
  auto row = [&](const std::string& label, auto&& value) {
    os << label;
    for (const auto& d : stats.domains) os << '\t' << value(d);
    os << '\n';
  };
  row("Domain", [](const DomainStats& d) { return d.name; });
  row("# Users", [](const DomainStats& d) { return std::to_string(d.users); });
  row("# Items", [](const DomainStats& d) { return std::to_string(d.items); });
  row("# Interactions", [](const DomainStats& d) { return std::to_string(d.interactions); });
  row("sparsity (%)", [](const DomainStats& d) {
    std::ostringstream v;
    v << std::setprecision(4) << d.sparsity_pct;
    return v.str();
  });
  return os.str();
}

}  // namespace hgdr
