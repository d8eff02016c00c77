#include "hgdr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "hgdr/random.hpp"

namespace hgdr {

namespace {

// Sorted item lists per (user, domain).
class ObservedIndex {
 public:
  explicit ObservedIndex(const InteractionLog& log)
      : domains_(log.num_domains()), items_(log.num_users() * log.num_domains()) {
    for (const auto& r : log.interactions) items_[slot(r.user, r.domain)].push_back(r.item);
    for (auto& v : items_) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
  }

  const std::vector<std::uint32_t>& items(std::uint32_t user, std::uint32_t domain) const {
    return items_.at(slot(user, domain));
  }

 private:
  std::size_t slot(std::uint32_t user, std::uint32_t domain) const {
    return std::size_t{user} * domains_ + domain;
  }
  std::size_t domains_;
  std::vector<std::vector<std::uint32_t>> items_;
};

bool contains(const std::vector<std::uint32_t>& sorted, std::uint32_t x) {
  return std::binary_search(sorted.begin(), sorted.end(), x);
}

}  // namespace

EvalTaskSet build_eval_tasks(std::span<const Interaction> positives, const InteractionLog& observed,
                             std::uint64_t seed, const EvalOptions& opts) {
  const ObservedIndex index(observed);
  EvalTaskSet out;
  for (const auto& p : positives) {
    if (p.domain >= observed.num_domains() || p.user >= observed.num_users())
      throw std::out_of_range("build_eval_tasks: positive references an unknown id");
    const std::size_t num_items = observed.items[p.domain].size();
    const auto& seen = index.items(p.user, p.domain);
    // The positive itself counts as observed even if absent from `observed`.
    const std::size_t seen_count = seen.size() + (contains(seen, p.item) ? 0 : 1);
    const std::size_t eligible = num_items - std::min(num_items, seen_count);

    std::size_t want = opts.num_negatives;
    if (eligible < want) {
      if (!opts.allow_fewer_negatives || eligible == 0) {
        ++out.skipped;
        continue;
      }
      want = eligible;
    }

    Rng rng(mix_seed(seed, p.user, p.domain));
    EvalTask task{p.user, p.domain, p.item, {}};
    task.negatives.reserve(want);
    auto is_observed = [&](std::uint32_t i) { return i == p.item || contains(seen, i); };
    if (eligible >= 4 * want) {
      // Rejection sampling; `chosen` stays sorted for membership tests.
      std::vector<std::uint32_t> chosen;
      while (task.negatives.size() < want) {
        const auto i = static_cast<std::uint32_t>(uniform_index(rng, num_items));
        if (is_observed(i)) continue;
        auto it = std::lower_bound(chosen.begin(), chosen.end(), i);
        if (it != chosen.end() && *it == i) continue;
        chosen.insert(it, i);
        task.negatives.push_back(i);
      }
    } else {
      std::vector<std::uint32_t> pool;
      pool.reserve(eligible);
      for (std::uint32_t i = 0; i < num_items; ++i) {
        if (!is_observed(i)) pool.push_back(i);
      }
      for (std::size_t k = 0; k < want; ++k) {
        const std::size_t j = k + uniform_index(rng, pool.size() - k);
        std::swap(pool[k], pool[j]);
        task.negatives.push_back(pool[k]);
      }
    }
    out.tasks.push_back(std::move(task));
  }
  return out;
}

EvalTaskSet build_eval_tasks(const SplitDataset& split, std::uint64_t seed,
                             const EvalOptions& opts) {
  return build_eval_tasks(split.test, split.combined(), seed, opts);
}

std::size_t rank_of_positive(std::span<const double> scores, std::size_t pos_index) {
  if (pos_index >= scores.size()) throw std::out_of_range("rank_of_positive: bad positive index");
  for (double s : scores) {
    if (!std::isfinite(s)) throw std::domain_error("rank_of_positive: non-finite score");
  }
  const double p = scores[pos_index];
  std::size_t rank = 1;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (j != pos_index && scores[j] >= p) ++rank;
  }
  return rank;
}

HitNdcg hr_ndcg_at(std::span<const std::size_t> ranks, std::size_t cutoff) {
  if (ranks.empty()) throw std::invalid_argument("hr_ndcg_at: no ranks");
  double hits = 0.0;
  double gain = 0.0;
  for (auto r : ranks) {
    if (r == 0) throw std::invalid_argument("hr_ndcg_at: ranks are 1-based");
    if (r <= cutoff) {
      hits += 1.0;
      gain += 1.0 / std::log2(static_cast<double>(r) + 1.0);
    }
  }
  const double n = static_cast<double>(ranks.size());
  return {hits / n, gain / n};
}

std::vector<std::size_t> rank_tasks(const Activations& acts, std::span<const EvalTask> tasks) {
  std::vector<std::size_t> ranks;
  ranks.reserve(tasks.size());
  std::vector<double> scores;
  for (const auto& t : tasks) {
    if (t.domain >= acts.out_user.size()) throw std::out_of_range("rank_tasks: bad domain");
    const Matrix& ou = acts.out_user[t.domain];
    const Matrix& oi = acts.out_item[t.domain];
    const auto urow = ou.row(t.user);
    scores.clear();
    scores.push_back(score(urow, oi.row(t.positive)));
    for (auto j : t.negatives) scores.push_back(score(urow, oi.row(j)));
    ranks.push_back(rank_of_positive(scores, 0));
  }
  return ranks;
}

MetricReport evaluate(const Activations& acts, std::size_t num_domains,
                      std::span<const EvalTask> tasks, std::size_t cutoff) {
  const auto ranks = rank_tasks(acts, tasks);
  std::vector<std::vector<std::size_t>> per_domain(num_domains);
  for (std::size_t k = 0; k < tasks.size(); ++k) per_domain.at(tasks[k].domain).push_back(ranks[k]);
  MetricReport report;
  report.cutoff = cutoff;
  for (std::size_t d = 0; d < num_domains; ++d) {
    if (per_domain[d].empty()) {
      report.empty_domains.push_back(static_cast<std::uint32_t>(d));
      continue;
    }
    const HitNdcg m = hr_ndcg_at(per_domain[d], cutoff);
    report.domains.push_back({static_cast<std::uint32_t>(d), per_domain[d].size(), m.hr, m.ndcg});
  }
  return report;
}

MetricReport evaluate(const HeteroGraph& g, const ModelParams& params,
                      std::span<const EvalTask> tasks, std::size_t cutoff) {
  return evaluate(forward(g, params), params.config.num_domains(), tasks, cutoff);
}

namespace {

std::string domain_name(const std::vector<std::string>& names, std::uint32_t d) {
  return d < names.size() ? names[d] : "domain" + std::to_string(d);
}

}  // namespace

std::string format_report_tsv(const MetricReport& report, const std::vector<std::string>& names) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << "domain\tusers\tHR@" << report.cutoff << "\tNDCG@" << report.cutoff << '\n';
  for (const auto& m : report.domains) {
    os << domain_name(names, m.domain) << '\t' << m.users << '\t' << m.hr << '\t' << m.ndcg << '\n';
  }
  return os.str();
}

std::string format_report_kv(const MetricReport& report, const std::vector<std::string>& names) {
  std::ostringstream os;
  os.precision(17);
  for (const auto& m : report.domains) {
    const std::string n = domain_name(names, m.domain);
    os << n << ".users=" << m.users << '\n';
    os << n << ".hr_at_" << report.cutoff << '=' << m.hr << '\n';
    os << n << ".ndcg_at_" << report.cutoff << '=' << m.ndcg << '\n';
  }
  return os.str();
}

}  // namespace hgdr
