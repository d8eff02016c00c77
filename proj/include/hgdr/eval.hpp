#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hgdr/data.hpp"
#include "hgdr/graph.hpp"
#include "hgdr/model.hpp"

namespace hgdr {

struct EvalTask {
  std::uint32_t user = 0;
  std::uint32_t domain = 0;
  std::uint32_t positive = 0;
  std::vector<std::uint32_t> negatives;

  friend bool operator==(const EvalTask&, const EvalTask&) = default;
};

struct EvalOptions {
  std::size_t num_negatives = 99;
  // Use every eligible item when fewer than num_negatives exist instead of
  // skipping the user. Only for tiny diagnostic datasets.
  bool allow_fewer_negatives = false;
  std::size_t cutoff = 10;
};

struct EvalTaskSet {
  std::vector<EvalTask> tasks;
  std::size_t skipped = 0;  // positives without enough unobserved items
};

// Negatives are drawn uniformly without replacement from the domain's items the
// user never interacted with in `observed`; deterministic per (seed, user, domain).
EvalTaskSet build_eval_tasks(std::span<const Interaction> positives, const InteractionLog& observed,
                             std::uint64_t seed, const EvalOptions& opts = {});
// Positives are the held-out test records; train and test both count as observed.
EvalTaskSet build_eval_tasks(const SplitDataset& split, std::uint64_t seed,
                             const EvalOptions& opts = {});

// 1 + number of other candidates scoring >= the positive (ties rank the positive last).
std::size_t rank_of_positive(std::span<const double> scores, std::size_t pos_index);

struct HitNdcg {
  double hr = 0.0;
  double ndcg = 0.0;
};

HitNdcg hr_ndcg_at(std::span<const std::size_t> ranks, std::size_t cutoff = 10);

struct DomainMetrics {
  std::uint32_t domain = 0;
  std::size_t users = 0;
  double hr = 0.0;
  double ndcg = 0.0;

  friend bool operator==(const DomainMetrics&, const DomainMetrics&) = default;
};

struct MetricReport {
  std::size_t cutoff = 10;
  std::vector<DomainMetrics> domains;       // domains with at least one task, ascending id
  std::vector<std::uint32_t> empty_domains; // domains omitted for lack of tasks

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

// Per-task ranks, in task order.
std::vector<std::size_t> rank_tasks(const Activations& acts, std::span<const EvalTask> tasks);

MetricReport evaluate(const Activations& acts, std::size_t num_domains,
                      std::span<const EvalTask> tasks, std::size_t cutoff = 10);
MetricReport evaluate(const HeteroGraph& g, const ModelParams& params,
                      std::span<const EvalTask> tasks, std::size_t cutoff = 10);

// Tab-separated: domain, users, HR@K, NDCG@K (fractions in [0, 1]).
std::string format_report_tsv(const MetricReport& report, const std::vector<std::string>& names);
// key=value lines, e.g. "Book.hr_at_10=0.71".
std::string format_report_kv(const MetricReport& report, const std::vector<std::string>& names);

}  // namespace hgdr
