#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hgdr/data.hpp"
#include "hgdr/eval.hpp"
#include "hgdr/model.hpp"
#include "hgdr/numeric.hpp"
#include "hgdr/training.hpp"

namespace hgdr {

// ---------------------------------------------------------------------------
// Synthetic multi-domain implicit feedback.
//
// Each user has a global latent vector z and one private vector p_d per domain;
// the domain preference is sqrt(s) z + sqrt(1 - s) p_d with s = shared_signal,
// so the correlation between a user's preferences in two domains is s. Items
// have independent latent vectors. A user's items in domain d are drawn without
// replacement with probability proportional to
//   exp(u_d . v_i / (sqrt(k) * temperature) - popularity_skew * ln(i + 1)).
// ---------------------------------------------------------------------------
struct SyntheticSpec {
  std::size_t num_users = 1000;
  std::size_t num_domains = 3;
  std::size_t items_per_domain = 500;
  std::size_t latent_dim = 8;
  double shared_signal = 0.5;
  std::size_t interactions_per_user = 10;  // per domain
  double temperature = 1.0;
  double popularity_skew = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct DomainManifest {
  std::size_t items_declared = 0;
  std::size_t items_observed = 0;
  std::size_t users_active = 0;
  std::size_t interactions = 0;
  std::map<std::uint32_t, std::size_t> user_degree_histogram;
  std::map<std::uint32_t, std::size_t> item_degree_histogram;  // observed items only

  friend bool operator==(const DomainManifest&, const DomainManifest&) = default;
};

struct SyntheticManifest {
  std::size_t num_users = 0;
  std::size_t total_interactions = 0;
  std::vector<DomainManifest> domains;

  friend bool operator==(const SyntheticManifest&, const SyntheticManifest&) = default;
};

struct SyntheticDataset {
  InteractionLog log;
  SyntheticManifest manifest;
  Matrix global_latent;             // U x k
  std::vector<Matrix> user_latent;  // per domain U x k
  std::vector<Matrix> item_latent;  // per domain, indexed by generator item index
};

SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

std::string format_manifest(const SyntheticManifest& manifest);
void write_synthetic(const SyntheticDataset& data, const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Comparison models. All variants share the trainer and evaluator; only the
// forward and backward paths differ.
// ---------------------------------------------------------------------------
ModelConfig mf_bpr_config(ModelConfig base);
// mode: "full", "specific_only" or "shared_only".
ModelConfig ablation_config(ModelConfig base, std::string_view mode);

struct ExperimentSettings {
  std::size_t dim = 128;
  std::size_t layers = 2;
  bool tie_relation_weights = false;
  bool mean_aggregation = false;
  TrainConfig train;
  EvalOptions eval;
  std::uint64_t eval_seed = 7;
  bool use_validation = false;
  std::size_t validate_every = 10;
};

struct ExperimentResult {
  MetricReport test;
  FitResult fit;
  HeteroGraph graph;
};

// Trains `mode` on split.train with parameters initialised from `seed`
// (the triplet sampler also uses `seed`), then evaluates on split.test.
// With use_validation the latest training interaction per (user, domain) is
// held out again and the best-validating parameters are kept.
ExperimentResult run_experiment(const SplitDataset& split, ModelMode mode,
                                const ExperimentSettings& settings, std::uint64_t seed,
                                const std::function<void(const EpochReport&)>& on_epoch = {});

// Mean NDCG over the domains present in the report.
double mean_ndcg(const MetricReport& report);

}  // namespace hgdr
