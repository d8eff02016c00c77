#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "hgdr/graph.hpp"
#include "hgdr/model.hpp"
#include "hgdr/numeric.hpp"
#include "hgdr/random.hpp"

namespace hgdr {

struct TrainConfig {
  std::size_t epochs = 200;
  // Triplets sampled per domain per epoch; 0 means one per training edge.
  std::size_t triplets_per_epoch = 0;
  AdamConfig adam;
  double lambda_reg = 1e-5;
  // Per-domain loss weights; empty selects interaction-count proportions.
  std::vector<double> domain_weights;
  std::uint64_t seed = 42;
  // Count the L2 penalty inside every domain objective (scaled by its weight)
  // instead of once on the total.
  bool reg_per_domain = false;
  // One optimizer step per domain per epoch instead of a joint weighted step.
  bool alternate_domains = false;

  void validate() const;
};

struct Triplet {
  std::uint32_t user = 0;
  std::uint32_t pos = 0;
  std::uint32_t neg = 0;
  std::uint32_t domain = 0;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

struct TripletBatch {
  std::vector<Triplet> triplets;
  std::size_t skipped = 0;  // draws abandoned after exhausting negative retries
};

inline constexpr int kMaxNegativeRetries = 100;

// Positives uniform over the domain's edges; negatives uniform over the
// domain's items, rejecting interacted ones.
TripletBatch sample_triplets(const HeteroGraph& g, std::uint32_t domain, std::size_t count,
                             Rng& rng);

// -ln sigmoid(x_pos - x_neg), evaluated as softplus(x_neg - x_pos).
double bpr_loss(double x_pos, double x_neg);
// d loss / d (x_pos - x_neg) = -(1 - sigmoid(diff)).
double bpr_grad(double diff);
double softplus(double z);

struct ScorePair {
  double pos = 0.0;
  double neg = 0.0;
};

// Mean BPR loss over the batch plus lambda * squared_norm.
double domain_loss(std::span<const ScorePair> scores, double lambda, double squared_norm);
double domain_loss(const Activations& acts, std::span<const Triplet> triplets, double lambda,
                   const ModelParams& params);

struct LossBreakdown {
  std::vector<double> domain_bpr;  // mean BPR per domain (0 for domains without triplets)
  double regularization = 0.0;     // penalty as it enters the total
  double total = 0.0;
};

struct Objective {
  std::vector<double> domain_weights;
  double lambda = 0.0;
  bool reg_per_domain = false;
};

// Total = sum_d w_d * mean_bpr_d + lambda * ||theta||^2 (the penalty is scaled by
// sum_d w_d when reg_per_domain is set).
LossBreakdown evaluate_objective(const HeteroGraph& g, const ModelParams& params,
                                 const std::vector<std::vector<Triplet>>& batches,
                                 const Objective& obj);
LossBreakdown evaluate_objective(const Activations& acts, const ModelParams& params,
                                 const std::vector<std::vector<Triplet>>& batches,
                                 const Objective& obj);

struct ObjectiveGradient {
  LossBreakdown loss;
  ModelParams grads;
};

ObjectiveGradient objective_gradient(const HeteroGraph& g, const ModelParams& params,
                                     const std::vector<std::vector<Triplet>>& batches,
                                     const Objective& obj);

// w_d = |E_d| / sum |E|.
std::vector<double> auto_domain_weights(const HeteroGraph& g);

struct EpochReport {
  std::size_t epoch = 0;
  std::vector<double> domain_bpr;
  double total = 0.0;
  double elapsed_ms = 0.0;
  std::size_t skipped_triplets = 0;
};

class Trainer {
 public:
  Trainer(const HeteroGraph& graph, ModelParams params, TrainConfig config);

  // Samples triplets for every domain, evaluates the weighted objective,
  // back-propagates and applies one Adam step per parameter matrix. Throws
  // std::runtime_error if the loss is not finite.
  EpochReport train_epoch();

  const ModelParams& params() const { return params_; }
  ModelParams& mutable_params() { return params_; }
  const TrainConfig& config() const { return config_; }
  const std::vector<double>& domain_weights() const { return weights_; }
  std::size_t epochs_done() const { return epoch_; }

 private:
  std::vector<std::vector<Triplet>> sample_all(std::size_t& skipped);
  void apply(const ModelParams& grads);

  const HeteroGraph& graph_;
  ModelParams params_;
  TrainConfig config_;
  std::vector<double> weights_;
  std::vector<AdamState> adam_;
  std::vector<Rng> domain_rngs_;
  std::size_t epoch_ = 0;
};

// Runs `epochs` epochs, reporting each through `on_epoch`. When `validate` is
// set it is called every `validate_every` epochs (and after the last) with the
// current parameters; the parameters with the highest returned score are kept.
struct FitOptions {
  std::function<void(const EpochReport&)> on_epoch;
  std::function<double(const ModelParams&)> validate;
  std::size_t validate_every = 10;
};

struct FitResult {
  ModelParams params;
  std::vector<EpochReport> history;
  std::optional<double> best_validation;
  std::size_t best_epoch = 0;
};

FitResult fit(const HeteroGraph& graph, ModelParams init, const TrainConfig& config,
              const FitOptions& options = {});

std::string format_epoch_line(const EpochReport& report);

}  // namespace hgdr
