#include "hgdr/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace hgdr {

void TrainConfig::validate() const {
  if (lambda_reg < 0.0) throw std::invalid_argument("train config: lambda_reg must be >= 0");
  for (double w : domain_weights) {
    if (!(w > 0.0)) throw std::invalid_argument("train config: domain weights must be > 0");
  }
  if (adam.lr < 0.0) throw std::invalid_argument("train config: lr must be >= 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0))
    throw std::invalid_argument("train config: Adam betas must lie in [0, 1)");
  if (!(adam.eps > 0.0)) throw std::invalid_argument("train config: eps must be > 0");
}

TripletBatch sample_triplets(const HeteroGraph& g, std::uint32_t domain, std::size_t count,
                             Rng& rng) {
  if (domain >= g.num_domains()) throw std::out_of_range("sample_triplets: domain out of range");
  const Csr& iu = g.item_to_user(domain);
  const std::size_t num_items = g.num_items(domain);
  if (iu.num_edges() == 0 || num_items < 2)
    throw std::invalid_argument("sample_triplets: domain needs at least one edge and two items");
  bool any_negative = false;
  for (std::size_t u = 0; u < iu.num_targets() && !any_negative; ++u) {
    const auto deg = iu.degree(u);
    any_negative = deg > 0 && deg < num_items;
  }
  if (!any_negative)
    throw std::invalid_argument("sample_triplets: every user interacted with every item");

  TripletBatch batch;
  batch.triplets.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const auto edge = static_cast<std::uint32_t>(uniform_index(rng, iu.num_edges()));
    // Owner of the edge: last target whose offset is <= edge.
    const auto it = std::upper_bound(iu.offsets.begin(), iu.offsets.end(), edge);
    const auto user = static_cast<std::uint32_t>(std::distance(iu.offsets.begin(), it) - 1);
    const std::uint32_t pos = iu.indices[edge];
    const auto first = iu.indices.begin() + iu.offsets[user];
    const auto last = iu.indices.begin() + iu.offsets[user + 1];
    if (static_cast<std::size_t>(last - first) >= num_items) {
      ++batch.skipped;
      continue;
    }
    bool found = false;
    for (int attempt = 0; attempt < kMaxNegativeRetries; ++attempt) {
      const auto neg = static_cast<std::uint32_t>(uniform_index(rng, num_items));
      if (!std::binary_search(first, last, neg)) {
        batch.triplets.push_back({user, pos, neg, domain});
        found = true;
        break;
      }
    }
    if (!found) ++batch.skipped;
  }
  return batch;
}

double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double bpr_loss(double x_pos, double x_neg) { return softplus(x_neg - x_pos); }

double bpr_grad(double diff) {
  // -(1 - sigmoid(diff)) = -sigmoid(-diff)
  if (diff >= 0.0) {
    const double e = std::exp(-diff);
    return -e / (1.0 + e);
  }
  return -1.0 / (1.0 + std::exp(diff));
}

double domain_loss(std::span<const ScorePair> scores, double lambda, double squared_norm) {
  if (scores.empty()) throw std::invalid_argument("domain_loss: empty triplet batch");
  double sum = 0.0;
  for (const auto& s : scores) sum += bpr_loss(s.pos, s.neg);
  return sum / static_cast<double>(scores.size()) + lambda * squared_norm;
}

namespace {

double triplet_score(const Activations& acts, std::uint32_t d, std::uint32_t u, std::uint32_t i) {
  return score(acts.out_user[d].row(u), acts.out_item[d].row(i));
}

std::vector<ScorePair> score_pairs(const Activations& acts, std::span<const Triplet> triplets) {
  std::vector<ScorePair> out;
  out.reserve(triplets.size());
  for (const auto& t : triplets) {
    out.push_back({triplet_score(acts, t.domain, t.user, t.pos),
                   triplet_score(acts, t.domain, t.user, t.neg)});
  }
  return out;
}

void check_weights(const Objective& obj, std::size_t nd, std::size_t batches) {
  if (obj.domain_weights.size() != nd || batches != nd)
    throw std::invalid_argument("objective: weights and batches must cover every domain");
}

}  // namespace

double domain_loss(const Activations& acts, std::span<const Triplet> triplets, double lambda,
                   const ModelParams& params) {
  const auto pairs = score_pairs(acts, triplets);
  return domain_loss(pairs, lambda, params.squared_norm());
}

LossBreakdown evaluate_objective(const Activations& acts, const ModelParams& params,
                                 const std::vector<std::vector<Triplet>>& batches,
                                 const Objective& obj) {
  const std::size_t nd = params.config.num_domains();
  check_weights(obj, nd, batches.size());
  LossBreakdown out;
  out.domain_bpr.assign(nd, 0.0);
  double weight_sum = 0.0;
  for (std::size_t d = 0; d < nd; ++d) {
    if (batches[d].empty()) continue;
    out.domain_bpr[d] = domain_loss(score_pairs(acts, batches[d]), 0.0, 0.0);
    out.total += obj.domain_weights[d] * out.domain_bpr[d];
    weight_sum += obj.domain_weights[d];
  }
  const double penalty = obj.lambda == 0.0 ? 0.0 : obj.lambda * params.squared_norm();
  out.regularization = obj.reg_per_domain ? weight_sum * penalty : penalty;
  out.total += out.regularization;
  return out;
}

LossBreakdown evaluate_objective(const HeteroGraph& g, const ModelParams& params,
                                 const std::vector<std::vector<Triplet>>& batches,
                                 const Objective& obj) {
  return evaluate_objective(forward(g, params), params, batches, obj);
}

ObjectiveGradient objective_gradient(const HeteroGraph& g, const ModelParams& params,
                                     const std::vector<std::vector<Triplet>>& batches,
                                     const Objective& obj) {
  const Activations acts = forward(g, params);
  LossBreakdown loss = evaluate_objective(acts, params, batches, obj);

  OutputGrads up = OutputGrads::zeros(params.config);
  double weight_sum = 0.0;
  for (std::size_t d = 0; d < batches.size(); ++d) {
    if (batches[d].empty()) continue;
    weight_sum += obj.domain_weights[d];
    const double scale = obj.domain_weights[d] / static_cast<double>(batches[d].size());
    const Matrix& ou = acts.out_user[d];
    const Matrix& oi = acts.out_item[d];
    Matrix& du = up.user[d];
    Matrix& di = up.item[d];
    const std::size_t k = ou.cols();
    for (const auto& t : batches[d]) {
      const double diff = triplet_score(acts, t.domain, t.user, t.pos) -
                          triplet_score(acts, t.domain, t.user, t.neg);
      const double gdiff = scale * bpr_grad(diff);
      auto urow = ou.row(t.user);
      auto prow = oi.row(t.pos);
      auto nrow = oi.row(t.neg);
      auto du_row = du.row(t.user);
      auto dp_row = di.row(t.pos);
      auto dn_row = di.row(t.neg);
      for (std::size_t c = 0; c < k; ++c) {
        du_row[c] += gdiff * (prow[c] - nrow[c]);
        dp_row[c] += gdiff * urow[c];
        dn_row[c] -= gdiff * urow[c];
      }
    }
  }
  ModelParams grads = backward(g, params, acts, up);

  const double reg_scale = obj.reg_per_domain ? weight_sum * obj.lambda : obj.lambda;
  if (reg_scale != 0.0) {
    std::vector<const Matrix*> values;
    params.for_each([&](const std::string&, const Matrix& m) { values.push_back(&m); });
    std::size_t idx = 0;
    grads.for_each([&](const std::string&, Matrix& gm) {
      auto gv = gm.values();
      auto pv = values[idx++]->values();
      for (std::size_t k = 0; k < gv.size(); ++k) gv[k] += 2.0 * reg_scale * pv[k];
    });
  }
  return {std::move(loss), std::move(grads)};
}

std::vector<double> auto_domain_weights(const HeteroGraph& g) {
  const double total = static_cast<double>(g.num_edges());
  if (total == 0.0) throw std::invalid_argument("auto_domain_weights: graph has no edges");
  std::vector<double> w;
  for (std::size_t d = 0; d < g.num_domains(); ++d) {
    // Edge-less domains keep a tiny positive weight; they contribute no triplets anyway.
    const double e = static_cast<double>(g.item_to_user(d).num_edges());
    w.push_back(e > 0.0 ? e / total : 1.0 / total);
  }
  return w;
}

Trainer::Trainer(const HeteroGraph& graph, ModelParams params, TrainConfig config)
    : graph_(graph), params_(std::move(params)), config_(std::move(config)) {
  config_.validate();
  if (graph_.num_users() != params_.config.num_users ||
      graph_.items_per_domain() != params_.config.items_per_domain)
    throw std::invalid_argument("trainer: graph does not match model shape");
  const std::size_t nd = graph_.num_domains();
  if (config_.domain_weights.empty()) {
    weights_ = auto_domain_weights(graph_);
  } else if (config_.domain_weights.size() == nd) {
    weights_ = config_.domain_weights;
  } else {
    throw std::invalid_argument("trainer: expected " + std::to_string(nd) + " domain weights");
  }
  params_.for_each([&](const std::string&, const Matrix& m) {
    adam_.emplace_back(m.rows(), m.cols(), config_.adam);
  });
  for (std::size_t d = 0; d < nd; ++d) domain_rngs_.emplace_back(mix_seed(config_.seed, 0x7472, d));
}

std::vector<std::vector<Triplet>> Trainer::sample_all(std::size_t& skipped) {
  const std::size_t nd = graph_.num_domains();
  std::vector<std::vector<Triplet>> batches(nd);
  for (std::size_t d = 0; d < nd; ++d) {
    const Csr& iu = graph_.item_to_user(d);
    if (iu.num_edges() == 0 || graph_.num_items(d) < 2) continue;
    const std::size_t n = config_.triplets_per_epoch > 0 ? config_.triplets_per_epoch : iu.num_edges();
    TripletBatch b = sample_triplets(graph_, static_cast<std::uint32_t>(d), n, domain_rngs_[d]);
    skipped += b.skipped;
    batches[d] = std::move(b.triplets);
  }
  return batches;
}

void Trainer::apply(const ModelParams& grads) {
  std::vector<const Matrix*> gs;
  grads.for_each([&](const std::string&, const Matrix& m) { gs.push_back(&m); });
  std::size_t idx = 0;
  params_.for_each([&](const std::string&, Matrix& p) {
    adam_step(p, *gs[idx], adam_[idx]);
    ++idx;
  });
}

EpochReport Trainer::train_epoch() {
  const auto start = std::chrono::steady_clock::now();
  EpochReport report;
  auto batches = sample_all(report.skipped_triplets);
  const Objective obj{weights_, config_.lambda_reg, config_.reg_per_domain};

  auto check = [&](const LossBreakdown& loss) {
    if (!std::isfinite(loss.total)) {
      std::ostringstream os;
      os << "training diverged at epoch " << epoch_ + 1 << ": total loss " << loss.total;
      for (std::size_t d = 0; d < loss.domain_bpr.size(); ++d)
        os << ", domain " << d << " bpr " << loss.domain_bpr[d];
      os << ", regularization " << loss.regularization;
      throw std::runtime_error(os.str());
    }
  };

  if (!config_.alternate_domains) {
    ObjectiveGradient og = objective_gradient(graph_, params_, batches, obj);
    check(og.loss);
    apply(og.grads);
    report.domain_bpr = og.loss.domain_bpr;
    report.total = og.loss.total;
  } else {
    const std::size_t nd = graph_.num_domains();
    report.domain_bpr.assign(nd, 0.0);
    for (std::size_t d = 0; d < nd; ++d) {
      if (batches[d].empty()) continue;
      std::vector<std::vector<Triplet>> single(nd);
      single[d] = batches[d];
      ObjectiveGradient og = objective_gradient(graph_, params_, single, obj);
      check(og.loss);
      apply(og.grads);
      report.domain_bpr[d] = og.loss.domain_bpr[d];
      report.total += og.loss.total;
    }
  }
  ++epoch_;
  report.epoch = epoch_;
  report.elapsed_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return report;
}

FitResult fit(const HeteroGraph& graph, ModelParams init, const TrainConfig& config,
              const FitOptions& options) {
  Trainer trainer(graph, std::move(init), config);
  FitResult result;
  auto consider = [&](std::size_t epoch) {
    const double v = options.validate(trainer.params());
    if (!result.best_validation || v > *result.best_validation) {
      result.best_validation = v;
      result.best_epoch = epoch;
      result.params = trainer.params();
    }
  };
  const std::size_t every = std::max<std::size_t>(options.validate_every, 1);
  for (std::size_t e = 0; e < config.epochs; ++e) {
    EpochReport r = trainer.train_epoch();
    if (options.on_epoch) options.on_epoch(r);
    result.history.push_back(std::move(r));
    if (options.validate && ((e + 1) % every == 0 || e + 1 == config.epochs)) consider(e + 1);
  }
  if (!options.validate) {
    result.params = trainer.params();
    result.best_epoch = config.epochs;
  } else if (!result.best_validation) {
    consider(0);
  }
  return result;
}

std::string format_epoch_line(const EpochReport& report) {
  std::ostringstream os;
  os.precision(10);
  os << report.epoch;
  for (double v : report.domain_bpr) os << '\t' << v;
  os << '\t' << report.total << '\t';
  os.precision(6);
  os << report.elapsed_ms;
  return os.str();
}

}  // namespace hgdr
