#include "hgdr/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hgdr/random.hpp"

namespace hgdr {

double gradient_error(double analytic, double numeric, double abs_floor) {
  const double diff = std::abs(analytic - numeric);
  return diff / std::max({std::abs(analytic), std::abs(numeric), abs_floor});
}

HeteroGraph random_tiny_graph(const GradCheckOptions& opts, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x6763));
  std::vector<Edge> edges;
  const std::size_t per_user = std::min(opts.edges_per_user, opts.items_per_domain - 1);
  std::vector<std::uint32_t> items(opts.items_per_domain);
  for (std::size_t u = 0; u < opts.users; ++u) {
    for (std::size_t d = 0; d < opts.domains; ++d) {
      std::iota(items.begin(), items.end(), 0u);
      for (std::size_t k = 0; k < per_user; ++k) {
        std::swap(items[k], items[k + uniform_index(rng, items.size() - k)]);
        edges.push_back({static_cast<std::uint32_t>(u), items[k], static_cast<std::uint32_t>(d)});
      }
    }
  }
  return build_graph(opts.users, std::vector<std::size_t>(opts.domains, opts.items_per_domain), edges);
}

GradCheckReport check_gradients(const HeteroGraph& g, const ModelParams& params,
                                const std::vector<std::vector<Triplet>>& batches,
                                const Objective& obj, const GradCheckOptions& opts) {
  ObjectiveGradient og = objective_gradient(g, params, batches, obj);
  if (opts.corrupt) {
    og.grads.for_each([done = false](const std::string&, Matrix& m) mutable {
      if (done || m.empty()) return;
      auto v = m.values();
      v[0] += 0.1 * std::max(1.0, std::abs(v[0]));
      done = true;
    });
  }

  std::vector<Matrix*> analytic;
  og.grads.for_each([&](const std::string&, Matrix& m) { analytic.push_back(&m); });

  GradCheckReport report;
  ModelParams work = params;
  std::size_t idx = 0;
  work.for_each([&](const std::string& name, Matrix& slot) {
    const Matrix original = slot;
    auto objective = [&](const Matrix& candidate) {
      slot = candidate;
      return evaluate_objective(g, work, batches, obj).total;
    };
    const Matrix numeric = finite_diff_grad(objective, original, opts.step);
    slot = original;
    const Matrix& a = *analytic[idx++];
    GradCheckEntry entry{name, 0.0};
    for (std::size_t k = 0; k < a.size(); ++k) {
      entry.max_error = std::max(entry.max_error,
                                 gradient_error(a.values()[k], numeric.values()[k], opts.abs_floor));
    }
    report.max_error = std::max(report.max_error, entry.max_error);
    report.entries.push_back(std::move(entry));
  });
  report.passed = report.max_error < opts.tolerance;
  return report;
}

GradCheckReport run_gradcheck(std::uint64_t seed, const GradCheckOptions& opts) {
  const HeteroGraph g = random_tiny_graph(opts, seed);
  ModelConfig mc;
  mc.num_users = opts.users;
  mc.items_per_domain.assign(opts.domains, opts.items_per_domain);
  mc.dim = opts.dim;
  mc.layers = opts.layers;
  mc.mode = opts.mode;
  mc.tie_relation_weights = opts.tie_relation_weights;
  mc.mean_aggregation = opts.mean_aggregation;
  const ModelParams params = init_params(mc, seed);

  std::vector<std::vector<Triplet>> batches(opts.domains);
  Objective obj;
  obj.lambda = opts.lambda;
  for (std::size_t d = 0; d < opts.domains; ++d) {
    Rng rng(mix_seed(seed, 0x7470, d));
    batches[d] = sample_triplets(g, static_cast<std::uint32_t>(d), opts.triplets_per_domain, rng).triplets;
    obj.domain_weights.push_back(1.0 / static_cast<double>(d + 1));
  }
  return check_gradients(g, params, batches, obj, opts);
}

}  // namespace hgdr
