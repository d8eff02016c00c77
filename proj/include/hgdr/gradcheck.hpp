#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hgdr/graph.hpp"
#include "hgdr/model.hpp"
#include "hgdr/training.hpp"

namespace hgdr {

// Compares analytic gradients of the full BPR objective against central
// finite differences, matrix by matrix.
struct GradCheckOptions {
  std::size_t users = 4;
  std::size_t domains = 2;
  std::size_t items_per_domain = 3;
  std::size_t edges_per_user = 2;  // per domain, capped at items_per_domain - 1
  std::size_t dim = 4;
  std::size_t layers = 2;
  std::size_t triplets_per_domain = 6;
  ModelMode mode = ModelMode::Full;
  bool tie_relation_weights = false;
  bool mean_aggregation = false;
  double lambda = 1e-3;
  double step = 1e-5;
  double tolerance = 1e-4;
  // Lower bound on the relative-error denominator; central differences carry
  // roughly eps * |f| / step of roundoff, which swamps gradients near zero.
  double abs_floor = 1e-6;
  // Test hook: perturb one analytic entry so the check must fail.
  bool corrupt = false;
};

struct GradCheckEntry {
  std::string name;
  double max_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_error = 0.0;
  bool passed = false;
};

// Random graph where every user has `edges_per_user` distinct items in every domain.
HeteroGraph random_tiny_graph(const GradCheckOptions& opts, std::uint64_t seed);

GradCheckReport check_gradients(const HeteroGraph& g, const ModelParams& params,
                                const std::vector<std::vector<Triplet>>& batches,
                                const Objective& obj, const GradCheckOptions& opts);

GradCheckReport run_gradcheck(std::uint64_t seed, const GradCheckOptions& opts = {});

// |a - n| / max(|a|, |n|, abs_floor).
double gradient_error(double analytic, double numeric, double abs_floor);

}  // namespace hgdr
