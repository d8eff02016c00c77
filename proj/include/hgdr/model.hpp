#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hgdr/graph.hpp"
#include "hgdr/numeric.hpp"

namespace hgdr {

// Which representation paths a model uses.
//   Full          domain-specific + domain-shared convolutions (HGDR)
//   SpecificOnly  per-domain relational propagation only (RGCN-style ablation)
//   SharedOnly    cross-domain shared propagation only
//   MF            independent per-domain matrix factorization, no graph
enum class ModelMode : std::uint8_t { Full = 0, SpecificOnly = 1, SharedOnly = 2, MF = 3 };

std::string_view to_string(ModelMode mode);
ModelMode parse_mode(std::string_view name);

struct ModelConfig {
  std::size_t num_users = 0;
  std::vector<std::size_t> items_per_domain;
  std::size_t dim = 128;
  std::size_t layers = 2;
  ModelMode mode = ModelMode::Full;
  // Shared path reuses the specific path's IU/UI matrices (literal reading of
  // the shared convolution). Only meaningful in Full mode.
  bool tie_relation_weights = false;
  // Divide neighbor sums by degree.
  bool mean_aggregation = false;

  std::size_t num_domains() const { return items_per_domain.size(); }
  bool uses_specific() const { return mode == ModelMode::Full || mode == ModelMode::SpecificOnly; }
  bool uses_shared() const { return mode == ModelMode::Full || mode == ModelMode::SharedOnly; }
  bool is_graph_model() const { return mode != ModelMode::MF; }
  bool tied() const { return tie_relation_weights && mode == ModelMode::Full; }
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Per-layer transforms. Vectors are indexed by domain; absent paths stay empty.
struct LayerWeights {
  std::vector<Matrix> spec_uu, spec_iu, spec_ii, spec_ui;
  Matrix shared_uu, shared_ii;
  std::vector<Matrix> shared_iu, shared_ui;  // empty when tied
};

struct ModelParams {
  ModelConfig config;
  Matrix user_emb;                   // U x K, graph modes
  std::vector<Matrix> mf_user_emb;   // per domain U x K, MF mode
  std::vector<Matrix> item_emb;      // per domain I_d x K
  std::vector<LayerWeights> layers;
  std::vector<Matrix> output;        // per domain K x K, applied to users only

  // Matrices with zero entries, same layout as `config` dictates.
  static ModelParams zeros(const ModelConfig& config);
  ModelParams zeros_like() const { return zeros(config); }

  // Visits every parameter matrix in the canonical order used by the
  // optimizer, the regularizer, and the checkpoint format.
  template <class F>
  void for_each(F&& f) { visit(*this, f); }
  template <class F>
  void for_each(F&& f) const { visit(*this, f); }

  std::size_t num_matrices() const;
  std::size_t num_scalars() const;
  double squared_norm() const;

  const Matrix& shared_iu(std::size_t layer, std::size_t d) const {
    return config.tied() ? layers[layer].spec_iu[d] : layers[layer].shared_iu[d];
  }
  const Matrix& shared_ui(std::size_t layer, std::size_t d) const {
    return config.tied() ? layers[layer].spec_ui[d] : layers[layer].shared_ui[d];
  }
  Matrix& shared_iu(std::size_t layer, std::size_t d) {
    return config.tied() ? layers[layer].spec_iu[d] : layers[layer].shared_iu[d];
  }
  Matrix& shared_ui(std::size_t layer, std::size_t d) {
    return config.tied() ? layers[layer].spec_ui[d] : layers[layer].shared_ui[d];
  }

 private:
  template <class Self, class F>
  static void visit(Self& p, F& f);
};

bool bitwise_equal(const ModelParams& a, const ModelParams& b);

// Embeddings ~ U(-1/sqrt(K), 1/sqrt(K)); transforms ~ U(-sqrt(6/2K), sqrt(6/2K)).
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

// Cached forward state. Outer index is layer (0..L), inner is domain.
struct Activations {
  std::vector<std::vector<Matrix>> h_user, h_item, g_item;
  std::vector<Matrix> g_user;
  // Per layer transition l -> l+1: pre-activations and neighbor aggregates.
  std::vector<std::vector<Matrix>> h_user_pre, h_item_pre, h_user_agg, h_item_agg;
  std::vector<std::vector<Matrix>> g_item_pre, g_user_agg, g_item_agg;
  std::vector<Matrix> g_user_pre;
  std::vector<Matrix> fused_user;  // per domain input to the output transform
  std::vector<Matrix> out_user;    // o_u^d
  std::vector<Matrix> out_item;    // o_i^d
  std::size_t layers_done = 0;
  bool complete = false;
};

// Layer-0 state: every path starts from the ID embeddings.
Activations start_forward(const HeteroGraph& g, const ModelParams& params);
void forward_specific_layer(const HeteroGraph& g, Activations& acts, const ModelParams& params,
                            std::size_t layer, std::size_t domain);
void forward_shared_layer(const HeteroGraph& g, Activations& acts, const ModelParams& params,
                          std::size_t layer);
void forward_output(Activations& acts, const ModelParams& params, std::size_t domain);
Activations forward(const HeteroGraph& g, const ModelParams& params);

double score(std::span<const double> user_out, std::span<const double> item_out);

// Upstream gradients of the objective w.r.t. the fused outputs, per domain.
struct OutputGrads {
  std::vector<Matrix> user;
  std::vector<Matrix> item;
  static OutputGrads zeros(const ModelConfig& config);
};

ModelParams backward(const HeteroGraph& g, const ModelParams& params, const Activations& acts,
                     const OutputGrads& upstream);

// Implementation of the templated visitor.
template <class Self, class F>
void ModelParams::visit(Self& p, F& f) {
  const std::size_t nd = p.config.num_domains();
  auto tag = [](const char* base, std::size_t d) { return std::string(base) + "." + std::to_string(d); };
  if (p.config.is_graph_model()) {
    f(std::string("user_emb"), p.user_emb);
  } else {
    for (std::size_t d = 0; d < nd; ++d) f(tag("mf_user_emb", d), p.mf_user_emb[d]);
  }
  for (std::size_t d = 0; d < nd; ++d) f(tag("item_emb", d), p.item_emb[d]);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& lw = p.layers[l];
    const std::string pre = "layer" + std::to_string(l) + ".";
    if (p.config.uses_specific()) {
      for (std::size_t d = 0; d < nd; ++d) {
        f(pre + tag("spec_uu", d), lw.spec_uu[d]);
        f(pre + tag("spec_iu", d), lw.spec_iu[d]);
        f(pre + tag("spec_ii", d), lw.spec_ii[d]);
        f(pre + tag("spec_ui", d), lw.spec_ui[d]);
      }
    }
    if (p.config.uses_shared()) {
      f(pre + "shared_uu", lw.shared_uu);
      f(pre + "shared_ii", lw.shared_ii);
      if (!p.config.tied()) {
        for (std::size_t d = 0; d < nd; ++d) {
          f(pre + tag("shared_iu", d), lw.shared_iu[d]);
          f(pre + tag("shared_ui", d), lw.shared_ui[d]);
        }
      }
    }
  }
  if (p.config.is_graph_model()) {
    for (std::size_t d = 0; d < nd; ++d) f(tag("output", d), p.output[d]);
  }
}

}  // namespace hgdr
