#include "hgdr/model.hpp"

#include <cmath>
#include <stdexcept>

#include "hgdr/random.hpp"

namespace hgdr {

std::string_view to_string(ModelMode mode) {
  switch (mode) {
    case ModelMode::Full: return "full";
    case ModelMode::SpecificOnly: return "specific_only";
    case ModelMode::SharedOnly: return "shared_only";
    case ModelMode::MF: return "mf";
  }
  return "unknown";
}

ModelMode parse_mode(std::string_view name) {
  if (name == "full") return ModelMode::Full;
  if (name == "specific_only") return ModelMode::SpecificOnly;
  if (name == "shared_only") return ModelMode::SharedOnly;
  if (name == "mf") return ModelMode::MF;
  throw std::invalid_argument("unknown model mode '" + std::string(name) +
                              "' (expected full, specific_only, shared_only or mf)");
}

void ModelConfig::validate() const {
  if (dim == 0) throw std::invalid_argument("model config: dim must be positive");
  if (items_per_domain.empty()) throw std::invalid_argument("model config: no domains");
  if (num_users == 0) throw std::invalid_argument("model config: no users");
  if (is_graph_model() && layers == 0)
    throw std::invalid_argument("model config: graph models need at least one layer");
}

ModelParams ModelParams::zeros(const ModelConfig& config) {
  config.validate();
  const std::size_t k = config.dim;
  const std::size_t nd = config.num_domains();
  ModelParams p;
  p.config = config;
  if (config.is_graph_model()) {
    p.user_emb = Matrix(config.num_users, k);
  } else {
    for (std::size_t d = 0; d < nd; ++d) p.mf_user_emb.emplace_back(config.num_users, k);
  }
  for (std::size_t d = 0; d < nd; ++d) p.item_emb.emplace_back(config.items_per_domain[d], k);
  if (!config.is_graph_model()) return p;

  p.layers.resize(config.layers);
  for (auto& lw : p.layers) {
    if (config.uses_specific()) {
      for (std::size_t d = 0; d < nd; ++d) {
        lw.spec_uu.emplace_back(k, k);
        lw.spec_iu.emplace_back(k, k);
        lw.spec_ii.emplace_back(k, k);
        lw.spec_ui.emplace_back(k, k);
      }
    }
    if (config.uses_shared()) {
      lw.shared_uu = Matrix(k, k);
      lw.shared_ii = Matrix(k, k);
      if (!config.tied()) {
        for (std::size_t d = 0; d < nd; ++d) {
          lw.shared_iu.emplace_back(k, k);
          lw.shared_ui.emplace_back(k, k);
        }
      }
    }
  }
  for (std::size_t d = 0; d < nd; ++d) p.output.emplace_back(k, k);
  return p;
}

std::size_t ModelParams::num_matrices() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const Matrix&) { ++n; });
  return n;
}

std::size_t ModelParams::num_scalars() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const Matrix& m) { n += m.size(); });
  return n;
}

double ModelParams::squared_norm() const {
  double s = 0.0;
  for_each([&](const std::string&, const Matrix& m) { s += m.squared_norm(); });
  return s;
}

bool bitwise_equal(const ModelParams& a, const ModelParams& b) {
  if (!(a.config == b.config)) return false;
  std::vector<const Matrix*> left;
  a.for_each([&](const std::string&, const Matrix& m) { left.push_back(&m); });
  std::size_t k = 0;
  bool same = true;
  b.for_each([&](const std::string&, const Matrix& m) {
    same = same && k < left.size() && bitwise_equal(*left[k], m);
    ++k;
  });
  return same && k == left.size();
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  ModelParams p = ModelParams::zeros(config);
  const double k = static_cast<double>(config.dim);
  const double emb_bound = 1.0 / std::sqrt(k);
  const double weight_bound = std::sqrt(6.0 / (k + k));
  // Each matrix draws from its own stream keyed by its name, so resizing one
  // domain's tables leaves every other matrix's initial values unchanged.
  p.for_each([&](const std::string& name, Matrix& m) {
    Rng rng(mix_seed(seed, hash_name(name)));
    const bool embedding = name.find("emb") != std::string::npos;
    const double bound = embedding ? emb_bound : weight_bound;
    for (double& v : m.values()) v = bound * (2.0 * uniform01(rng) - 1.0);
  });
  return p;
}

namespace {

std::vector<double> inverse_degrees(const Csr& csr) {
  std::vector<double> inv(csr.num_targets(), 0.0);
  for (std::size_t t = 0; t < inv.size(); ++t) {
    const auto deg = csr.degree(t);
    if (deg > 0) inv[t] = 1.0 / static_cast<double>(deg);
  }
  return inv;
}

Matrix aggregate(const Csr& csr, const Matrix& src, bool mean) {
  Matrix out = segment_sum(src, csr.offsets, csr.indices);
  if (mean) scale_rows(out, inverse_degrees(csr));
  return out;
}

// Adjoint of aggregate(csr, .): scatters target gradients back to sources
// through the transposed adjacency.
Matrix aggregate_backward(const Csr& csr, const Csr& transposed, const Matrix& d_out, bool mean) {
  if (!mean) return segment_sum(d_out, transposed.offsets, transposed.indices);
  Matrix scaled = d_out;
  scale_rows(scaled, inverse_degrees(csr));
  return segment_sum(scaled, transposed.offsets, transposed.indices);
}

// a * w1 + b * w2
Matrix affine_pair(const Matrix& a, const Matrix& w1, const Matrix& b, const Matrix& w2) {
  Matrix out(a.rows(), w1.cols());
  matmul_add(a, w1, out);
  matmul_add(b, w2, out);
  return out;
}

void check_graph(const HeteroGraph& g, const ModelConfig& c) {
  if (g.num_users() != c.num_users || g.items_per_domain() != c.items_per_domain)
    throw std::invalid_argument("model: graph node counts do not match model config");
}

template <class T>
std::vector<std::vector<T>> grid(std::size_t outer, std::size_t inner) {
  return std::vector<std::vector<T>>(outer, std::vector<T>(inner));
}

}  // namespace

Activations start_forward(const HeteroGraph& g, const ModelParams& params) {
  const ModelConfig& c = params.config;
  check_graph(g, c);
  const std::size_t nd = c.num_domains();
  const std::size_t nl = c.layers;
  Activations a;
  a.out_user.resize(nd);
  a.out_item.resize(nd);
  if (!c.is_graph_model()) return a;

  a.fused_user.resize(nd);
  if (c.uses_specific()) {
    a.h_user = grid<Matrix>(nl + 1, nd);
    a.h_item = grid<Matrix>(nl + 1, nd);
    a.h_user_pre = grid<Matrix>(nl, nd);
    a.h_item_pre = grid<Matrix>(nl, nd);
    a.h_user_agg = grid<Matrix>(nl, nd);
    a.h_item_agg = grid<Matrix>(nl, nd);
    for (std::size_t d = 0; d < nd; ++d) {
      a.h_user[0][d] = params.user_emb;
      a.h_item[0][d] = params.item_emb[d];
    }
  }
  if (c.uses_shared()) {
    a.g_user.resize(nl + 1);
    a.g_item = grid<Matrix>(nl + 1, nd);
    a.g_user_pre.resize(nl);
    a.g_item_pre = grid<Matrix>(nl, nd);
    a.g_user_agg = grid<Matrix>(nl, nd);
    a.g_item_agg = grid<Matrix>(nl, nd);
    a.g_user[0] = params.user_emb;
    for (std::size_t d = 0; d < nd; ++d) a.g_item[0][d] = params.item_emb[d];
  }
  return a;
}

void forward_specific_layer(const HeteroGraph& g, Activations& acts, const ModelParams& params,
                            std::size_t layer, std::size_t domain) {
  const ModelConfig& c = params.config;
  if (!c.uses_specific()) throw std::logic_error("forward_specific_layer: mode has no specific path");
  if (layer >= c.layers || domain >= c.num_domains())
    throw std::out_of_range("forward_specific_layer: layer or domain out of range");
  const LayerWeights& w = params.layers[layer];
  const Matrix& hu = acts.h_user[layer][domain];
  const Matrix& hi = acts.h_item[layer][domain];
  if (hu.empty() && c.num_users > 0) throw std::logic_error("forward_specific_layer: layer not computed");

  Matrix agg_u = aggregate(g.item_to_user(domain), hi, c.mean_aggregation);
  Matrix agg_i = aggregate(g.user_to_item(domain), hu, c.mean_aggregation);
  Matrix pre_u = affine_pair(hu, w.spec_uu[domain], agg_u, w.spec_iu[domain]);
  Matrix pre_i = affine_pair(hi, w.spec_ii[domain], agg_i, w.spec_ui[domain]);
  acts.h_user[layer + 1][domain] = relu(pre_u);
  acts.h_item[layer + 1][domain] = relu(pre_i);
  acts.h_user_pre[layer][domain] = std::move(pre_u);
  acts.h_item_pre[layer][domain] = std::move(pre_i);
  acts.h_user_agg[layer][domain] = std::move(agg_u);
  acts.h_item_agg[layer][domain] = std::move(agg_i);
}

void forward_shared_layer(const HeteroGraph& g, Activations& acts, const ModelParams& params,
                          std::size_t layer) {
  const ModelConfig& c = params.config;
  if (!c.uses_shared()) throw std::logic_error("forward_shared_layer: mode has no shared path");
  if (layer >= c.layers) throw std::out_of_range("forward_shared_layer: layer out of range");
  const LayerWeights& w = params.layers[layer];
  const Matrix& gu = acts.g_user[layer];
  if (gu.empty()) throw std::logic_error("forward_shared_layer: layer not computed");

  Matrix pre_u = matmul(gu, w.shared_uu);
  for (std::size_t d = 0; d < c.num_domains(); ++d) {
    Matrix agg = aggregate(g.item_to_user(d), acts.g_item[layer][d], c.mean_aggregation);
    matmul_add(agg, params.shared_iu(layer, d), pre_u);
    acts.g_user_agg[layer][d] = std::move(agg);
  }
  for (std::size_t d = 0; d < c.num_domains(); ++d) {
    const Matrix& gi = acts.g_item[layer][d];
    Matrix agg = aggregate(g.user_to_item(d), gu, c.mean_aggregation);
    Matrix pre_i = affine_pair(gi, w.shared_ii, agg, params.shared_ui(layer, d));
    acts.g_item[layer + 1][d] = relu(pre_i);
    acts.g_item_pre[layer][d] = std::move(pre_i);
    acts.g_item_agg[layer][d] = std::move(agg);
  }
  acts.g_user[layer + 1] = relu(pre_u);
  acts.g_user_pre[layer] = std::move(pre_u);
}

void forward_output(Activations& acts, const ModelParams& params, std::size_t domain) {
  const ModelConfig& c = params.config;
  if (domain >= c.num_domains()) throw std::out_of_range("forward_output: domain out of range");
  if (!c.is_graph_model()) {
    acts.out_user[domain] = params.mf_user_emb[domain];
    acts.out_item[domain] = params.item_emb[domain];
    return;
  }
  const std::size_t top = c.layers;
  Matrix fused_user;
  Matrix item;
  if (c.uses_specific()) {
    fused_user = acts.h_user[top][domain];
    item = acts.h_item[top][domain];
    if (c.uses_shared()) {
      fused_user.add_inplace(acts.g_user[top]);
      item.add_inplace(acts.g_item[top][domain]);
    }
  } else {
    fused_user = acts.g_user[top];
    item = acts.g_item[top][domain];
  }
  if (fused_user.empty() && c.num_users > 0) throw std::logic_error("forward_output: top layer not computed");
  acts.out_user[domain] = matmul(fused_user, params.output[domain]);
  acts.out_item[domain] = std::move(item);
  acts.fused_user[domain] = std::move(fused_user);
}

Activations forward(const HeteroGraph& g, const ModelParams& params) {
  const ModelConfig& c = params.config;
  Activations acts = start_forward(g, params);
  if (c.is_graph_model()) {
    for (std::size_t l = 0; l < c.layers; ++l) {
      if (c.uses_specific()) {
        for (std::size_t d = 0; d < c.num_domains(); ++d) forward_specific_layer(g, acts, params, l, d);
      }
      if (c.uses_shared()) forward_shared_layer(g, acts, params, l);
      acts.layers_done = l + 1;
    }
  }
  for (std::size_t d = 0; d < c.num_domains(); ++d) forward_output(acts, params, d);
  acts.complete = true;
  return acts;
}

double score(std::span<const double> user_out, std::span<const double> item_out) {
  if (user_out.size() != item_out.size())
    throw std::invalid_argument("score: representation lengths differ");
  return dot(user_out, item_out);
}

OutputGrads OutputGrads::zeros(const ModelConfig& config) {
  OutputGrads og;
  for (std::size_t d = 0; d < config.num_domains(); ++d) {
    og.user.emplace_back(config.num_users, config.dim);
    og.item.emplace_back(config.items_per_domain[d], config.dim);
  }
  return og;
}

ModelParams backward(const HeteroGraph& g, const ModelParams& params, const Activations& acts,
                     const OutputGrads& upstream) {
  const ModelConfig& c = params.config;
  check_graph(g, c);
  if (!acts.complete) throw std::logic_error("backward: forward caches are missing");
  const std::size_t nd = c.num_domains();
  if (upstream.user.size() != nd || upstream.item.size() != nd)
    throw std::invalid_argument("backward: upstream gradients do not cover every domain");

  ModelParams grads = params.zeros_like();
  if (!c.is_graph_model()) {
    for (std::size_t d = 0; d < nd; ++d) {
      grads.mf_user_emb[d] = upstream.user[d];
      grads.item_emb[d] = upstream.item[d];
    }
    return grads;
  }

  const std::size_t nl = c.layers;
  const std::size_t k = c.dim;
  const bool mean = c.mean_aggregation;
  std::vector<Matrix> d_hu(nd), d_hi(nd), d_gi(nd);
  Matrix d_gu;
  if (c.uses_shared()) d_gu = Matrix(c.num_users, k);

  for (std::size_t d = 0; d < nd; ++d) {
    matmul_tn_add(acts.fused_user[d], upstream.user[d], grads.output[d]);
    Matrix d_fused(c.num_users, k);
    matmul_nt_add(upstream.user[d], params.output[d], d_fused);
    if (c.uses_specific()) {
      d_hi[d] = upstream.item[d];
      if (c.uses_shared()) d_gu.add_inplace(d_fused);
      d_hu[d] = std::move(d_fused);
    } else {
      d_gu.add_inplace(d_fused);
    }
    if (c.uses_shared()) d_gi[d] = upstream.item[d];
  }

  for (std::size_t step = 0; step < nl; ++step) {
    const std::size_t l = nl - 1 - step;
    const LayerWeights& w = params.layers[l];
    LayerWeights& gw = grads.layers[l];

    if (c.uses_specific()) {
      std::vector<Matrix> prev_hu(nd), prev_hi(nd);
      for (std::size_t d = 0; d < nd; ++d) {
        prev_hu[d] = Matrix(c.num_users, k);
        prev_hi[d] = Matrix(c.items_per_domain[d], k);

        const Matrix dpre_u = relu_backward(acts.h_user_pre[l][d], d_hu[d]);
        matmul_tn_add(acts.h_user[l][d], dpre_u, gw.spec_uu[d]);
        matmul_nt_add(dpre_u, w.spec_uu[d], prev_hu[d]);
        matmul_tn_add(acts.h_user_agg[l][d], dpre_u, gw.spec_iu[d]);
        Matrix d_agg_u(c.num_users, k);
        matmul_nt_add(dpre_u, w.spec_iu[d], d_agg_u);
        prev_hi[d].add_inplace(
            aggregate_backward(g.item_to_user(d), g.user_to_item(d), d_agg_u, mean));

        const Matrix dpre_i = relu_backward(acts.h_item_pre[l][d], d_hi[d]);
        matmul_tn_add(acts.h_item[l][d], dpre_i, gw.spec_ii[d]);
        matmul_nt_add(dpre_i, w.spec_ii[d], prev_hi[d]);
        matmul_tn_add(acts.h_item_agg[l][d], dpre_i, gw.spec_ui[d]);
        Matrix d_agg_i(c.items_per_domain[d], k);
        matmul_nt_add(dpre_i, w.spec_ui[d], d_agg_i);
        prev_hu[d].add_inplace(
            aggregate_backward(g.user_to_item(d), g.item_to_user(d), d_agg_i, mean));
      }
      d_hu = std::move(prev_hu);
      d_hi = std::move(prev_hi);
    }

    if (c.uses_shared()) {
      Matrix prev_gu(c.num_users, k);
      std::vector<Matrix> prev_gi(nd);
      for (std::size_t d = 0; d < nd; ++d) prev_gi[d] = Matrix(c.items_per_domain[d], k);

      const Matrix dpre_u = relu_backward(acts.g_user_pre[l], d_gu);
      matmul_tn_add(acts.g_user[l], dpre_u, gw.shared_uu);
      matmul_nt_add(dpre_u, w.shared_uu, prev_gu);
      for (std::size_t d = 0; d < nd; ++d) {
        matmul_tn_add(acts.g_user_agg[l][d], dpre_u, grads.shared_iu(l, d));
        Matrix d_agg(c.num_users, k);
        matmul_nt_add(dpre_u, params.shared_iu(l, d), d_agg);
        prev_gi[d].add_inplace(
            aggregate_backward(g.item_to_user(d), g.user_to_item(d), d_agg, mean));
      }
      for (std::size_t d = 0; d < nd; ++d) {
        const Matrix dpre_i = relu_backward(acts.g_item_pre[l][d], d_gi[d]);
        matmul_tn_add(acts.g_item[l][d], dpre_i, gw.shared_ii);
        matmul_nt_add(dpre_i, w.shared_ii, prev_gi[d]);
        matmul_tn_add(acts.g_item_agg[l][d], dpre_i, grads.shared_ui(l, d));
        Matrix d_agg(c.items_per_domain[d], k);
        matmul_nt_add(dpre_i, params.shared_ui(l, d), d_agg);
        prev_gu.add_inplace(
            aggregate_backward(g.user_to_item(d), g.item_to_user(d), d_agg, mean));
      }
      d_gu = std::move(prev_gu);
      d_gi = std::move(prev_gi);
    }
  }

  for (std::size_t d = 0; d < nd; ++d) {
    if (c.uses_specific()) {
      grads.user_emb.add_inplace(d_hu[d]);
      grads.item_emb[d].add_inplace(d_hi[d]);
    }
    if (c.uses_shared()) grads.item_emb[d].add_inplace(d_gi[d]);
  }
  if (c.uses_shared()) grads.user_emb.add_inplace(d_gu);
  return grads;
}

}  // namespace hgdr
