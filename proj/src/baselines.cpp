#include "hgdr/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "hgdr/random.hpp"

namespace hgdr {

void SyntheticSpec::validate() const {
  if (num_users == 0 || num_domains == 0 || items_per_domain == 0 || latent_dim == 0)
    throw std::invalid_argument("synthetic spec: counts must be positive");
  if (interactions_per_user == 0)
    throw std::invalid_argument("synthetic spec: zero interactions per user");
  if (interactions_per_user > items_per_domain)
    throw std::invalid_argument("synthetic spec: more interactions per user than items");
  if (!(shared_signal >= 0.0 && shared_signal <= 1.0))
    throw std::invalid_argument("synthetic spec: shared_signal must lie in [0, 1]");
  if (!(temperature > 0.0)) throw std::invalid_argument("synthetic spec: temperature must be > 0");
  if (popularity_skew < 0.0) throw std::invalid_argument("synthetic spec: popularity_skew must be >= 0");
}

namespace {

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = standard_normal(rng);
  return m;
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t k = spec.latent_dim;
  const std::size_t nd = spec.num_domains;
  const std::size_t ni = spec.items_per_domain;
  SyntheticDataset out;

  Rng latent_rng(mix_seed(spec.seed, 1));
  out.global_latent = gaussian_matrix(spec.num_users, k, latent_rng);
  const double w_shared = std::sqrt(spec.shared_signal);
  const double w_private = std::sqrt(1.0 - spec.shared_signal);
  for (std::size_t d = 0; d < nd; ++d) {
    Matrix u = gaussian_matrix(spec.num_users, k, latent_rng);
    auto uv = u.values();
    auto gv = out.global_latent.values();
    for (std::size_t x = 0; x < uv.size(); ++x) uv[x] = w_shared * gv[x] + w_private * uv[x];
    out.user_latent.push_back(std::move(u));
    out.item_latent.push_back(gaussian_matrix(ni, k, latent_rng));
  }

  std::vector<std::string> domain_keys;
  for (std::size_t d = 0; d < nd; ++d) domain_keys.push_back("dom" + std::to_string(d));

  const double logit_scale = 1.0 / (std::sqrt(static_cast<double>(k)) * spec.temperature);
  LogBuilder builder;
  Rng sample_rng(mix_seed(spec.seed, 2));
  const std::size_t n = spec.interactions_per_user;
  std::vector<std::pair<double, std::uint32_t>> keys(ni);
  std::vector<Timestamp> stamps(n);
  for (std::size_t u = 0; u < spec.num_users; ++u) {
    const std::string user_key = "u" + std::to_string(u);
    for (std::size_t d = 0; d < nd; ++d) {
      const auto urow = out.user_latent[d].row(u);
      // Gumbel-top-n: sampling without replacement proportional to exp(logit).
      for (std::size_t i = 0; i < ni; ++i) {
        const double logit = logit_scale * dot(urow, out.item_latent[d].row(i)) -
                             spec.popularity_skew * std::log(static_cast<double>(i) + 1.0);
        double e = uniform01(sample_rng);
        while (e <= 0.0) e = uniform01(sample_rng);
        keys[i] = {logit - std::log(-std::log(e)), static_cast<std::uint32_t>(i)};
      }
      std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(n), keys.end(),
                        [](const auto& a, const auto& b) {
                          return a.first > b.first || (a.first == b.first && a.second < b.second);
                        });
      std::iota(stamps.begin(), stamps.end(), Timestamp{1});
      for (std::size_t x = n; x > 1; --x) std::swap(stamps[x - 1], stamps[uniform_index(sample_rng, x)]);
      for (std::size_t x = 0; x < n; ++x) {
        builder.add({user_key, "d" + std::to_string(d) + "_i" + std::to_string(keys[x].second),
                     domain_keys[d], stamps[x]});
      }
    }
  }
  out.log = std::move(builder).finish();

  SyntheticManifest& m = out.manifest;
  m.num_users = out.log.num_users();
  m.total_interactions = out.log.interactions.size();
  m.domains.resize(nd);
  std::vector<std::vector<std::uint32_t>> user_deg(nd, std::vector<std::uint32_t>(m.num_users, 0));
  std::vector<std::vector<std::uint32_t>> item_deg(nd);
  for (std::size_t d = 0; d < nd; ++d) item_deg[d].assign(out.log.items[d].size(), 0);
  for (const auto& r : out.log.interactions) {
    user_deg[r.domain][r.user] += 1;
    item_deg[r.domain][r.item] += 1;
  }
  for (std::size_t d = 0; d < nd; ++d) {
    DomainManifest& dm = m.domains[d];
    dm.items_declared = ni;
    dm.items_observed = out.log.items[d].size();
    for (auto deg : user_deg[d]) {
      dm.user_degree_histogram[deg] += 1;
      if (deg > 0) dm.users_active += 1;
      dm.interactions += deg;
    }
    for (auto deg : item_deg[d]) dm.item_degree_histogram[deg] += 1;
  }
  return out;
}

std::string format_manifest(const SyntheticManifest& manifest) {
  std::ostringstream os;
  os << "users=" << manifest.num_users << '\n';
  os << "domains=" << manifest.domains.size() << '\n';
  os << "interactions=" << manifest.total_interactions << '\n';
  for (std::size_t d = 0; d < manifest.domains.size(); ++d) {
    const auto& dm = manifest.domains[d];
    const std::string p = "dom" + std::to_string(d) + ".";
    os << p << "items_declared=" << dm.items_declared << '\n';
    os << p << "items_observed=" << dm.items_observed << '\n';
    os << p << "users_active=" << dm.users_active << '\n';
    os << p << "interactions=" << dm.interactions << '\n';
    auto hist = [&](const char* name, const std::map<std::uint32_t, std::size_t>& h) {
      os << p << name << '=';
      bool first = true;
      for (const auto& [deg, count] : h) {
        os << (first ? "" : ",") << deg << ':' << count;
        first = false;
      }
      os << '\n';
    };
    hist("user_degree_histogram", dm.user_degree_histogram);
    hist("item_degree_histogram", dm.item_degree_histogram);
  }
  return os.str();
}

void write_synthetic(const SyntheticDataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream log(dir / "interactions.tsv", std::ios::binary);
  std::ofstream manifest(dir / "manifest.txt", std::ios::binary);
  if (!log || !manifest) throw std::runtime_error("cannot write synthetic data to " + dir.string());
  write_log_tsv(data.log, log);
  manifest << format_manifest(data.manifest);
}

ModelConfig mf_bpr_config(ModelConfig base) {
  base.mode = ModelMode::MF;
  base.tie_relation_weights = false;
  return base;
}

ModelConfig ablation_config(ModelConfig base, std::string_view mode) {
  const ModelMode m = parse_mode(mode);
  if (m == ModelMode::MF)
    throw std::invalid_argument("ablation mode must be full, specific_only or shared_only");
  base.mode = m;
  return base;
}

double mean_ndcg(const MetricReport& report) {
  if (report.domains.empty()) return 0.0;
  double s = 0.0;
  for (const auto& d : report.domains) s += d.ndcg;
  return s / static_cast<double>(report.domains.size());
}

ExperimentResult run_experiment(const SplitDataset& split, ModelMode mode,
                                const ExperimentSettings& settings, std::uint64_t seed,
                                const std::function<void(const EpochReport&)>& on_epoch) {
  ModelConfig mc;
  mc.num_users = split.train.num_users();
  mc.items_per_domain = split.train.items_per_domain();
  mc.dim = settings.dim;
  mc.layers = settings.layers;
  mc.mode = mode;
  mc.tie_relation_weights = settings.tie_relation_weights;
  mc.mean_aggregation = settings.mean_aggregation;

  TrainConfig tc = settings.train;
  tc.seed = seed;
  const InteractionLog observed = split.combined();

  FitOptions fo;
  fo.on_epoch = on_epoch;
  fo.validate_every = settings.validate_every;

  ExperimentResult result;
  result.graph = build_graph(split.train);
  if (settings.use_validation) {
    SplitDataset inner = split_leave_latest(split.train);
    const HeteroGraph inner_graph = build_graph(inner.train);
    const EvalTaskSet val = build_eval_tasks(inner.test, observed, settings.eval_seed + 1, settings.eval);
    fo.validate = [&](const ModelParams& p) {
      return mean_ndcg(evaluate(inner_graph, p, val.tasks, settings.eval.cutoff));
    };
    result.fit = fit(inner_graph, init_params(mc, seed), tc, fo);
  } else {
    result.fit = fit(result.graph, init_params(mc, seed), tc, fo);
  }
  const EvalTaskSet test = build_eval_tasks(split, settings.eval_seed, settings.eval);
  result.test = evaluate(result.graph, result.fit.params, test.tasks, settings.eval.cutoff);
  return result;
}

}  // namespace hgdr
