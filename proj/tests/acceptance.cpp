#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "hgdr/baselines.hpp"
#include "hgdr/checkpoint.hpp"
#include "hgdr/gradcheck.hpp"
#include "hgdr/random.hpp"
#include "oracle.hpp"

using namespace hgdr;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
  bool skipped = false;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Outcome forward_oracle() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    Rng rng(mix_seed(1001, trial));
    const std::vector<std::size_t> items{4, 4};
    const auto edges = oracle::random_edges(4, items, 0.4, rng);
    ModelConfig mc;
    mc.num_users = 4;
    mc.items_per_domain = items;
    mc.dim = 8;
    mc.layers = 2;
    const auto p = init_params(mc, trial);
    const auto acts = forward(build_graph(4, items, edges), p);
    const auto ref = oracle::naive_forward(edges, p);
    for (std::size_t d = 0; d < 2; ++d) {
      worst = std::max(worst, oracle::max_abs_diff(ref.user[d], acts.out_user[d]));
      worst = std::max(worst, oracle::max_abs_diff(ref.item[d], acts.out_item[d]));
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-10 && secs < 10.0, fmt("max abs diff %.3g", worst) + fmt(", %.2f s", secs)};
}

Outcome gradient_check() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  bool all = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    GradCheckOptions o;
    o.step = 1e-5;
    o.tolerance = 1e-4;
    const auto r = run_gradcheck(seed, o);
    worst = std::max(worst, r.max_error);
    all = all && r.passed;
  }
  const double secs = seconds_since(t0);
  return {all && secs < 60.0, fmt("max rel error %.3g", worst) + fmt(", %.2f s", secs)};
}

Outcome closed_form() {
  const double ln2_err = std::abs(bpr_loss(0.3, 0.3) - std::log(2.0));
  const std::vector<std::size_t> r10{10};
  const double ndcg_err = std::abs(hr_ndcg_at(r10).ndcg - 1.0 / std::log2(11.0));

  SyntheticSpec s;
  s.num_users = 1000;
  s.num_domains = 3;
  s.items_per_domain = 500;
  s.interactions_per_user = 5;
  const auto split = split_leave_latest(generate_synthetic(s).log);
  const auto tasks = build_eval_tasks(split, 7);
  ModelConfig mc;
  mc.num_users = split.train.num_users();
  mc.items_per_domain = split.train.items_per_domain();
  mc.dim = 32;
  mc.mode = ModelMode::MF;
  const auto ranks = rank_tasks(forward(build_graph(split.train), init_params(mc, 3)), tasks.tasks);
  const double hr = hr_ndcg_at(ranks).hr;
  const double n = static_cast<double>(ranks.size());
  const double se = std::sqrt(0.1 * 0.9 / n);
  const bool pass = ln2_err <= 1e-12 && ndcg_err <= 1e-12 && n >= 2000 && std::abs(hr - 0.1) <= 3.0 * se;
  std::ostringstream os;
  os << "|bpr-ln2| " << ln2_err << ", |ndcg-1/log2(11)| " << ndcg_err << ", random HR@10 " << hr
     << " over " << ranks.size() << " tasks (3 SE = " << 3.0 * se << ")";
  return {pass, os.str()};
}

Outcome overfit() {
  const auto t0 = Clock::now();
  // 3 users, 3 items in each of 2 domains.
  const std::vector<Edge> edges{{0, 0, 0}, {0, 1, 0}, {1, 1, 0}, {2, 2, 0},
                                {0, 0, 1}, {1, 1, 1}, {1, 2, 1}, {2, 2, 1}};
  const std::vector<std::size_t> items{3, 3};
  const auto g = build_graph(3, items, edges);
  ModelConfig mc;
  mc.num_users = 3;
  mc.items_per_domain = items;
  mc.dim = 16;
  mc.layers = 2;
  TrainConfig tc;
  tc.epochs = 500;
  tc.adam.lr = 0.01;
  const auto fr = fit(g, init_params(mc, 1), tc);
  const double loss = fr.history.back().total;

  // Every training positive against every item the user never touched.
  InteractionLog log;
  for (int u = 0; u < 3; ++u) log.users.intern("u" + std::to_string(u));
  for (int d = 0; d < 2; ++d) {
    log.domains.intern("d" + std::to_string(d));
    log.items.emplace_back();
    for (int i = 0; i < 3; ++i) log.items.back().intern("i" + std::to_string(i));
  }
  for (const auto& e : edges) log.interactions.push_back({e.user, e.item, e.domain, 0});
  EvalOptions eo;
  eo.allow_fewer_negatives = true;
  const auto tasks = build_eval_tasks(log.interactions, log, 5, eo);
  const auto ranks = rank_tasks(forward(g, fr.params), tasks.tasks);
  const double hr = hr_ndcg_at(ranks).hr;
  const bool all_first = std::all_of(ranks.begin(), ranks.end(), [](std::size_t r) { return r == 1; });
  const double secs = seconds_since(t0);
  std::ostringstream os;
  os << "final loss " << loss << ", HR@10 " << hr << ", positives ranked first: " << (all_first ? "all" : "not all")
     << " (" << tasks.tasks.size() << " tasks), " << fmt("%.2f s", secs);
  return {loss < 0.1 && hr == 1.0 && all_first && secs < 30.0, os.str()};
}

// Shared protocol for the trend experiment.
struct TrendRun {
  double full = 0, specific = 0, mf = 0;
};

TrendRun trend_run(std::uint64_t seed) {
  SyntheticSpec s;
  s.num_users = 2000;
  s.num_domains = 3;
  s.items_per_domain = 500;
  s.shared_signal = 0.8;
  s.interactions_per_user = 5;
  s.temperature = 0.25;
  s.seed = seed;
  const auto split = split_leave_latest(generate_synthetic(s).log);
  ExperimentSettings st;
  st.dim = 32;
  st.layers = 2;
  st.mean_aggregation = true;
  st.train.epochs = 300;
  st.train.adam.lr = 0.01;
  st.train.lambda_reg = 3e-5;
  TrendRun r;
  r.full = mean_ndcg(run_experiment(split, ModelMode::Full, st, seed).test);
  r.specific = mean_ndcg(run_experiment(split, ModelMode::SpecificOnly, st, seed).test);
  r.mf = mean_ndcg(run_experiment(split, ModelMode::MF, st, seed).test);
  return r;
}

Outcome transfer_trend() {
  const auto t0 = Clock::now();
  int ordered = 0, full_wins = 0, spec_ge_mf = 0;
  std::ostringstream os;
  os.precision(4);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto r = trend_run(seed);
    const bool a = r.full > r.specific;
    const bool b = r.specific >= r.mf;
    full_wins += a;
    spec_ge_mf += b;
    ordered += a && b;
    os << "seed " << seed << " NDCG full/specific/mf " << r.full << '/' << r.specific << '/' << r.mf << "; ";
    std::fprintf(stderr, "  trend seed %llu: full %.4f specific_only %.4f mf %.4f\n",
                 static_cast<unsigned long long>(seed), r.full, r.specific, r.mf);
  }
  const double secs = seconds_since(t0);
  os << "full>specific in " << full_wins << "/5, specific>=mf in " << spec_ge_mf << "/5, both in " << ordered
     << "/5, " << fmt("%.0f s", secs);
  return {ordered >= 4 && secs < 1200.0, os.str()};
}

Outcome disentanglement() {
  Rng rng(4242);
  const std::vector<std::size_t> items{6, 5, 4};
  auto edges = oracle::random_edges(7, items, 0.4, rng);
  ModelConfig mc;
  mc.num_users = 7;
  mc.items_per_domain = items;
  mc.dim = 8;
  mc.layers = 2;
  auto p = init_params(mc, 9);
  p.for_each([](const std::string& name, Matrix& m) {
    if (name.find("shared") != std::string::npos) m.fill(0.0);
  });
  const auto base = forward(build_graph(7, items, edges), p);
  int unchanged = 0;
  for (int k = 0; k < 10; ++k) {
    auto perturbed = edges;
    const auto dprime = static_cast<std::uint32_t>(1 + uniform_index(rng, 2));
    // Drop one domain-d' edge and add another.
    std::vector<std::size_t> in_domain;
    for (std::size_t j = 0; j < perturbed.size(); ++j)
      if (perturbed[j].domain == dprime) in_domain.push_back(j);
    if (!in_domain.empty()) perturbed.erase(perturbed.begin() + in_domain[uniform_index(rng, in_domain.size())]);
    const Edge extra{static_cast<std::uint32_t>(uniform_index(rng, 7)),
                     static_cast<std::uint32_t>(uniform_index(rng, items[dprime])), dprime};
    if (std::none_of(perturbed.begin(), perturbed.end(), [&](const Edge& e) {
          return e.user == extra.user && e.item == extra.item && e.domain == extra.domain;
        }))
      perturbed.push_back(extra);
    const auto out = forward(build_graph(7, items, perturbed), p);
    if (bitwise_equal(out.out_user[0], base.out_user[0]) && bitwise_equal(out.out_item[0], base.out_item[0]))
      ++unchanged;
  }
  return {unchanged == 10, std::to_string(unchanged) + "/10 perturbations left domain 0 bitwise unchanged"};
}

struct RunBytes {
  std::string checkpoint;
  std::string report;
};

RunBytes determinism_run() {
  SyntheticSpec s;
  s.num_users = 300;
  s.num_domains = 3;
  s.items_per_domain = 150;
  s.interactions_per_user = 6;
  s.seed = 11;
  const auto split = split_leave_latest(generate_synthetic(s).log);
  ExperimentSettings st;
  st.dim = 16;
  st.train.epochs = 15;
  st.train.adam.lr = 0.01;
  const auto r = run_experiment(split, ModelMode::Full, st, 5);
  RunBytes b;
  std::ostringstream ck;
  write_checkpoint(r.fit.params, ck);
  b.checkpoint = ck.str();
  b.report = format_report_tsv(r.test, {}) + format_report_kv(r.test, {});
  return b;
}

Outcome determinism() {
  const auto a = determinism_run();
  const auto b = determinism_run();
  const bool ck = a.checkpoint == b.checkpoint;
  const bool rep = a.report == b.report;
  std::ostringstream os;
  os << "checkpoints " << (ck ? "identical" : "differ") << " (" << a.checkpoint.size() << " bytes), reports "
     << (rep ? "identical" : "differ");
  return {ck && rep, os.str()};
}

Outcome reproduction(const std::string& path) {
  if (path.empty()) return {true, "no dataset supplied (pass --douban PATH)", true};
  const auto t0 = Clock::now();
  const auto log = parse_log(std::filesystem::path(path));
  const auto split = split_leave_latest(log);
  ExperimentSettings st;
  st.dim = 128;
  st.layers = 2;
  st.train.epochs = 200;
  st.use_validation = true;
  const auto full = run_experiment(split, ModelMode::Full, st, 42).test;
  const auto spec = run_experiment(split, ModelMode::SpecificOnly, st, 42).test;
  const auto mf = run_experiment(split, ModelMode::MF, st, 42).test;

  auto target_hr = [&](std::uint32_t d) {
    std::string name = log.domains.key(d);
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
    if (name == "book") return 0.712;
    if (name == "music") return 0.483;
    if (name == "movie") return 0.550;
    const double fallback[] = {0.712, 0.483, 0.550};
    return d < 3 ? fallback[d] : -1.0;
  };
  bool ordering = full.domains.size() == 3 && spec.domains.size() == 3 && mf.domains.size() == 3;
  bool within = true;
  std::ostringstream os;
  os.precision(3);
  for (std::size_t k = 0; ordering && k < 3; ++k) {
    const auto& f = full.domains[k];
    ordering = ordering && f.hr > spec.domains[k].hr && spec.domains[k].hr > mf.domains[k].hr &&
               f.ndcg > spec.domains[k].ndcg && spec.domains[k].ndcg > mf.domains[k].ndcg;
    const double t = target_hr(f.domain);
    within = within && std::abs(f.hr - t) <= 0.08;
    os << log.domains.key(f.domain) << " HR full/spec/mf " << f.hr << '/' << spec.domains[k].hr << '/'
       << mf.domains[k].hr << " (target " << t << "); ";
  }
  os << "ordering " << (ordering ? "holds" : "violated") << ", HR within 0.08: " << (within ? "yes" : "no (reported only)")
     << fmt(", %.0f s", seconds_since(t0));
  return {ordering, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  int only = 0;
  std::string douban;
  app.add_option("--only", only, "run a single criterion (1-8)");
  app.add_option("--douban", douban, "Douban-style interaction TSV for criterion 8");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"forward oracle equivalence", forward_oracle},
      {"gradient correctness", gradient_check},
      {"closed-form metric checks", closed_form},
      {"overfit capacity", overfit},
      {"cross-domain transfer trend", transfer_trend},
      {"disentanglement invariant", disentanglement},
      {"determinism", determinism},
      {"reference-number reproduction", [&] { return reproduction(douban); }},
  };
  int failures = 0, ran = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    if (only != 0 && static_cast<std::size_t>(only) != k + 1) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const char* tag = o.skipped ? "SKIP" : (o.pass ? "PASS" : "FAIL");
    std::printf("%s  %zu. %s: %s\n", tag, k + 1, criteria[k].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
    if (!o.skipped) ++ran;
  }
  // 77 lets ctest report a lone skipped criterion as not run.
  if (failures == 0 && ran == 0) return 77;
  return failures == 0 ? 0 : 1;
}
