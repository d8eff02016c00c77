#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hgdr/baselines.hpp"
#include "hgdr/checkpoint.hpp"
#include "hgdr/config.hpp"
#include "hgdr/data.hpp"
#include "hgdr/eval.hpp"
#include "hgdr/gradcheck.hpp"
#include "hgdr/graph.hpp"
#include "hgdr/model.hpp"
#include "hgdr/training.hpp"

namespace fs = std::filesystem;
using namespace hgdr;

namespace {

struct Options {
  std::string config;
  std::string data;
  std::string out;
  std::string checkpoint;
  std::string mode;
  std::uint64_t seed = 42;
  bool seed_set = false;
};

KeyValueConfig load_config(const Options& o) {
  if (o.config.empty()) return {};
  if (!fs::is_regular_file(o.config)) throw std::runtime_error("config file not found: " + o.config);
  return KeyValueConfig::parse_file(o.config);
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw std::runtime_error(std::string("missing --") + what);
  if (!fs::exists(path)) throw std::runtime_error(std::string(what) + " not found: " + path);
}

fs::path prepare_out(const std::string& out) {
  if (out.empty()) throw std::runtime_error("missing --out");
  fs::create_directories(out);
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

// A directory holds train.tsv/test.tsv; a file is a raw log used whole for training.
SplitDataset load_data(const std::string& path) {
  require_file(path, "data");
  if (fs::is_directory(path)) return read_split(path);
  SplitDataset s;
  s.train = parse_log(fs::path(path));
  return s;
}

std::uint64_t pick_seed(const Options& o, KeyValueConfig& cfg) {
  const std::uint64_t from_cfg = cfg.get_u64("seed", o.seed);
  return o.seed_set ? o.seed : from_cfg;
}

ModelMode pick_mode(const Options& o, KeyValueConfig& cfg) {
  const std::string from_cfg = cfg.get_string("mode", "full");
  return parse_mode(o.mode.empty() ? from_cfg : o.mode);
}

TrainConfig read_train_config(KeyValueConfig& cfg) {
  TrainConfig tc;
  tc.epochs = cfg.get_size("epochs", tc.epochs);
  tc.triplets_per_epoch = cfg.get_size("triplets_per_epoch", tc.triplets_per_epoch);
  tc.adam.lr = cfg.get_double("lr", tc.adam.lr);
  tc.adam.beta1 = cfg.get_double("beta1", tc.adam.beta1);
  tc.adam.beta2 = cfg.get_double("beta2", tc.adam.beta2);
  tc.adam.eps = cfg.get_double("eps", tc.adam.eps);
  tc.lambda_reg = cfg.get_double("lambda", tc.lambda_reg);
  for (const auto& w : cfg.get_list("domain_weights", {})) tc.domain_weights.push_back(std::stod(w));
  tc.reg_per_domain = cfg.get_bool("reg_per_domain", tc.reg_per_domain);
  tc.alternate_domains = cfg.get_bool("alternate_domains", tc.alternate_domains);
  return tc;
}

ModelConfig read_model_config(KeyValueConfig& cfg, const InteractionLog& train, ModelMode mode) {
  ModelConfig mc;
  mc.num_users = train.num_users();
  mc.items_per_domain = train.items_per_domain();
  mc.dim = cfg.get_size("dim", mc.dim);
  mc.layers = cfg.get_size("layers", mc.layers);
  mc.tie_relation_weights = cfg.get_bool("tie_relation_weights", false);
  mc.mean_aggregation = cfg.get_bool("mean_aggregation", false);
  mc.mode = mode;
  mc.validate();
  return mc;
}

EvalOptions read_eval_options(KeyValueConfig& cfg) {
  EvalOptions e;
  e.num_negatives = cfg.get_size("num_negatives", e.num_negatives);
  e.cutoff = cfg.get_size("cutoff", e.cutoff);
  e.allow_fewer_negatives = cfg.get_bool("allow_fewer_negatives", e.allow_fewer_negatives);
  return e;
}

std::vector<std::string> domain_names(const InteractionLog& log) {
  std::vector<std::string> names;
  for (std::uint32_t d = 0; d < log.num_domains(); ++d) names.push_back(log.domains.key(d));
  return names;
}

std::string log_header(const InteractionLog& log) {
  std::string h = "epoch";
  for (const auto& n : domain_names(log)) h += "\tbpr_" + n;
  return h + "\ttotal\telapsed_ms\n";
}

int cmd_prepare(const Options& o) {
  require_file(o.data, "data");
  KeyValueConfig cfg = load_config(o);
  cfg.reject_unknown();
  const fs::path out = prepare_out(o.out);
  const InteractionLog log = parse_log(fs::path(o.data));
  const SplitDataset split = split_leave_latest(log);
  write_split(split, out);
  const std::string table = format_stats_table(compute_stats(log));
  write_text(out / "stats.tsv", table);
  std::cout << table;
  std::cerr << "prepare: " << split.train.interactions.size() << " train, " << split.test.size()
            << " test records\n";
  return 0;
}

int cmd_train(const Options& o) {
  KeyValueConfig cfg = load_config(o);
  const SplitDataset data = load_data(o.data);
  const ModelMode mode = pick_mode(o, cfg);
  const std::uint64_t seed = pick_seed(o, cfg);
  const ModelConfig mc = read_model_config(cfg, data.train, mode);
  TrainConfig tc = read_train_config(cfg);
  tc.seed = seed;
  const bool timing = cfg.get_bool("log_timing", true);
  cfg.reject_unknown();
  tc.validate();
  const fs::path out = prepare_out(o.out);

  const HeteroGraph g = build_graph(data.train);
  const ModelParams init = init_params(mc, seed);
  save_checkpoint(init, out / "initial.ckpt");

  std::ofstream log(out / "train_log.tsv", std::ios::binary);
  if (!log) throw std::runtime_error("cannot write " + (out / "train_log.tsv").string());
  log << log_header(data.train);
  FitOptions fo;
  fo.on_epoch = [&](const EpochReport& r) {
    EpochReport shown = r;
    if (!timing) shown.elapsed_ms = 0.0;
    log << format_epoch_line(shown) << '\n';
  };
  const FitResult fr = fit(g, init, tc, fo);
  save_checkpoint(fr.params, out / "model.ckpt");
  if (!fr.history.empty()) {
    std::cerr << "train: " << fr.history.size() << " epochs, final total loss "
              << fr.history.back().total << '\n';
  }
  return 0;
}

int cmd_eval(const Options& o) {
  require_file(o.checkpoint, "checkpoint");
  KeyValueConfig cfg = load_config(o);
  const SplitDataset data = load_data(o.data);
  const std::uint64_t seed = pick_seed(o, cfg);
  const EvalOptions eo = read_eval_options(cfg);
  // "test" ranks held-out records; "train" ranks the training records themselves.
  const std::string positives = cfg.get_string("positives", fs::is_directory(o.data) ? "test" : "train");
  cfg.reject_unknown();
  const fs::path out = prepare_out(o.out);

  const ModelParams params = load_checkpoint(o.checkpoint);
  const HeteroGraph g = build_graph(data.train);
  if (params.config.num_users != g.num_users() || params.config.items_per_domain != g.items_per_domain())
    throw std::runtime_error("checkpoint shape does not match the data in " + o.data);
  const InteractionLog observed = data.combined();
  EvalTaskSet tasks;
  if (positives == "test") {
    tasks = build_eval_tasks(data.test, observed, seed, eo);
  } else if (positives == "train") {
    tasks = build_eval_tasks(data.train.interactions, observed, seed, eo);
  } else {
    throw std::runtime_error("positives must be 'test' or 'train', got '" + positives + "'");
  }
  if (tasks.tasks.empty()) throw std::runtime_error("no evaluable users (every candidate list was too short)");
  const MetricReport report = evaluate(g, params, tasks.tasks, eo.cutoff);
  const auto names = domain_names(data.train);
  const std::string tsv = format_report_tsv(report, names);
  write_text(out / "report.tsv", tsv);
  write_text(out / "report.kv", format_report_kv(report, names));
  std::cout << tsv;
  if (tasks.skipped > 0) std::cerr << "eval: skipped " << tasks.skipped << " users with too few negatives\n";
  return 0;
}

int cmd_gradcheck(const Options& o) {
  KeyValueConfig cfg = load_config(o);
  GradCheckOptions g;
  g.users = cfg.get_size("users", g.users);
  g.domains = cfg.get_size("domains", g.domains);
  g.items_per_domain = cfg.get_size("items_per_domain", g.items_per_domain);
  g.edges_per_user = cfg.get_size("edges_per_user", g.edges_per_user);
  g.dim = cfg.get_size("dim", g.dim);
  g.layers = cfg.get_size("layers", g.layers);
  g.triplets_per_domain = cfg.get_size("triplets_per_domain", g.triplets_per_domain);
  g.tie_relation_weights = cfg.get_bool("tie_relation_weights", false);
  g.mean_aggregation = cfg.get_bool("mean_aggregation", false);
  g.lambda = cfg.get_double("lambda", g.lambda);
  g.step = cfg.get_double("step", g.step);
  g.tolerance = cfg.get_double("tolerance", g.tolerance);
  g.corrupt = cfg.get_bool("corrupt", false);
  g.mode = pick_mode(o, cfg);
  const std::uint64_t seed = pick_seed(o, cfg);
  cfg.reject_unknown();

  const GradCheckReport r = run_gradcheck(seed, g);
  std::ostringstream os;
  os.precision(6);
  for (const auto& e : r.entries) os << e.name << '\t' << e.max_error << '\n';
  os << (r.passed ? "PASS" : "FAIL") << "\tmax_rel_error=" << r.max_error << '\n';
  if (!o.out.empty()) write_text(prepare_out(o.out) / "gradcheck.tsv", os.str());
  std::cout << os.str();
  return r.passed ? 0 : 1;
}

SyntheticSpec read_synth_spec(KeyValueConfig& cfg, std::uint64_t seed) {
  SyntheticSpec s;
  s.num_users = cfg.get_size("num_users", s.num_users);
  s.num_domains = cfg.get_size("num_domains", s.num_domains);
  s.items_per_domain = cfg.get_size("items_per_domain", s.items_per_domain);
  s.latent_dim = cfg.get_size("latent_dim", s.latent_dim);
  s.shared_signal = cfg.get_double("shared_signal", s.shared_signal);
  s.interactions_per_user = cfg.get_size("interactions_per_user", s.interactions_per_user);
  s.temperature = cfg.get_double("temperature", s.temperature);
  s.popularity_skew = cfg.get_double("popularity_skew", s.popularity_skew);
  s.seed = seed;
  s.validate();
  return s;
}

int cmd_synth(const Options& o) {
  KeyValueConfig cfg = load_config(o);
  const std::uint64_t cfg_seed = cfg.get_u64("seed", 1);
  const std::uint64_t seed = o.seed_set ? o.seed : cfg_seed;
  const SyntheticSpec spec = read_synth_spec(cfg, seed);
  cfg.reject_unknown();
  const fs::path out = prepare_out(o.out);
  const SyntheticDataset data = generate_synthetic(spec);
  write_synthetic(data, out);
  std::cout << format_manifest(data.manifest);
  return 0;
}

// Trains every requested mode on one split for several seeds and tabulates NDCG.
int cmd_bench(const Options& o) {
  KeyValueConfig cfg = load_config(o);
  const SplitDataset data = [&] {
    if (!o.data.empty()) return load_data(o.data);
    // Without --data, a synthetic dataset described by synth.* keys is generated.
    KeyValueConfig sub;
    for (const char* k : {"num_users", "num_domains", "items_per_domain", "latent_dim", "shared_signal",
                          "interactions_per_user", "temperature", "popularity_skew"}) {
      const std::string key = std::string("synth.") + k;
      if (cfg.has(key)) sub.set(k, cfg.get_string(key, ""));
    }
    const std::uint64_t synth_seed = cfg.get_u64("synth.seed", 1);
    return split_leave_latest(generate_synthetic(read_synth_spec(sub, synth_seed)).log);
  }();
  if (data.test.empty()) throw std::runtime_error("bench needs held-out test records");

  ExperimentSettings st;
  st.dim = cfg.get_size("dim", 64);
  st.layers = cfg.get_size("layers", 2);
  st.tie_relation_weights = cfg.get_bool("tie_relation_weights", false);
  st.mean_aggregation = cfg.get_bool("mean_aggregation", false);
  st.train = read_train_config(cfg);
  st.eval = read_eval_options(cfg);
  st.eval_seed = cfg.get_u64("eval_seed", st.eval_seed);
  st.use_validation = cfg.get_bool("use_validation", false);
  st.validate_every = cfg.get_size("validate_every", st.validate_every);
  const auto modes = cfg.get_list("modes", {"full", "specific_only", "mf"});
  const std::size_t runs = cfg.get_size("runs", 1);
  const std::uint64_t base_seed = pick_seed(o, cfg);
  if (!o.mode.empty()) throw std::runtime_error("bench takes its modes from the 'modes' config key");
  cfg.reject_unknown();
  const fs::path out = prepare_out(o.out);

  const auto names = domain_names(data.train);
  std::ostringstream table;
  table.precision(6);
  table << std::fixed << "seed\tmode\tdomain\tusers\tHR@" << st.eval.cutoff << "\tNDCG@" << st.eval.cutoff << '\n';
  for (std::size_t r = 0; r < runs; ++r) {
    const std::uint64_t seed = base_seed + r;
    for (const auto& m : modes) {
      const ModelMode mode = parse_mode(m);
      const ExperimentResult res = run_experiment(data, mode, st, seed);
      for (const auto& d : res.test.domains) {
        table << seed << '\t' << m << '\t' << names[d.domain] << '\t' << d.users << '\t' << d.hr << '\t'
              << d.ndcg << '\n';
      }
      std::cerr << "bench: seed " << seed << ' ' << m << " mean NDCG " << mean_ndcg(res.test) << '\n';
    }
  }
  write_text(out / "bench.tsv", table.str());
  std::cout << table.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heterogeneous graph cross-domain recommender"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "key=value config file");
    sub->add_option("--seed", o.seed, "random seed")->each([&](const std::string&) { o.seed_set = true; });
  };

  auto* prepare = app.add_subcommand("prepare", "parse a log, split it and write statistics");
  prepare->add_option("--data", o.data, "interaction TSV")->required();
  prepare->add_option("--out", o.out, "output directory")->required();
  prepare->add_option("--config", o.config, "key=value config file");

  auto* train = app.add_subcommand("train", "train a model");
  add_common(train);
  train->add_option("--data", o.data, "split directory or interaction TSV")->required();
  train->add_option("--out", o.out, "output directory")->required();
  train->add_option("--mode", o.mode, "full|specific_only|shared_only|mf");

  auto* eval = app.add_subcommand("eval", "rank held-out items");
  add_common(eval);
  eval->add_option("--checkpoint", o.checkpoint, "model checkpoint")->required();
  eval->add_option("--data", o.data, "split directory or interaction TSV")->required();
  eval->add_option("--out", o.out, "output directory")->required();

  auto* grad = app.add_subcommand("gradcheck", "compare analytic and numeric gradients");
  add_common(grad);
  grad->add_option("--mode", o.mode, "full|specific_only|shared_only|mf");
  grad->add_option("--out", o.out, "optional output directory");

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common(synth);
  synth->add_option("--out", o.out, "output directory")->required();

  auto* bench = app.add_subcommand("bench", "compare models over several seeds");
  add_common(bench);
  bench->add_option("--data", o.data, "split directory or interaction TSV (default: synthetic)");
  bench->add_option("--out", o.out, "output directory")->required();
  bench->add_option("--mode", o.mode, "not accepted; use the modes key");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*prepare) return cmd_prepare(o);
    if (*train) return cmd_train(o);
    if (*eval) return cmd_eval(o);
    if (*grad) return cmd_gradcheck(o);
    if (*synth) return cmd_synth(o);
    if (*bench) return cmd_bench(o);
  } catch (const std::exception& e) {
    std::cerr << "hgdr: error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
