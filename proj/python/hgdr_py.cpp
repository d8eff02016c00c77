#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "hgdr/baselines.hpp"
#include "hgdr/checkpoint.hpp"
#include "hgdr/gradcheck.hpp"

namespace py = pybind11;
using namespace hgdr;

namespace {

std::vector<std::string> domain_names(const InteractionLog& log) { return log.domains.keys(); }

py::list report_rows(const MetricReport& r, const std::vector<std::string>& names) {
  py::list out;
  for (const auto& d : r.domains) {
    py::dict row;
    row["domain"] = d.domain < names.size() ? names[d.domain] : std::to_string(d.domain);
    row["users"] = d.users;
    row["hr"] = d.hr;
    row["ndcg"] = d.ndcg;
    out.append(row);
  }
  return out;
}

py::list history_rows(const std::vector<EpochReport>& h) {
  py::list out;
  for (const auto& e : h) {
    py::dict row;
    row["epoch"] = e.epoch;
    row["domain_bpr"] = e.domain_bpr;
    row["total"] = e.total;
    out.append(row);
  }
  return out;
}

struct Experiment {
  ExperimentResult result;
  std::vector<std::string> names;
};

}  // namespace

PYBIND11_MODULE(_hgdr, m) {
  m.doc() = "heterogeneous-graph cross-domain recommender";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  py::class_<InteractionLog>(m, "InteractionLog")
      .def_property_readonly("num_users", &InteractionLog::num_users)
      .def_property_readonly("domains", &domain_names)
      .def_property_readonly("items_per_domain", &InteractionLog::items_per_domain)
      .def("__len__", [](const InteractionLog& l) { return l.interactions.size(); })
      .def("records",
           [](const InteractionLog& l) {
             std::vector<std::tuple<std::string, std::string, std::string, Timestamp>> out;
             for (const auto& r : l.interactions)
               out.emplace_back(l.users.key(r.user), l.items[r.domain].key(r.item), l.domains.key(r.domain),
                                r.timestamp);
             return out;
           })
      .def("to_tsv", [](const InteractionLog& l) {
        std::ostringstream os;
        write_log_tsv(l, os);
        return os.str();
      });

  py::class_<SplitDataset>(m, "SplitDataset")
      .def_readonly("train", &SplitDataset::train)
      .def_property_readonly("num_test", [](const SplitDataset& s) { return s.test.size(); })
      .def("write", [](const SplitDataset& s, const std::filesystem::path& dir) { write_split(s, dir); });

  m.def("parse_log", [](const std::filesystem::path& p) { return parse_log(p); }, py::arg("path"));
  m.def(
      "parse_text",
      [](const std::string& text) {
        std::istringstream in(text);
        return parse_log(in, "<string>");
      },
      py::arg("text"));
  m.def("split", &split_leave_latest, py::arg("log"));
  m.def("read_split", &read_split, py::arg("directory"));
  m.def(
      "stats",
      [](const InteractionLog& log) {
        py::list out;
        for (const auto& d : compute_stats(log).domains) {
          py::dict row;
          row["domain"] = d.name;
          row["users"] = d.users;
          row["items"] = d.items;
          row["interactions"] = d.interactions;
          row["sparsity_pct"] = d.sparsity_pct;
          out.append(row);
        }
        return out;
      },
      py::arg("log"));
  m.def("stats_table", [](const InteractionLog& log) { return format_stats_table(compute_stats(log)); },
        py::arg("log"));

  m.def(
      "synth",
      [](std::size_t num_users, std::size_t num_domains, std::size_t items_per_domain, std::size_t latent_dim,
         double shared_signal, std::size_t interactions_per_user, double temperature, double popularity_skew,
         std::uint64_t seed) {
        SyntheticSpec s;
        s.num_users = num_users;
        s.num_domains = num_domains;
        s.items_per_domain = items_per_domain;
        s.latent_dim = latent_dim;
        s.shared_signal = shared_signal;
        s.interactions_per_user = interactions_per_user;
        s.temperature = temperature;
        s.popularity_skew = popularity_skew;
        s.seed = seed;
        return generate_synthetic(s).log;
      },
      py::arg("num_users") = 1000, py::arg("num_domains") = 3, py::arg("items_per_domain") = 500,
      py::arg("latent_dim") = 8, py::arg("shared_signal") = 0.5, py::arg("interactions_per_user") = 10,
      py::arg("temperature") = 1.0, py::arg("popularity_skew") = 0.0, py::arg("seed") = 1);

  m.def("bpr_loss", &bpr_loss, py::arg("x_pos"), py::arg("x_neg"));
  m.def(
      "rank_of_positive",
      [](const std::vector<double>& scores, std::size_t pos) { return rank_of_positive(scores, pos); },
      py::arg("scores"), py::arg("pos_index"));
  m.def(
      "hr_ndcg",
      [](const std::vector<std::size_t>& ranks, std::size_t cutoff) {
        const auto r = hr_ndcg_at(ranks, cutoff);
        return std::make_pair(r.hr, r.ndcg);
      },
      py::arg("ranks"), py::arg("cutoff") = 10);

  m.def(
      "gradcheck",
      [](std::uint64_t seed, const std::string& mode, bool corrupt) {
        GradCheckOptions o;
        o.mode = parse_mode(mode);
        o.corrupt = corrupt;
        const auto r = run_gradcheck(seed, o);
        py::dict out;
        out["passed"] = r.passed;
        out["max_error"] = r.max_error;
        py::dict per;
        for (const auto& e : r.entries) per[py::str(e.name)] = e.max_error;
        out["entries"] = per;
        return out;
      },
      py::arg("seed") = 1, py::arg("mode") = "full", py::arg("corrupt") = false);

  py::class_<Experiment>(m, "Experiment")
      .def_property_readonly("report", [](const Experiment& e) { return report_rows(e.result.test, e.names); })
      .def_property_readonly("history", [](const Experiment& e) { return history_rows(e.result.fit.history); })
      .def_property_readonly("mean_ndcg", [](const Experiment& e) { return mean_ndcg(e.result.test); })
      .def("save", [](const Experiment& e, const std::filesystem::path& p) { save_checkpoint(e.result.fit.params, p); },
           py::arg("path"))
      .def("checkpoint_bytes", [](const Experiment& e) {
        std::ostringstream os;
        write_checkpoint(e.result.fit.params, os);
        return py::bytes(os.str());
      });

  m.def(
      "train",
      [](const SplitDataset& split, const std::string& mode, std::size_t dim, std::size_t layers,
         std::size_t epochs, double lr, double lambda, bool mean_aggregation, bool tie_relation_weights,
         std::uint64_t seed, std::uint64_t eval_seed) {
        ExperimentSettings st;
        st.dim = dim;
        st.layers = layers;
        st.mean_aggregation = mean_aggregation;
        st.tie_relation_weights = tie_relation_weights;
        st.train.epochs = epochs;
        st.train.adam.lr = lr;
        st.train.lambda_reg = lambda;
        st.eval_seed = eval_seed;
        Experiment e;
        {
          py::gil_scoped_release release;
          e.result = run_experiment(split, parse_mode(mode), st, seed);
        }
        e.names = split.train.domains.keys();
        return e;
      },
      py::arg("split"), py::arg("mode") = "full", py::arg("dim") = 64, py::arg("layers") = 2,
      py::arg("epochs") = 50, py::arg("lr") = 0.001, py::arg("lambda_") = 1e-4,
      py::arg("mean_aggregation") = false, py::arg("tie_relation_weights") = false, py::arg("seed") = 1,
      py::arg("eval_seed") = 7);

  m.def(
      "evaluate",
      [](const std::filesystem::path& checkpoint, const SplitDataset& split, std::uint64_t seed) {
        const auto params = load_checkpoint(checkpoint);
        const auto tasks = build_eval_tasks(split, seed);
        const auto report = evaluate(build_graph(split.train), params, tasks.tasks);
        return report_rows(report, split.train.domains.keys());
      },
      py::arg("checkpoint"), py::arg("split"), py::arg("seed") = 7);
}
