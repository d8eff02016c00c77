#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "hgdr/gradcheck.hpp"
#include "hgdr/random.hpp"
#include "hgdr/training.hpp"
#include "oracle.hpp"

using namespace hgdr;

namespace {

ModelConfig tiny_config(const HeteroGraph& g, std::size_t dim = 4, std::size_t layers = 2) {
  ModelConfig c;
  c.num_users = g.num_users();
  c.items_per_domain = g.items_per_domain();
  c.dim = dim;
  c.layers = layers;
  return c;
}

HeteroGraph random_graph(std::uint64_t seed, std::size_t users = 6, std::vector<std::size_t> items = {5, 4},
                         double density = 0.4) {
  Rng rng(seed);
  auto edges = oracle::random_edges(users, items, density, rng);
  // Guarantee one edge per domain.
  for (std::uint32_t d = 0; d < items.size(); ++d) edges.push_back({0, 0, d});
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return std::tie(a.domain, a.user, a.item) < std::tie(b.domain, b.user, b.item);
  });
  edges.erase(std::unique(edges.begin(), edges.end(),
                          [](const Edge& a, const Edge& b) {
                            return a.domain == b.domain && a.user == b.user && a.item == b.item;
                          }),
              edges.end());
  // Every user keeps at least one unobserved item.
  std::erase_if(edges, [&](const Edge& e) { return e.item == items[e.domain] - 1 && e.user != 0; });
  std::erase_if(edges, [&](const Edge& e) { return e.user == 0 && e.item == 1; });
  return build_graph(users, items, edges);
}

std::vector<std::vector<Triplet>> fixed_batches(const HeteroGraph& g, std::uint64_t seed, std::size_t n) {
  std::vector<std::vector<Triplet>> out;
  for (std::uint32_t d = 0; d < g.num_domains(); ++d) {
    Rng rng(mix_seed(seed, d));
    out.push_back(sample_triplets(g, d, n, rng).triplets);
  }
  return out;
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("triplets respect the graph") {
    const auto g = random_graph(1, 12, {9, 7}, 0.35);
    for (std::uint32_t d = 0; d < 2; ++d) {
      Rng rng(77 + d);
      const auto batch = sample_triplets(g, d, 10000, rng);
      CHECK(batch.skipped == 0);
      CHECK(batch.triplets.size() == 10000);
      for (const auto& t : batch.triplets) {
        const auto n = neighbors(g, {d, Direction::ItemToUser}, t.user);
        CHECK(t.domain == d);
        CHECK(std::binary_search(n.begin(), n.end(), t.pos));
        CHECK_FALSE(std::binary_search(n.begin(), n.end(), t.neg));
        CHECK(t.neg < g.num_items(d));
      }
    }
  }

  TEST_CASE("sampling is reproducible from the seed") {
    const auto g = random_graph(2);
    Rng a(5), b(5);
    CHECK(sample_triplets(g, 0, 300, a).triplets == sample_triplets(g, 0, 300, b).triplets);
  }

  TEST_CASE("the only unobserved item is always the negative") {
    std::vector<Edge> edges;
    for (std::uint32_t i = 0; i < 9; ++i) edges.push_back({0, i, 0});
    const auto g = build_graph(1, {10}, edges);
    Rng rng(3);
    const auto batch = sample_triplets(g, 0, 200, rng);
    for (const auto& t : batch.triplets) CHECK(t.neg == 9);
    CHECK(batch.triplets.size() + batch.skipped == 200);
  }

  TEST_CASE("a user who saw every item is skipped") {
    const std::vector<Edge> edges{{0, 0, 0}, {0, 1, 0}, {1, 0, 0}};
    const auto g = build_graph(2, {2}, edges);
    Rng rng(4);
    const auto batch = sample_triplets(g, 0, 300, rng);
    CHECK(batch.skipped > 0);
    for (const auto& t : batch.triplets) {
      CHECK(t.user == 1);
      CHECK(t.neg == 1);
    }
    const std::vector<Edge> full{{0, 0, 0}, {0, 1, 0}};
    CHECK_THROWS_AS(sample_triplets(build_graph(1, {2}, full), 0, 5, rng), std::invalid_argument);
  }

  TEST_CASE("bpr loss examples") {
    CHECK(bpr_loss(0.0, 0.0) == doctest::Approx(0.693147).epsilon(1e-6));
    CHECK(bpr_loss(std::log(3.0), 0.0) == doctest::Approx(0.287682).epsilon(1e-6));
    CHECK(bpr_loss(50.0, 0.0) == doctest::Approx(1.9287498479639178e-22).epsilon(1e-9));
    CHECK(bpr_loss(0.0, 50.0) == doctest::Approx(50.0).epsilon(1e-12));
    CHECK(std::isfinite(bpr_loss(0.0, 1000.0)));
    CHECK(bpr_grad(0.0) == doctest::Approx(-0.5));
  }

  TEST_CASE("bpr loss is positive and decreasing in the margin") {
    Rng rng(5);
    for (int k = 0; k < 1000; ++k) {
      const double a = 40.0 * uniform01(rng) - 20.0;
      const double b = a + 0.01 + 5.0 * uniform01(rng);
      CHECK(bpr_loss(a, 0.0) > 0.0);
      CHECK(bpr_loss(b, 0.0) < bpr_loss(a, 0.0));
      const double h = 1e-6;
      const double fd = (softplus(-(a + h)) - softplus(-(a - h))) / (2 * h);
      CHECK(bpr_grad(a) == doctest::Approx(fd).epsilon(1e-6));
    }
  }

  TEST_CASE("domain loss example") {
    const std::vector<ScorePair> s{{0.0, 0.0}};
    CHECK(domain_loss(s, 1.0, 4.0) == doctest::Approx(std::log(2.0) + 4.0).epsilon(1e-12));
    CHECK_THROWS_AS(domain_loss(std::vector<ScorePair>{}, 1.0, 0.0), std::invalid_argument);
  }

  TEST_CASE("domain bpr matches a recomputation from the reference forward pass") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto g = random_graph(40 + seed);
      const auto p = init_params(tiny_config(g), seed);
      std::vector<Edge> edges;
      for (std::uint32_t d = 0; d < g.num_domains(); ++d)
        for (std::uint32_t u = 0; u < g.num_users(); ++u)
          for (auto i : neighbors(g, {d, Direction::ItemToUser}, u)) edges.push_back({u, i, d});
      const auto ref = oracle::naive_forward(edges, p);
      const auto batches = fixed_batches(g, seed, 25);
      const auto r = evaluate_objective(g, p, batches, {{1.0, 1.0}, 0.0, false});
      for (std::size_t d = 0; d < 2; ++d) {
        double sum = 0.0;
        for (const auto& t : batches[d]) {
          double pos = 0.0, neg = 0.0;
          for (std::size_t k = 0; k < p.config.dim; ++k) {
            pos += ref.user[d][t.user][k] * ref.item[d][t.pos][k];
            neg += ref.user[d][t.user][k] * ref.item[d][t.neg][k];
          }
          sum += std::log1p(std::exp(-(pos - neg)));
        }
        CHECK(std::abs(r.domain_bpr[d] - sum / static_cast<double>(batches[d].size())) < 1e-12);
      }
    }
  }

  TEST_CASE("objective is linear in the domain weights") {
    const auto g = random_graph(6);
    const auto p = init_params(tiny_config(g), 9);
    const auto batches = fixed_batches(g, 10, 20);
    const auto base = evaluate_objective(g, p, batches, {{1.0, 1.0}, 0.0, false});
    const auto a = base.domain_bpr[0], b = base.domain_bpr[1];
    Rng rng(11);
    for (int k = 0; k < 10; ++k) {
      const double w0 = 0.1 + uniform01(rng), w1 = 0.1 + uniform01(rng);
      const auto r = evaluate_objective(g, p, batches, {{w0, w1}, 0.0, false});
      CHECK(r.total == doctest::Approx(w0 * a + w1 * b).epsilon(1e-12));
    }
    const auto doubled = evaluate_objective(g, p, batches, {{2.0, 2.0}, 0.0, false});
    CHECK(doubled.total == doctest::Approx(2.0 * base.total).epsilon(1e-12));
  }

  TEST_CASE("objective grows with lambda and counts the penalty once") {
    const auto g = random_graph(7);
    const auto p = init_params(tiny_config(g), 12);
    const auto batches = fixed_batches(g, 13, 20);
    double prev = -1.0;
    for (double lam : {0.0, 1e-5, 1e-3, 1e-1, 1.0}) {
      const auto r = evaluate_objective(g, p, batches, {{0.3, 0.7}, lam, false});
      CHECK(r.total > prev);
      CHECK(r.regularization == doctest::Approx(lam * p.squared_norm()));
      prev = r.total;
    }
    const auto per = evaluate_objective(g, p, batches, {{0.5, 1.5}, 0.1, true});
    CHECK(per.regularization == doctest::Approx(2.0 * 0.1 * p.squared_norm()));
  }

  TEST_CASE("auto weights are edge proportions") {
    const auto g = random_graph(8);
    const auto w = auto_domain_weights(g);
    CHECK(w[0] + w[1] == doctest::Approx(1.0));
    CHECK(w[0] == doctest::Approx(static_cast<double>(g.item_to_user(0).num_edges()) / g.num_edges()));
  }

  TEST_CASE("zero learning rate leaves parameters untouched") {
    const auto g = random_graph(9);
    const auto p = init_params(tiny_config(g), 14);
    TrainConfig tc;
    tc.adam.lr = 0.0;
    Trainer t(g, p, tc);
    for (int e = 0; e < 3; ++e) t.train_epoch();
    CHECK(bitwise_equal(t.params(), p));
  }

  TEST_CASE("training is bitwise reproducible") {
    const auto g = random_graph(10);
    TrainConfig tc;
    tc.epochs = 10;
    tc.adam.lr = 0.01;
    const auto cfg = tiny_config(g);
    const auto a = fit(g, init_params(cfg, 1), tc);
    const auto b = fit(g, init_params(cfg, 1), tc);
    CHECK(bitwise_equal(a.params, b.params));
    for (std::size_t e = 0; e < 10; ++e) CHECK(a.history[e].total == b.history[e].total);
    tc.seed = 43;
    CHECK_FALSE(bitwise_equal(fit(g, init_params(cfg, 1), tc).params, a.params));
  }

  TEST_CASE("a small step along the gradient lowers the objective") {
    int descended = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto g = random_graph(100 + seed);
      const auto p = init_params(tiny_config(g), seed);
      const auto batches = fixed_batches(g, seed, 16);
      const Objective obj{auto_domain_weights(g), 0.0, false};
      const auto og = objective_gradient(g, p, batches, obj);
      ModelParams q = p;
      std::vector<const Matrix*> grads;
      og.grads.for_each([&](const std::string&, const Matrix& m) { grads.push_back(&m); });
      std::size_t idx = 0;
      q.for_each([&](const std::string&, Matrix& m) {
        AdamState st(m.rows(), m.cols(), AdamConfig{1e-4});
        adam_step(m, *grads[idx++], st);
      });
      if (evaluate_objective(g, q, batches, obj).total < og.loss.total) ++descended;
    }
    CHECK(descended >= 95);
  }

  TEST_CASE("training overfits a tiny graph") {
    const std::vector<Edge> edges{{0, 0, 0}, {0, 1, 0}, {1, 2, 0}, {2, 3, 0}, {1, 0, 1}, {2, 1, 1}};
    const auto g = build_graph(3, {4, 2}, edges);
    TrainConfig tc;
    tc.epochs = 300;
    tc.adam.lr = 0.01;
    tc.triplets_per_epoch = 32;
    const auto r = fit(g, init_params(tiny_config(g, 8), 3), tc);
    CHECK(r.history.back().total < 0.5 * r.history.front().total);
  }

  TEST_CASE("non-finite loss aborts the epoch") {
    const auto g = random_graph(11);
    auto p = init_params(tiny_config(g), 15);
    p.user_emb(0, 0) = 1e200;
    Trainer t(g, p, TrainConfig{});
    CHECK_THROWS_AS(t.train_epoch(), std::runtime_error);
  }

  TEST_CASE("validation keeps the best parameters") {
    const auto g = random_graph(12);
    TrainConfig tc;
    tc.epochs = 6;
    tc.adam.lr = 0.01;
    int calls = 0;
    FitOptions opts;
    opts.validate_every = 2;
    opts.validate = [&](const ModelParams&) { return ++calls == 2 ? 1.0 : 0.0; };
    const auto r = fit(g, init_params(tiny_config(g), 2), tc, opts);
    CHECK(calls == 3);
    CHECK(r.best_epoch == 4);
    CHECK(*r.best_validation == 1.0);
  }

  TEST_CASE("epoch line format") {
    EpochReport r;
    r.epoch = 3;
    r.domain_bpr = {0.5, 0.25};
    r.total = 0.75;
    r.elapsed_ms = 12.5;
    CHECK(format_epoch_line(r) == "3\t0.5\t0.25\t0.75\t12.5");
  }

  TEST_CASE("config validation") {
    TrainConfig tc;
    tc.lambda_reg = -1.0;
    CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
    tc = TrainConfig{};
    tc.domain_weights = {1.0, 0.0};
    CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
  }
}
