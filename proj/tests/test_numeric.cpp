#include <cmath>
#include <vector>

#include "doctest.h"
#include "hgdr/numeric.hpp"
#include "hgdr/random.hpp"
#include "oracle.hpp"

using namespace hgdr;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (double& v : m.values()) v = scale * (2.0 * uniform01(rng) - 1.0);
  return m;
}

// Adam written straight from the update equations, independent of adam_step.
struct ReferenceAdam {
  double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double m = 0.0, v = 0.0;
  int t = 0;
  double step(double w, double g) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mhat = m / (1 - std::pow(b1, t));
    const double vhat = v / (1 - std::pow(b2, t));
    return w - lr * mhat / (std::sqrt(vhat) + eps);
  }
};

}  // namespace

TEST_SUITE("numeric") {
  TEST_CASE("matmul basics") {
    Rng rng(1);
    const Matrix a = random_matrix(3, 3, rng);
    CHECK(matmul(a, Matrix::identity(3)) == a);
    CHECK(matmul(Matrix::from_rows({{2}}), Matrix::from_rows({{3}}))(0, 0) == 6.0);
    CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), std::invalid_argument);
  }

  TEST_CASE("matmul matches naive triple loop") {
    Rng rng(2);
    const Matrix a = random_matrix(4, 5, rng);
    const Matrix b = random_matrix(5, 3, rng);
    const auto ref = oracle::matmul(oracle::to_mat(a), oracle::to_mat(b));
    CHECK(oracle::max_abs_diff(ref, matmul(a, b)) < 1e-12);
  }

  TEST_CASE("transposed products agree with explicit transposes") {
    Rng rng(3);
    const Matrix a = random_matrix(6, 4, rng);
    const Matrix b = random_matrix(6, 5, rng);
    Matrix at(4, 6);
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t k = 0; k < 4; ++k) at(k, i) = a(i, k);
    Matrix tn(4, 5);
    matmul_tn_add(a, b, tn);
    CHECK(max_abs_diff(tn, matmul(at, b)) < 1e-12);

    const Matrix c = random_matrix(5, 4, rng);
    Matrix ct(4, 5);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t k = 0; k < 4; ++k) ct(k, i) = c(i, k);
    Matrix nt(6, 5);
    matmul_nt_add(a, c, nt);
    CHECK(max_abs_diff(nt, matmul(a, ct)) < 1e-12);
  }

  TEST_CASE("matmul associativity on random triples") {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix a = random_matrix(3, 4, rng), b = random_matrix(4, 5, rng), c = random_matrix(5, 2, rng);
      const Matrix left = matmul(matmul(a, b), c);
      const Matrix right = matmul(a, matmul(b, c));
      double scale = 1.0;
      for (double v : left.values()) scale = std::max(scale, std::abs(v));
      CHECK(max_abs_diff(left, right) <= 1e-9 * scale);
    }
  }

  TEST_CASE("relu and its backward") {
    CHECK(relu(Matrix(2, 2, -3.0)) == Matrix(2, 2, 0.0));
    const Matrix x = Matrix::from_rows({{-1, 0, 2}});
    CHECK(relu(x) == Matrix::from_rows({{0, 0, 2}}));
    CHECK(relu_backward(x, Matrix::from_rows({{5, 5, 5}})) == Matrix::from_rows({{0, 0, 5}}));
    CHECK_THROWS_AS(relu_backward(x, Matrix(1, 2)), std::invalid_argument);
  }

  TEST_CASE("relu(x) + relu(-x) = |x|") {
    Rng rng(5);
    Matrix x = random_matrix(7, 9, rng, 10.0);
    Matrix neg = x;
    neg.scale_inplace(-1.0);
    const Matrix sum = add(relu(x), relu(neg));
    for (std::size_t k = 0; k < x.size(); ++k) CHECK(sum.values()[k] == std::abs(x.values()[k]));
  }

  TEST_CASE("segment_sum small cases") {
    const Matrix rows = Matrix::from_rows({{1, 2}, {3, 4}});
    const std::vector<std::uint32_t> off{0, 2, 2};
    const std::vector<std::uint32_t> idx{0, 1};
    const Matrix out = segment_sum(rows, off, idx);
    CHECK(out == Matrix::from_rows({{4, 6}, {0, 0}}));
    const std::vector<std::uint32_t> bad_idx{0, 5};
    CHECK_THROWS_AS(segment_sum(rows, off, bad_idx), std::out_of_range);
  }

  TEST_CASE("segment_sum equals explicit per-target loop and is linear") {
    Rng rng(6);
    const std::size_t sources = 9, targets = 7, k = 3;
    std::vector<std::uint32_t> off{0};
    std::vector<std::uint32_t> idx;
    for (std::size_t t = 0; t < targets; ++t) {
      const auto deg = uniform_index(rng, 5);
      for (std::uint64_t j = 0; j < deg; ++j) idx.push_back(static_cast<std::uint32_t>(uniform_index(rng, sources)));
      off.push_back(static_cast<std::uint32_t>(idx.size()));
    }
    const Matrix x = random_matrix(sources, k, rng);
    const Matrix out = segment_sum(x, off, idx);
    for (std::size_t t = 0; t < targets; ++t) {
      for (std::size_t c = 0; c < k; ++c) {
        double acc = 0.0;
        for (std::uint32_t j = off[t]; j < off[t + 1]; ++j) acc += x(idx[j], c);
        CHECK(out(t, c) == acc);
      }
    }

    // Integer-valued inputs keep every sum exact.
    Matrix xi(sources, k), yi(sources, k);
    for (double& v : xi.values()) v = static_cast<double>(uniform_index(rng, 21)) - 10.0;
    for (double& v : yi.values()) v = static_cast<double>(uniform_index(rng, 21)) - 10.0;
    Matrix combo = xi;
    combo.scale_inplace(3.0);
    Matrix y2 = yi;
    y2.scale_inplace(-2.0);
    combo.add_inplace(y2);
    Matrix expect = segment_sum(xi, off, idx);
    expect.scale_inplace(3.0);
    Matrix sy = segment_sum(yi, off, idx);
    sy.scale_inplace(-2.0);
    expect.add_inplace(sy);
    CHECK(segment_sum(combo, off, idx) == expect);
  }

  TEST_CASE("operations are bitwise deterministic") {
    Rng rng(7);
    const Matrix a = random_matrix(8, 8, rng), b = random_matrix(8, 8, rng);
    CHECK(bitwise_equal(matmul(a, b), matmul(a, b)));
    const std::vector<std::uint32_t> off{0, 3, 5}, idx{1, 4, 7, 0, 2};
    CHECK(bitwise_equal(segment_sum(a, off, idx), segment_sum(a, off, idx)));
  }

  TEST_CASE("adam: zero gradient leaves parameter unchanged") {
    Matrix p = Matrix::from_rows({{1.5, -2.0}});
    const Matrix before = p;
    AdamState st(1, 2);
    adam_step(p, Matrix(1, 2), st);
    CHECK(p == before);
    CHECK(st.t == 1);
  }

  TEST_CASE("adam: first step is about -lr * sign(g)") {
    Matrix p(1, 1, 0.0);
    AdamState st(1, 1);
    adam_step(p, Matrix(1, 1, 4.0), st);
    CHECK(p(0, 0) == doctest::Approx(-1e-3).epsilon(1e-8));
    CHECK(std::abs(p(0, 0) + 1e-3) < 1e-11);
  }

  TEST_CASE("adam: matches reference on w^2 and decreases |w|") {
    Matrix p(1, 1, 1.0);
    AdamState st(1, 1);
    ReferenceAdam ref;
    double w_ref = 1.0;
    double prev = 1.0;
    for (int step = 0; step < 100; ++step) {
      const double g = 2.0 * p(0, 0);
      adam_step(p, Matrix(1, 1, g), st);
      w_ref = ref.step(w_ref, 2.0 * w_ref);
      CHECK(std::abs(p(0, 0) - w_ref) < 1e-12);
      CHECK(std::abs(p(0, 0)) < prev);
      prev = std::abs(p(0, 0));
    }
  }

  TEST_CASE("adam rejects non-finite gradients without mutating") {
    Matrix p(1, 2, 1.0);
    AdamState st(1, 2);
    Matrix g(1, 2, 0.0);
    g(0, 1) = std::nan("");
    CHECK_THROWS_AS(adam_step(p, g, st), std::domain_error);
    CHECK(st.t == 0);
    CHECK(p == Matrix(1, 2, 1.0));
  }

  TEST_CASE("finite differences") {
    Rng rng(8);
    const Matrix p = random_matrix(3, 4, rng);
    const Matrix ones = finite_diff_grad(
        [](const Matrix& m) {
          double s = 0.0;
          for (double v : m.values()) s += v;
          return s;
        },
        p);
    CHECK(max_abs_diff(ones, Matrix(3, 4, 1.0)) < 1e-9);
    const Matrix quad = finite_diff_grad([](const Matrix& m) { return 0.5 * m.squared_norm(); }, p);
    CHECK(max_abs_diff(quad, p) < 1e-8);
    CHECK_THROWS_AS(finite_diff_grad([](const Matrix&) { return INFINITY; }, p), std::domain_error);
  }

  TEST_CASE("validate_finite") {
    Matrix m(2, 2);
    m.validate_finite("ok");
    m(1, 0) = INFINITY;
    CHECK_THROWS_AS(m.validate_finite("bad"), std::domain_error);
  }
}
