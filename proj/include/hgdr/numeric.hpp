#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

namespace hgdr {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  void fill(double v);
  void add_inplace(const Matrix& other);
  void scale_inplace(double s);

  double squared_norm() const;

  // Throws std::domain_error naming `what` if any entry is NaN or infinite.
  void validate_finite(std::string_view what) const;

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  // Element-wise equality (0.0 == -0.0). Use bitwise_equal for byte identity.
  friend bool operator==(const Matrix& a, const Matrix& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

bool bitwise_equal(const Matrix& a, const Matrix& b);
double max_abs_diff(const Matrix& a, const Matrix& b);

// a * b, summation over k ascending.
Matrix matmul(const Matrix& a, const Matrix& b);
// out += a * b
void matmul_add(const Matrix& a, const Matrix& b, Matrix& out);
// out += a^T * b
void matmul_tn_add(const Matrix& a, const Matrix& b, Matrix& out);
// out += a * b^T
void matmul_nt_add(const Matrix& a, const Matrix& b, Matrix& out);

Matrix add(const Matrix& a, const Matrix& b);

Matrix relu(const Matrix& x);
// Passes upstream where x > 0; the subgradient at 0 is 0.
Matrix relu_backward(const Matrix& x, const Matrix& upstream);

// out[t] = sum of rows[indices[j]] for j in [offsets[t], offsets[t+1]),
// accumulated in index order.
Matrix segment_sum(const Matrix& rows, std::span<const std::uint32_t> offsets,
                   std::span<const std::uint32_t> indices);

// Multiplies row r by factors[r].
void scale_rows(Matrix& m, std::span<const double> factors);

double dot(std::span<const double> a, std::span<const double> b);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamState() = default;
  AdamState(std::size_t rows, std::size_t cols, AdamConfig cfg = {})
      : m(rows, cols), v(rows, cols), hp(cfg) {}

  Matrix m;
  Matrix v;
  std::int64_t t = 0;
  AdamConfig hp;
};

// One bias-corrected Adam update. Throws before mutating anything if the
// gradient is non-finite or shapes disagree.
void adam_step(Matrix& param, const Matrix& grad, AdamState& state);

// Central differences (f(p + h e) - f(p - h e)) / 2h per entry.
Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f,
                        const Matrix& param, double h = 1e-5);

}  // namespace hgdr
