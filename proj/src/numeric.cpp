#include "hgdr/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>
#include <string>

namespace hgdr {

namespace {

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  std::ostringstream os;
  os << op << ": shape mismatch " << a.rows() << "x" << a.cols() << " vs " << b.rows()
     << "x" << b.cols();
  throw std::invalid_argument(os.str());
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw std::invalid_argument("from_rows: ragged rows");
    std::copy(row.begin(), row.end(), m.data_.begin() + static_cast<std::ptrdiff_t>(i * c));
    ++i;
  }
  return m;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Matrix::add_inplace(const Matrix& other) {
  if (!same_shape(other)) shape_error("add_inplace", *this, other);
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
}

void Matrix::scale_inplace(double s) {
  for (double& x : data_) x *= s;
}

double Matrix::squared_norm() const {
  double s = 0.0;
  for (double x : data_) s += x * x;
  return s;
}

void Matrix::validate_finite(std::string_view what) const {
  for (std::size_t k = 0; k < data_.size(); ++k) {
    if (!std::isfinite(data_[k])) {
      std::ostringstream os;
      os << what << ": non-finite entry at (" << k / std::max<std::size_t>(cols_, 1) << ", "
         << k % std::max<std::size_t>(cols_, 1) << ")";
      throw std::domain_error(os.str());
    }
  }
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) return false;
  if (a.size() == 0) return true;
  return std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(double)) == 0;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) shape_error("max_abs_diff", a, b);
  double m = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t k = 0; k < av.size(); ++k) m = std::max(m, std::abs(av[k] - bv[k]));
  return m;
}

void matmul_add(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  if (out.rows() != a.rows() || out.cols() != b.cols()) shape_error("matmul(out)", out, b);
  const std::size_t n = a.rows();
  const std::size_t inner = a.cols();
  const std::size_t m = b.cols();
  const double* bp = b.values().data();
  for (std::size_t i = 0; i < n; ++i) {
    double* o = out.row(i).data();
    const double* ar = a.row(i).data();
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = ar[k];
      const double* br = bp + k * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += aik * br[j];
    }
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  Matrix out(a.rows(), b.cols());
  matmul_add(a, b, out);
  return out;
}

void matmul_tn_add(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.rows() != b.rows()) shape_error("matmul_tn", a, b);
  if (out.rows() != a.cols() || out.cols() != b.cols()) shape_error("matmul_tn(out)", out, b);
  const std::size_t m = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ar = a.row(i).data();
    const double* br = b.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = ar[k];
      if (aik == 0.0) continue;
      double* o = out.row(k).data();
      for (std::size_t j = 0; j < m; ++j) o[j] += aik * br[j];
    }
  }
}

void matmul_nt_add(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.cols() != b.cols()) shape_error("matmul_nt", a, b);
  if (out.rows() != a.rows() || out.cols() != b.rows()) shape_error("matmul_nt(out)", out, b);
  const std::size_t inner = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ar = a.row(i).data();
    double* o = out.row(i).data();
    for (std::size_t k = 0; k < b.rows(); ++k) {
      const double* br = b.row(k).data();
      double s = 0.0;
      for (std::size_t j = 0; j < inner; ++j) s += ar[j] * br[j];
      o[k] += s;
    }
  }
}

Matrix add(const Matrix& a, const Matrix& b) {
  Matrix out = a;
  out.add_inplace(b);
  return out;
}

Matrix relu(const Matrix& x) {
  Matrix out = x;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

Matrix relu_backward(const Matrix& x, const Matrix& upstream) {
  if (!x.same_shape(upstream)) shape_error("relu_backward", x, upstream);
  Matrix out(x.rows(), x.cols());
  auto xv = x.values();
  auto uv = upstream.values();
  auto ov = out.values();
  for (std::size_t k = 0; k < xv.size(); ++k) ov[k] = xv[k] > 0.0 ? uv[k] : 0.0;
  return out;
}

Matrix segment_sum(const Matrix& rows, std::span<const std::uint32_t> offsets,
                   std::span<const std::uint32_t> indices) {
  if (offsets.empty()) throw std::invalid_argument("segment_sum: empty offsets");
  const std::size_t targets = offsets.size() - 1;
  if (offsets.back() != indices.size())
    throw std::invalid_argument("segment_sum: last offset does not match index count");
  Matrix out(targets, rows.cols());
  const std::size_t k = rows.cols();
  for (std::size_t t = 0; t < targets; ++t) {
    if (offsets[t] > offsets[t + 1])
      throw std::invalid_argument("segment_sum: offsets not monotone");
    double* o = out.row(t).data();
    for (std::uint32_t j = offsets[t]; j < offsets[t + 1]; ++j) {
      const std::uint32_t src = indices[j];
      if (src >= rows.rows()) {
        throw std::out_of_range("segment_sum: index " + std::to_string(src) +
                                " out of range for " + std::to_string(rows.rows()) + " rows");
      }
      const double* r = rows.row(src).data();
      for (std::size_t c = 0; c < k; ++c) o[c] += r[c];
    }
  }
  return out;
}

void scale_rows(Matrix& m, std::span<const double> factors) {
  if (factors.size() != m.rows()) throw std::invalid_argument("scale_rows: length mismatch");
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (double& v : m.row(r)) v *= factors[r];
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

void adam_step(Matrix& param, const Matrix& grad, AdamState& state) {
  if (!param.same_shape(grad)) shape_error("adam_step", param, grad);
  if (!state.m.same_shape(param) || !state.v.same_shape(param))
    shape_error("adam_step(state)", state.m, param);
  grad.validate_finite("adam_step gradient");

  const AdamConfig& hp = state.hp;
  state.t += 1;
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.t));
  auto p = param.values();
  auto g = grad.values();
  auto m = state.m.values();
  auto v = state.v.values();
  for (std::size_t k = 0; k < p.size(); ++k) {
    m[k] = hp.beta1 * m[k] + (1.0 - hp.beta1) * g[k];
    v[k] = hp.beta2 * v[k] + (1.0 - hp.beta2) * g[k] * g[k];
    const double m_hat = m[k] / bc1;
    const double v_hat = v[k] / bc2;
    p[k] -= hp.lr * m_hat / (std::sqrt(v_hat) + hp.eps);
  }
}

Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f, const Matrix& param,
                        double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: step must be positive");
  Matrix work = param;
  Matrix out(param.rows(), param.cols());
  auto wv = work.values();
  auto ov = out.values();
  for (std::size_t k = 0; k < wv.size(); ++k) {
    const double orig = wv[k];
    wv[k] = orig + h;
    const double plus = f(work);
    wv[k] = orig - h;
    const double minus = f(work);
    wv[k] = orig;
    if (!std::isfinite(plus) || !std::isfinite(minus))
      throw std::domain_error("finite_diff_grad: objective returned a non-finite value");
    ov[k] = (plus - minus) / (2.0 * h);
  }
  return out;
}

}  // namespace hgdr
