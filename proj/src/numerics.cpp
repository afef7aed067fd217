#include "gunlearn/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "gunlearn/error.hpp"

namespace gunlearn {

namespace {

std::string dims(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

void require_inner(const char* op, std::size_t lhs_cols, std::size_t rhs_rows,
                   std::size_t lr, std::size_t rr, std::size_t rc) {
  if (lhs_cols != rhs_rows) {
    throw ShapeError(std::string(op) + ": cannot multiply " + dims(lr, lhs_cols) +
                     " by " + dims(rr, rc));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// DenseMatrix

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("DenseMatrix: " + std::to_string(data_.size()) +
                     " values for shape " + dims(rows, cols));
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool DenseMatrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

DenseMatrix DenseMatrix::transposed() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

// ---------------------------------------------------------------------------
// SparseMatrix

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols,
                           std::vector<std::size_t> offsets,
                           std::vector<std::size_t> indices, std::vector<double> values)
    : rows_(rows),
      cols_(cols),
      offsets_(std::move(offsets)),
      indices_(std::move(indices)),
      values_(std::move(values)) {
  if (offsets_.size() != rows_ + 1 || offsets_.front() != 0 ||
      offsets_.back() != indices_.size() || indices_.size() != values_.size()) {
    throw ShapeError("SparseMatrix: inconsistent CSR array lengths");
  }
  for (std::size_t r = 0; r < rows_; ++r) {
    if (offsets_[r] > offsets_[r + 1]) {
      throw ValidationError("SparseMatrix: row offsets decrease at row " + std::to_string(r));
    }
    for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k) {
      if (indices_[k] >= cols_) {
        throw IndexError("SparseMatrix: column " + std::to_string(indices_[k]) +
                         " out of range in row " + std::to_string(r));
      }
      if (k > offsets_[r] && indices_[k] <= indices_[k - 1]) {
        throw ValidationError("SparseMatrix: column indices not strictly increasing in row " +
                              std::to_string(r));
      }
      if (!std::isfinite(values_[k])) {
        throw NumericError("SparseMatrix: non-finite value in row " + std::to_string(r));
      }
    }
  }
}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                         std::vector<Triplet> triplets) {
  for (const auto& t : triplets) {
    if (t.row >= rows || t.col >= cols) {
      throw IndexError("SparseMatrix: triplet (" + std::to_string(t.row) + ", " +
                       std::to_string(t.col) + ") outside " + dims(rows, cols));
    }
  }
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<std::size_t> offsets(rows + 1, 0);
  std::vector<std::size_t> indices;
  std::vector<double> values;
  indices.reserve(triplets.size());
  values.reserve(triplets.size());
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const auto& t = triplets[i];
    if (i > 0 && triplets[i - 1].row == t.row && triplets[i - 1].col == t.col) {
      values.back() += t.value;
      continue;
    }
    indices.push_back(t.col);
    values.push_back(t.value);
    ++offsets[t.row + 1];
  }
  for (std::size_t r = 0; r < rows; ++r) offsets[r + 1] += offsets[r];
  return SparseMatrix(rows, cols, std::move(offsets), std::move(indices), std::move(values));
}

SparseMatrix SparseMatrix::from_dense(const DenseMatrix& dense) {
  std::vector<std::size_t> offsets(dense.rows() + 1, 0);
  std::vector<std::size_t> indices;
  std::vector<double> values;
  for (std::size_t r = 0; r < dense.rows(); ++r) {
    for (std::size_t c = 0; c < dense.cols(); ++c) {
      const double v = dense(r, c);
      if (v != 0.0) {
        indices.push_back(c);
        values.push_back(v);
      }
    }
    offsets[r + 1] = indices.size();
  }
  return SparseMatrix(dense.rows(), dense.cols(), std::move(offsets), std::move(indices),
                      std::move(values));
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  std::vector<std::size_t> offsets(n + 1);
  std::vector<std::size_t> indices(n);
  for (std::size_t i = 0; i <= n; ++i) offsets[i] = i;
  for (std::size_t i = 0; i < n; ++i) indices[i] = i;
  return SparseMatrix(n, n, std::move(offsets), std::move(indices),
                      std::vector<double>(n, 1.0));
}

double SparseMatrix::at(std::size_t r, std::size_t c) const {
  if (r >= rows_ || c >= cols_) {
    throw IndexError("SparseMatrix::at: (" + std::to_string(r) + ", " + std::to_string(c) +
                     ") outside " + dims(rows_, cols_));
  }
  const auto idx = row_indices(r);
  const auto it = std::lower_bound(idx.begin(), idx.end(), c);
  if (it == idx.end() || *it != c) return 0.0;
  return values_[offsets_[r] + static_cast<std::size_t>(it - idx.begin())];
}

DenseMatrix SparseMatrix::to_dense() const {
  DenseMatrix d(rows_, cols_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k) d(r, indices_[k]) = values_[k];
  return d;
}

// ---------------------------------------------------------------------------
// Kernels

DenseMatrix spmm(const SparseMatrix& a, const DenseMatrix& b) {
  require_inner("spmm", a.cols(), b.rows(), a.rows(), b.rows(), b.cols());
  DenseMatrix out(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto dst = out.row(r);
    const auto idx = a.row_indices(r);
    const auto val = a.row_values(r);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto src = b.row(idx[k]);
      const double w = val[k];
      for (std::size_t c = 0; c < n; ++c) dst[c] += w * src[c];
    }
  }
  return out;
}

DenseMatrix spmm_transposed(const SparseMatrix& a, const DenseMatrix& b) {
  require_inner("spmm_transposed", a.rows(), b.rows(), a.cols(), b.rows(), b.cols());
  DenseMatrix out(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto src = b.row(r);
    const auto idx = a.row_indices(r);
    const auto val = a.row_values(r);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      auto dst = out.row(idx[k]);
      const double w = val[k];
      for (std::size_t c = 0; c < n; ++c) dst[c] += w * src[c];
    }
  }
  return out;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  require_inner("matmul", a.cols(), b.rows(), a.rows(), b.rows(), b.cols());
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double w = a(i, k);
      if (w == 0.0) continue;
      const auto src = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += w * src[j];
    }
  }
  return out;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  require_inner("matmul_tn", a.rows(), b.rows(), a.cols(), b.rows(), b.cols());
  DenseMatrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const auto src = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double w = a(k, i);
      if (w == 0.0) continue;
      auto dst = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += w * src[j];
    }
  }
  return out;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  require_inner("matmul_nt", a.cols(), b.cols(), a.rows(), b.cols(), b.rows());
  DenseMatrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto lhs = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const auto rhs = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += lhs[k] * rhs[k];
      out(i, j) = acc;
    }
  }
  return out;
}

DenseMatrix softmax_rows(const DenseMatrix& m) {
  DenseMatrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto in = m.row(r);
    auto dst = out.row(r);
    if (in.empty()) continue;
    const double peak = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      dst[c] = std::exp(in[c] - peak);
      total += dst[c];
    }
    for (double& v : dst) v /= total;
  }
  return out;
}

DenseMatrix relu(const DenseMatrix& m) {
  DenseMatrix out = m;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Rng

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

Rng Rng::derive(std::uint64_t stream) const {
  return Rng(mix64(seed_ ^ mix64(stream + 0x632BE59BD9B4E019ULL)));
}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::size_t Rng::uniform_index(std::size_t n) {
  if (n == 0) throw ValidationError("Rng::uniform_index: empty range");
  // Rejection sampling keeps the draw exactly uniform.
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

double Rng::normal() {
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

DenseMatrix glorot_init(std::size_t rows, std::size_t cols, Rng& rng) {
  if (rows == 0 || cols == 0) {
    throw ShapeError("glorot_init: zero dimension " + dims(rows, cols));
  }
  const double s = std::sqrt(6.0 / static_cast<double>(rows + cols));
  DenseMatrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(-s, s);
  return m;
}

// ---------------------------------------------------------------------------
// Adam

AdamState AdamState::for_params(std::span<const DenseMatrix> params, AdamHyper hyper) {
  AdamState st;
  st.hyper = hyper;
  for (const auto& p : params) {
    st.first_moment.emplace_back(p.rows(), p.cols());
    st.second_moment.emplace_back(p.rows(), p.cols());
  }
  return st;
}

void adam_step(std::span<DenseMatrix> params, std::span<const DenseMatrix> grads,
               AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
      params.size() != state.second_moment.size()) {
    throw ShapeError("adam_step: parameter, gradient and state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    const DenseMatrix* companions[] = {&grads[i], &state.first_moment[i], &state.second_moment[i]};
    for (const DenseMatrix* other : companions) {
      if (other->rows() != p.rows() || other->cols() != p.cols()) {
        throw ShapeError("adam_step: block " + std::to_string(i) + " is " +
                         dims(p.rows(), p.cols()) + " but companion is " +
                         dims(other->rows(), other->cols()));
      }
    }
    if (!grads[i].all_finite()) {
      throw NumericError("adam_step: non-finite gradient in block " + std::to_string(i));
    }
  }

  const auto& h = state.hyper;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(h.beta1, t);
  const double correct2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].data();
    const auto g = grads[i].data();
    auto m = state.first_moment[i].data();
    auto v = state.second_moment[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = h.beta1 * m[k] + (1.0 - h.beta1) * g[k];
      v[k] = h.beta2 * v[k] + (1.0 - h.beta2) * g[k] * g[k];
      const double m_hat = m[k] / correct1;
      const double v_hat = v[k] / correct2;
      p[k] -= h.learning_rate * m_hat / (std::sqrt(v_hat) + h.epsilon);
    }
  }
}

}  // namespace gunlearn
