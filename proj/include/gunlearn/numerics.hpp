#pragma once

// Dense and CSR matrices, the handful of kernels the models need, a seeded
// random stream and the Adam optimizer.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace gunlearn {

/// Row-major matrix of doubles.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  bool all_finite() const noexcept;
  DenseMatrix transposed() const;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Compressed sparse row matrix. Column indices are strictly increasing
/// within a row.
class SparseMatrix {
 public:
  struct Triplet {
    std::size_t row;
    std::size_t col;
    double value;
  };

  SparseMatrix() = default;
  /// Takes ownership of already-valid CSR arrays; validates them.
  SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> offsets,
               std::vector<std::size_t> indices, std::vector<double> values);

  /// Builds from unordered triplets; duplicates are summed.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                    std::vector<Triplet> triplets);
  /// Keeps the exact non-zeros of `dense`.
  static SparseMatrix from_dense(const DenseMatrix& dense);
  static SparseMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  std::span<const std::size_t> offsets() const noexcept { return offsets_; }
  std::span<const std::size_t> indices() const noexcept { return indices_; }
  std::span<const double> values() const noexcept { return values_; }

  std::span<const std::size_t> row_indices(std::size_t r) const {
    return {indices_.data() + offsets_[r], offsets_[r + 1] - offsets_[r]};
  }
  std::span<const double> row_values(std::size_t r) const {
    return {values_.data() + offsets_[r], offsets_[r + 1] - offsets_[r]};
  }

  /// Entry lookup by binary search; zero when not stored.
  double at(std::size_t r, std::size_t c) const;
  DenseMatrix to_dense() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::size_t> indices_;
  std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Kernels. All throw ShapeError on a dimension mismatch.

/// a * b
DenseMatrix spmm(const SparseMatrix& a, const DenseMatrix& b);
/// transpose(a) * b, without materializing the transpose.
DenseMatrix spmm_transposed(const SparseMatrix& a, const DenseMatrix& b);
/// a * b
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
/// transpose(a) * b
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
/// a * transpose(b)
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);

/// Row-wise softmax with max subtraction.
DenseMatrix softmax_rows(const DenseMatrix& m);
DenseMatrix relu(const DenseMatrix& m);

// ---------------------------------------------------------------------------

/// Deterministic 64-bit random stream (mt19937_64 seeded through splitmix64).
/// Draws avoid the <random> distributions, whose output is
/// implementation-defined, so streams match across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }

  /// Independent stream keyed by `stream`; does not advance this stream.
  Rng derive(std::uint64_t stream) const;

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);
  /// Standard normal (Box-Muller).
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[uniform_index(i)]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// splitmix64 finalizer; used to mix seed material.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Entries uniform in [-s, s], s = sqrt(6 / (rows + cols)).
DenseMatrix glorot_init(std::size_t rows, std::size_t cols, Rng& rng);

// ---------------------------------------------------------------------------

struct AdamHyper {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamHyper hyper;
  std::vector<DenseMatrix> first_moment;
  std::vector<DenseMatrix> second_moment;
  std::uint64_t step = 0;

  /// Zero accumulators shaped like `params`.
  static AdamState for_params(std::span<const DenseMatrix> params, AdamHyper hyper = {});
};

/// One bias-corrected Adam update in place. Throws ShapeError when shapes
/// disagree and NumericError for a non-finite gradient.
void adam_step(std::span<DenseMatrix> params, std::span<const DenseMatrix> grads,
               AdamState& state);

}  // namespace gunlearn
