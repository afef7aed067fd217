#pragma once

// Shared fixtures and brute-force oracles for the test binaries.

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "gunlearn/graph.hpp"
#include "gunlearn/numerics.hpp"

namespace testing {

using namespace gunlearn;

inline DenseMatrix random_dense(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0,
                                double hi = 1.0) {
  DenseMatrix m(rows, cols);
  for (double& x : m.data()) x = rng.uniform(lo, hi);
  return m;
}

inline DenseMatrix dense_matmul(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

inline double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  return worst;
}

/// Erdos-Renyi graph with uniform labels and features.
inline Graph random_graph(std::size_t n, double p, std::size_t num_classes,
                          std::size_t num_features, Rng& rng) {
  Graph g;
  g.num_nodes = n;
  g.num_classes = num_classes;
  g.features = random_dense(n, num_features, rng);
  g.labels.resize(n);
  for (int& y : g.labels) y = static_cast<int>(rng.uniform_index(num_classes));
  for (NodeIndex u = 0; u < n; ++u)
    for (NodeIndex v = u + 1; v < n; ++v)
      if (rng.uniform() < p) g.edges.push_back({u, v});
  return g;
}

inline Graph path_graph(std::size_t n) {
  Graph g;
  g.num_nodes = n;
  g.num_classes = 2;
  g.features = DenseMatrix(n, 1, 1.0);
  g.labels.assign(n, 0);
  for (NodeIndex v = 0; v + 1 < n; ++v) g.edges.push_back({v, v + 1});
  return g;
}

/// Dense D^{-1/2} (A + I) D^{-1/2}.
inline DenseMatrix dense_normalized_adjacency(const Graph& g) {
  const std::size_t n = g.num_nodes;
  DenseMatrix a = DenseMatrix::identity(n);
  for (const auto& e : g.edges) {
    a(e.u, e.v) = 1.0;
    a(e.v, e.u) = 1.0;
  }
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) deg[i] += a(i, j);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) /= std::sqrt(deg[i] * deg[j]);
  return a;
}

/// Linear scan of the edge list.
inline IndexSet scan_neighbors(const Graph& g, NodeIndex v) {
  IndexSet out;
  for (const auto& e : g.edges) {
    if (e.u == v) out.push_back(e.v);
    if (e.v == v) out.push_back(e.u);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Random disjoint train/val/test split, merged.
inline SplitIndices random_splits(std::size_t n, Rng& rng, double train = 0.4, double val = 0.1) {
  IndexSet all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  rng.shuffle(all);
  const auto n_train = static_cast<std::size_t>(train * static_cast<double>(n));
  const auto n_val = static_cast<std::size_t>(val * static_cast<double>(n));
  SplitIndices s;
  s.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train),
               all.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), all.end());
  for (auto* set : {&s.train, &s.val, &s.test}) std::sort(set->begin(), set->end());
  return merge_train_val(s);
}

/// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("gunlearn-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& child = "") const {
    return child.empty() ? path_.string() : (path_ / child).string();
  }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
