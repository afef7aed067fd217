#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "gunlearn/numerics.hpp"

namespace gunlearn {

class Rng;

using NodeIndex = std::size_t;
/// Sorted, duplicate-free node indices.
using IndexSet = std::vector<NodeIndex>;

struct Edge {
  NodeIndex u;
  NodeIndex v;
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Attributed undirected graph. Each edge is stored once.
struct Graph {
  std::size_t num_nodes = 0;
  std::size_t num_classes = 0;
  DenseMatrix features;    // num_nodes x num_features
  std::vector<int> labels;  // class per node, in [0, num_classes)
  std::vector<Edge> edges;

  std::size_t num_features() const noexcept { return features.cols(); }

  /// Throws ValidationError / IndexError naming the first offending record.
  void validate() const;
  friend bool operator==(const Graph&, const Graph&) = default;
};

/// Node partitions used by training and unlearning.
///
/// `labeled` is the training pool after the validation merge. `unlearning`
/// (the forget set) is a subset of `labeled` and `retained` is the rest.
struct SplitIndices {
  IndexSet train;
  IndexSet val;
  IndexSet test;
  IndexSet labeled;
  IndexSet unlearning;
  IndexSet retained;

  void validate(std::size_t num_nodes) const;
  friend bool operator==(const SplitIndices&, const SplitIndices&) = default;
};

/// Symmetric-normalized propagation operator with self-loops plus the raw
/// neighbor structure (no self-loops).
struct NormalizedAdjacency {
  SparseMatrix a_hat;
  SparseMatrix a_raw;

  std::size_t num_nodes() const noexcept { return a_hat.rows(); }
};

NormalizedAdjacency build_adjacency(const Graph& graph);

/// 1-hop neighbors of `v` in the raw adjacency, sorted, self excluded.
IndexSet neighbors(const NormalizedAdjacency& adj, NodeIndex v);

/// labeled = train U val; clears any previous unlearning sample.
SplitIndices merge_train_val(const SplitIndices& splits);

/// Draws round(fraction * |labeled|) nodes uniformly without replacement.
SplitIndices sample_unlearning_set(const SplitIndices& splits, double fraction, Rng& rng);

/// Returns a copy with the given forget set; `unlearning` must be a subset of
/// `labeled`.
SplitIndices with_unlearning_set(const SplitIndices& splits, IndexSet unlearning);

// Sorted-set helpers.
IndexSet set_union(const IndexSet& a, const IndexSet& b);
IndexSet set_difference(const IndexSet& a, const IndexSet& b);
IndexSet set_intersection(const IndexSet& a, const IndexSet& b);
bool is_sorted_unique(const IndexSet& s);
bool contains(const IndexSet& s, NodeIndex v);

}  // namespace gunlearn
