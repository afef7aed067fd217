#include "gunlearn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <string>

#include "gunlearn/error.hpp"

namespace gunlearn {

IndexSet set_union(const IndexSet& a, const IndexSet& b) {
  IndexSet out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

IndexSet set_difference(const IndexSet& a, const IndexSet& b) {
  IndexSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

IndexSet set_intersection(const IndexSet& a, const IndexSet& b) {
  IndexSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

bool is_sorted_unique(const IndexSet& s) {
  return std::adjacent_find(s.begin(), s.end(), [](NodeIndex x, NodeIndex y) {
           return x >= y;
         }) == s.end();
}

bool contains(const IndexSet& s, NodeIndex v) {
  return std::binary_search(s.begin(), s.end(), v);
}

void Graph::validate() const {
  if (features.rows() != num_nodes) {
    throw ValidationError("graph: feature matrix has " + std::to_string(features.rows()) +
                          " rows for " + std::to_string(num_nodes) + " nodes");
  }
  if (!features.all_finite()) throw ValidationError("graph: non-finite feature value");
  if (labels.size() != num_nodes) {
    throw ValidationError("graph: " + std::to_string(labels.size()) + " labels for " +
                          std::to_string(num_nodes) + " nodes");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw ValidationError("graph: label " + std::to_string(labels[i]) + " of node " +
                            std::to_string(i) + " outside [0, " +
                            std::to_string(num_classes) + ")");
    }
  }
  std::vector<std::pair<NodeIndex, NodeIndex>> seen;
  seen.reserve(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto [u, v] = edges[i];
    if (u >= num_nodes || v >= num_nodes) {
      throw ValidationError("graph: edge " + std::to_string(i) + " (" + std::to_string(u) + ", " +
                       std::to_string(v) + ") has an endpoint >= " + std::to_string(num_nodes));
    }
    if (u == v) {
      throw ValidationError("graph: edge " + std::to_string(i) + " is a self-loop on node " +
                            std::to_string(u));
    }
    seen.emplace_back(std::min(u, v), std::max(u, v));
  }
  std::sort(seen.begin(), seen.end());
  const auto dup = std::adjacent_find(seen.begin(), seen.end());
  if (dup != seen.end()) {
    throw ValidationError("graph: duplicate edge (" + std::to_string(dup->first) + ", " +
                          std::to_string(dup->second) + ")");
  }
}

void SplitIndices::validate(std::size_t num_nodes) const {
  const std::pair<const char*, const IndexSet*> sets[] = {
      {"train", &train},           {"val", &val},
      {"test", &test},             {"labeled", &labeled},
      {"unlearning", &unlearning}, {"retained", &retained}};
  for (const auto& [name, s] : sets) {
    if (!is_sorted_unique(*s)) {
      throw ValidationError(std::string("splits: ") + name + " is not sorted and unique");
    }
    if (!s->empty() && s->back() >= num_nodes) {
      throw IndexError(std::string("splits: ") + name + " index " + std::to_string(s->back()) +
                       " out of range");
    }
  }
  if (!set_intersection(train, val).empty() || !set_intersection(train, test).empty() ||
      !set_intersection(val, test).empty()) {
    throw ValidationError("splits: train, val and test are not pairwise disjoint");
  }
  if (!set_difference(unlearning, labeled).empty()) {
    throw ValidationError("splits: unlearning set is not a subset of the labeled set");
  }
  if (!set_intersection(retained, unlearning).empty() ||
      set_union(retained, unlearning) != labeled) {
    throw ValidationError("splits: retained and unlearning do not partition the labeled set");
  }
}

NormalizedAdjacency build_adjacency(const Graph& graph) {
  graph.validate();
  const std::size_t n = graph.num_nodes;

  std::vector<SparseMatrix::Triplet> raw;
  raw.reserve(2 * graph.edges.size());
  for (const auto& e : graph.edges) {
    raw.push_back({e.u, e.v, 1.0});
    raw.push_back({e.v, e.u, 1.0});
  }
  SparseMatrix a_raw = SparseMatrix::from_triplets(n, n, std::move(raw));

  // Degrees of A + I.
  std::vector<double> degree(n);
  for (std::size_t i = 0; i < n; ++i) {
    degree[i] = static_cast<double>(a_raw.row_indices(i).size()) + 1.0;
  }

  std::vector<std::size_t> offsets(n + 1, 0);
  std::vector<std::size_t> indices;
  std::vector<double> values;
  indices.reserve(a_raw.nnz() + n);
  values.reserve(a_raw.nnz() + n);
  for (std::size_t i = 0; i < n; ++i) {
    bool diag_done = false;
    auto push = [&](std::size_t j) {
      indices.push_back(j);
      // The product d_i * d_j is exact and commutative, so a_hat is exactly symmetric.
      values.push_back(1.0 / std::sqrt(degree[i] * degree[j]));
    };
    for (std::size_t j : a_raw.row_indices(i)) {
      if (!diag_done && j > i) {
        push(i);
        diag_done = true;
      }
      push(j);
    }
    if (!diag_done) push(i);
    offsets[i + 1] = indices.size();
  }
  SparseMatrix a_hat(n, n, std::move(offsets), std::move(indices), std::move(values));
  return {std::move(a_hat), std::move(a_raw)};
}

IndexSet neighbors(const NormalizedAdjacency& adj, NodeIndex v) {
  if (v >= adj.a_raw.rows()) {
    throw IndexError("neighbors: node " + std::to_string(v) + " out of range (" +
                     std::to_string(adj.a_raw.rows()) + " nodes)");
  }
  const auto idx = adj.a_raw.row_indices(v);
  return IndexSet(idx.begin(), idx.end());
}

SplitIndices merge_train_val(const SplitIndices& splits) {
  if (!set_intersection(splits.train, splits.val).empty()) {
    throw ValidationError("merge_train_val: train and val overlap");
  }
  SplitIndices out = splits;
  out.labeled = set_union(splits.train, splits.val);
  out.unlearning.clear();
  out.retained = out.labeled;
  return out;
}

SplitIndices sample_unlearning_set(const SplitIndices& splits, double fraction, Rng& rng) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ValidationError("sample_unlearning_set: fraction " + std::to_string(fraction) +
                          " outside (0, 1)");
  }
  if (splits.labeled.empty()) {
    throw ValidationError("sample_unlearning_set: labeled set is empty");
  }
  const auto count = static_cast<std::size_t>(
      std::round(fraction * static_cast<double>(splits.labeled.size())));
  IndexSet pool = splits.labeled;
  // Partial Fisher-Yates: the first `count` slots are a uniform sample.
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.uniform_index(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  IndexSet forget(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(forget.begin(), forget.end());
  return with_unlearning_set(splits, std::move(forget));
}

SplitIndices with_unlearning_set(const SplitIndices& splits, IndexSet unlearning) {
  if (!is_sorted_unique(unlearning)) {
    std::sort(unlearning.begin(), unlearning.end());
    unlearning.erase(std::unique(unlearning.begin(), unlearning.end()), unlearning.end());
  }
  if (!set_difference(unlearning, splits.labeled).empty()) {
    throw ValidationError("unlearning set contains nodes outside the labeled set");
  }
  SplitIndices out = splits;
  out.retained = set_difference(splits.labeled, unlearning);
  out.unlearning = std::move(unlearning);
  return out;
}

}  // namespace gunlearn
