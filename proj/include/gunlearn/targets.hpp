#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <variant>
#include <vector>

#include "gunlearn/graph.hpp"
#include "gunlearn/numerics.hpp"

namespace gunlearn {

/// Per-node training targets: a hard class or a probability vector.
class TargetDistribution {
 public:
  struct OneHot {
    int cls;
  };
  struct Soft {
    std::vector<double> probs;
  };
  using Target = std::variant<OneHot, Soft>;

  explicit TargetDistribution(std::size_t num_classes) : num_classes_(num_classes) {}

  /// One-hot targets for `nodes` taken from `labels`.
  static TargetDistribution one_hot(std::span<const int> labels, const IndexSet& nodes,
                                    std::size_t num_classes);

  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t size() const noexcept { return targets_.size(); }

  void set_one_hot(NodeIndex v, int cls);
  /// Throws ValidationError unless `probs` is a distribution (sum 1 +- 1e-9).
  void set_soft(NodeIndex v, std::vector<double> probs);

  bool has(NodeIndex v) const { return targets_.count(v) != 0; }
  bool is_soft(NodeIndex v) const;
  const Target& at(NodeIndex v) const;
  /// Target of `v` as a length-C probability vector.
  std::vector<double> distribution(NodeIndex v) const;

  IndexSet nodes() const;
  IndexSet soft_nodes() const;

  /// num_nodes x C matrix; rows of nodes without a target are zero.
  DenseMatrix dense(std::size_t num_nodes) const;

  const std::map<NodeIndex, Target>& entries() const noexcept { return targets_; }

 private:
  std::size_t num_classes_;
  std::map<NodeIndex, Target> targets_;
};

}  // namespace gunlearn
