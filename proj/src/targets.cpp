#include "gunlearn/targets.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "gunlearn/error.hpp"

namespace gunlearn {

TargetDistribution TargetDistribution::one_hot(std::span<const int> labels,
                                               const IndexSet& nodes,
                                               std::size_t num_classes) {
  TargetDistribution t(num_classes);
  for (NodeIndex v : nodes) {
    if (v >= labels.size()) {
      throw IndexError("targets: node " + std::to_string(v) + " has no label");
    }
    t.set_one_hot(v, labels[v]);
  }
  return t;
}

void TargetDistribution::set_one_hot(NodeIndex v, int cls) {
  if (cls < 0 || static_cast<std::size_t>(cls) >= num_classes_) {
    throw ValidationError("targets: class " + std::to_string(cls) + " for node " +
                          std::to_string(v) + " outside [0, " + std::to_string(num_classes_) +
                          ")");
  }
  targets_[v] = OneHot{cls};
}

void TargetDistribution::set_soft(NodeIndex v, std::vector<double> probs) {
  if (probs.size() != num_classes_) {
    throw ShapeError("targets: soft target for node " + std::to_string(v) + " has " +
                     std::to_string(probs.size()) + " entries, expected " +
                     std::to_string(num_classes_));
  }
  double total = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) {
      throw ValidationError("targets: soft target for node " + std::to_string(v) +
                            " has a negative or non-finite entry");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ValidationError("targets: soft target for node " + std::to_string(v) + " sums to " +
                          std::to_string(total));
  }
  targets_[v] = Soft{std::move(probs)};
}

bool TargetDistribution::is_soft(NodeIndex v) const {
  return std::holds_alternative<Soft>(at(v));
}

const TargetDistribution::Target& TargetDistribution::at(NodeIndex v) const {
  const auto it = targets_.find(v);
  if (it == targets_.end()) {
    throw IndexError("targets: node " + std::to_string(v) + " has no target");
  }
  return it->second;
}

std::vector<double> TargetDistribution::distribution(NodeIndex v) const {
  const auto& t = at(v);
  if (const auto* soft = std::get_if<Soft>(&t)) return soft->probs;
  std::vector<double> out(num_classes_, 0.0);
  out[static_cast<std::size_t>(std::get<OneHot>(t).cls)] = 1.0;
  return out;
}

IndexSet TargetDistribution::nodes() const {
  IndexSet out;
  out.reserve(targets_.size());
  for (const auto& [v, _] : targets_) out.push_back(v);
  return out;
}

IndexSet TargetDistribution::soft_nodes() const {
  IndexSet out;
  for (const auto& [v, t] : targets_)
    if (std::holds_alternative<Soft>(t)) out.push_back(v);
  return out;
}

DenseMatrix TargetDistribution::dense(std::size_t num_nodes) const {
  DenseMatrix out(num_nodes, num_classes_);
  for (const auto& [v, t] : targets_) {
    if (v >= num_nodes) {
      throw IndexError("targets: node " + std::to_string(v) + " outside " +
                       std::to_string(num_nodes) + " nodes");
    }
    auto row = out.row(v);
    if (const auto* soft = std::get_if<Soft>(&t)) {
      std::copy(soft->probs.begin(), soft->probs.end(), row.begin());
    } else {
      row[static_cast<std::size_t>(std::get<OneHot>(t).cls)] = 1.0;
    }
  }
  return out;
}

}  // namespace gunlearn
