#pragma once

// Posterior-based membership inference, used as the forgetting yardstick: a
// forgotten node should look like a node the model never trained on.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gunlearn/graph.hpp"
#include "gunlearn/numerics.hpp"

namespace gunlearn::mia {

struct AttackFeatures {
  std::vector<double> sorted_posterior;  // descending
  double entropy = 0.0;
  double truth_probability = 0.0;
  double loss = 0.0;  // -ln(p_truth + 1e-12)

  std::vector<double> as_vector() const;
};

std::vector<AttackFeatures> extract_features(const DenseMatrix& posteriors,
                                             std::span<const int> labels, const IndexSet& idx);

/// Logistic classifier over standardized attack features. Positive score
/// means "member".
struct AttackModel {
  std::vector<double> weights;
  double bias = 0.0;
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;
  std::size_t epochs = 0;
  double train_accuracy = 0.0;

  double member_probability(const AttackFeatures& f) const;
  bool predicts_member(const AttackFeatures& f) const { return member_probability(f) > 0.5; }

  /// Constant-output model, handy as an evaluation oracle.
  static AttackModel constant(bool member, std::size_t num_features);
};

struct AttackTrainConfig {
  std::size_t epochs = 500;
  double learning_rate = 0.05;
};

/// Fits the attack on members vs non-members after resampling the smaller
/// group up to the size of the larger one. Throws ValidationError when a
/// group is empty.
AttackModel train_attack(const std::vector<AttackFeatures>& members,
                         const std::vector<AttackFeatures>& nonmembers, Rng& rng,
                         const AttackTrainConfig& config = {});

/// Disjoint node groups for fitting and scoring the attack. Retained and test
/// nodes are each split in half; every forgotten node is scored.
struct AttackSplit {
  IndexSet member_train;     // retained, fit
  IndexSet member_eval;      // retained, scored
  IndexSet nonmember_train;  // test, fit
  IndexSet nonmember_eval;   // test, scored
  IndexSet unlearning;       // scored as non-members

  /// Throws ValidationError if any fit group overlaps any scored group.
  void validate() const;
};

AttackSplit make_attack_split(const SplitIndices& splits, Rng& rng);

struct GroupCounts {
  std::size_t size = 0;
  std::size_t predicted_member = 0;
};

struct MiaReport {
  double all_node_accuracy = 0.0;
  /// Fraction of forgotten nodes predicted non-member.
  double unlearning_node_accuracy = 0.0;
  GroupCounts retained_eval;
  GroupCounts test_eval;
  GroupCounts unlearning;

  std::string to_json() const;
};

MiaReport evaluate_mia(const AttackModel& model, const DenseMatrix& posteriors,
                       std::span<const int> labels, const AttackSplit& split);

/// Split, fit on the same posteriors, and score.
MiaReport run_mia(const DenseMatrix& posteriors, std::span<const int> labels,
                  const SplitIndices& splits, Rng& rng, const AttackTrainConfig& config = {});

/// node,label,group,p0..p{C-1} rows for external plotting.
void write_posteriors_csv(const std::string& path, const DenseMatrix& posteriors,
                          std::span<const int> labels, const SplitIndices& splits);

}  // namespace gunlearn::mia
