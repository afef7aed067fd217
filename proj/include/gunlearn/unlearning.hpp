#pragma once

// Node unlearning by target replacement and fine-tuning.
//
// Each method swaps the one-hot label of every forgotten node for a soft
// target derived from the original model's posteriors, then fine-tunes the
// original parameters on the full labeled set:
//
//   CLR    mean test-set posterior of the node's class
//   TNMPP  mean posterior of all 1-hop neighbors
//   CNNF   mean posterior of same-class neighbors outside the labeled set,
//          falling back to the CLR class mean when none exist
//
// NAIVE (gradient ascent on the forgotten nodes) and RETRAIN (from scratch on
// the retained nodes) are the reference baselines.

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "gunlearn/graph.hpp"
#include "gunlearn/model.hpp"
#include "gunlearn/numerics.hpp"
#include "gunlearn/targets.hpp"

namespace gunlearn {

enum class Method { CLR, TNMPP, CNNF, NAIVE, RETRAIN };

std::string to_string(Method method);
/// Case-insensitive; throws ValidationError for unknown names.
Method parse_method(const std::string& name);
bool is_fine_tune_method(Method method);

/// Per-class mean posterior over test nodes of that ground-truth class.
struct ClassMeanTable {
  DenseMatrix means;                 // C x C
  std::vector<std::size_t> support;  // test nodes per class

  bool valid(int cls) const {
    return cls >= 0 && static_cast<std::size_t>(cls) < support.size() &&
           support[static_cast<std::size_t>(cls)] > 0;
  }
  /// Throws UnsupportedClassError when the class has no support.
  std::vector<double> row(int cls) const;
};

ClassMeanTable class_mean_posteriors(const DenseMatrix& posteriors, std::span<const int> labels,
                                     const IndexSet& test_idx, std::size_t num_classes);

/// Replaces each forgotten node's target with its class row of `table`.
TargetDistribution clr_targets(std::span<const int> labels, const SplitIndices& splits,
                               const ClassMeanTable& table, std::size_t num_classes);

/// Replaces each forgotten node's target with the mean posterior of its raw
/// neighbors (training neighbors included). Isolated nodes use the class mean.
TargetDistribution tnmpp_targets(const NormalizedAdjacency& adj, const DenseMatrix& posteriors,
                                 std::span<const int> labels, const SplitIndices& splits,
                                 const ClassMeanTable& fallback);

/// Neighbors u of v with u outside `splits.labeled` and labels[u] == labels[v].
IndexSet cnnf_neighbors(const NormalizedAdjacency& adj, std::span<const int> labels,
                        const SplitIndices& splits, NodeIndex v);

TargetDistribution cnnf_targets(const NormalizedAdjacency& adj, const DenseMatrix& posteriors,
                                std::span<const int> labels, const SplitIndices& splits,
                                const ClassMeanTable& table);

struct FineTuneConfig {
  double learning_rate = 0.001;
  std::size_t max_epochs = 200;
  std::size_t window = 10;
  double tolerance = 1e-4;

  void validate() const;
  Convergence convergence() const { return {window, tolerance}; }
};

struct Provenance {
  std::string dataset;
  double fraction = 0.0;
  std::uint64_t seed = 0;
  IndexSet unlearning;
  std::optional<std::string> parent_checkpoint;
};

struct UnlearningResult {
  Method method = Method::CLR;
  ModelParams params;
  TrainReport report;
  Provenance provenance;
};

/// Fine-tunes from `params_org` on `labeled_idx` with `targets`.
UnlearningResult fine_tune(Method method, const ModelParams& params_org, const GraphTensors& g,
                           const TargetDistribution& targets, const IndexSet& labeled_idx,
                           const FineTuneConfig& config, Rng& rng);

/// Gradient ascent on the one-hot loss of `unlearning_idx`. Divergence is
/// reported in the result, keeping the last finite parameters.
UnlearningResult naive_unlearn(const ModelParams& params_org, const GraphTensors& g,
                               std::span<const int> labels, const IndexSet& unlearning_idx,
                               const FineTuneConfig& config, Rng& rng);

/// Fresh model trained on the retained one-hot labels only.
UnlearningResult retrain(const Graph& graph, const GraphTensors& g, const SplitIndices& splits,
                         const ModelConfig& config, Rng& rng);

/// Replacement targets for a fine-tuning method, computed from frozen
/// original posteriors.
TargetDistribution replacement_targets(Method method, const Graph& graph,
                                       const NormalizedAdjacency& adj,
                                       const DenseMatrix& org_posteriors,
                                       const SplitIndices& splits);

/// Runs any method end to end. `org_posteriors` must come from `params_org`.
UnlearningResult run_unlearning(Method method, const Graph& graph, const GraphTensors& g,
                                const SplitIndices& splits, const ModelParams& params_org,
                                const DenseMatrix& org_posteriors, const ModelConfig& model_config,
                                const FineTuneConfig& ft_config, Rng& rng);

/// Writes `<path>` (checkpoint) and `<path>.json` (provenance sidecar).
void save_unlearning_result(const std::string& path, const UnlearningResult& result);
/// Reads the provenance sidecar written by save_unlearning_result.
Provenance load_provenance(const std::string& sidecar_path);

}  // namespace gunlearn
