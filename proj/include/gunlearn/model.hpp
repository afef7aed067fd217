#pragma once

// Two-layer GCN and SGC node classifiers with hand-written backpropagation.
//
//   GCN: Z = softmax(A_hat * relu(A_hat * X * W0) * W1)
//   SGC: Z = softmax(A_hat^K * X * W)
//
// Loss is the mean cross-entropy over a node mask against (possibly soft)
// target rows.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gunlearn/graph.hpp"
#include "gunlearn/numerics.hpp"
#include "gunlearn/targets.hpp"

namespace gunlearn {

enum class Architecture { GCN, SGC };

std::string to_string(Architecture arch);
/// Accepts "gcn" / "sgc" (case-insensitive). Throws ValidationError.
Architecture parse_architecture(const std::string& name);

struct ModelConfig {
  Architecture architecture = Architecture::GCN;
  std::size_t hidden_dim = 16;  // GCN only
  std::size_t sgc_hops = 2;     // SGC only
  double learning_rate = 0.001;
  std::size_t max_epochs = 1600;
  std::uint64_t seed = 0;
  // Both off by default; training is then fully deterministic given the seed.
  double dropout = 0.0;  // GCN hidden layer
  double weight_decay = 0.0;

  void validate() const;
};

/// Weight blocks in declaration order: GCN {W0, W1}, SGC {W}.
struct ModelParams {
  Architecture architecture = Architecture::GCN;
  std::size_t sgc_hops = 2;
  std::vector<DenseMatrix> weights;

  std::size_t num_features() const { return weights.front().rows(); }
  std::size_t num_classes() const { return weights.back().cols(); }
  std::size_t hidden_dim() const {
    return architecture == Architecture::GCN ? weights.front().cols() : 0;
  }
  bool all_finite() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Fresh Glorot-initialized parameters.
ModelParams init_params(const ModelConfig& config, std::size_t num_features,
                        std::size_t num_classes, Rng& rng);

/// Graph-side operands shared by every forward/backward call.
struct GraphTensors {
  const NormalizedAdjacency* adj = nullptr;
  SparseMatrix features;

  GraphTensors(const NormalizedAdjacency& a, const DenseMatrix& x);
  GraphTensors(const NormalizedAdjacency& a, SparseMatrix x);
  std::size_t num_nodes() const { return adj->num_nodes(); }
};

struct ForwardCache {
  DenseMatrix pre_hidden;  // A_hat X W0          (GCN)
  DenseMatrix hidden;      // relu(pre_hidden) with dropout applied (GCN)
  DenseMatrix dropout_mask;  // empty when dropout is off
  DenseMatrix logits;
  DenseMatrix posteriors;
};

ForwardCache gcn_forward(const GraphTensors& g, const ModelParams& params);
ForwardCache sgc_forward(const GraphTensors& g, const ModelParams& params);
/// Dispatches on the architecture. `dropout_rng` enables training-mode dropout.
ForwardCache forward(const GraphTensors& g, const ModelParams& params, double dropout = 0.0,
                     Rng* dropout_rng = nullptr);

inline constexpr double kLogGuard = 1e-12;

/// Mean over `mask` of -sum_f target_f * ln(Z_f + 1e-12). `targets` holds one
/// row per node. Throws ValidationError on an empty mask.
double masked_cross_entropy(const DenseMatrix& posteriors, const DenseMatrix& targets,
                            const IndexSet& mask);
double masked_cross_entropy(const DenseMatrix& posteriors, const TargetDistribution& targets,
                            const IndexSet& mask);

/// Gradient of masked_cross_entropy w.r.t. every weight block.
std::vector<DenseMatrix> gcn_backward(const ForwardCache& cache, const GraphTensors& g,
                                      const ModelParams& params, const DenseMatrix& targets,
                                      const IndexSet& mask);
std::vector<DenseMatrix> sgc_backward(const ForwardCache& cache, const GraphTensors& g,
                                      const ModelParams& params, const DenseMatrix& targets,
                                      const IndexSet& mask);
std::vector<DenseMatrix> backward(const ForwardCache& cache, const GraphTensors& g,
                                  const ModelParams& params, const DenseMatrix& targets,
                                  const IndexSet& mask);

struct TrainReport {
  std::size_t epochs_run = 0;
  double final_loss = 0.0;
  std::vector<double> loss_history;  // loss before each epoch's update
  double wall_time_seconds = 0.0;
  bool converged = false;
  bool diverged = false;
  long divergence_epoch = -1;
};

/// Stop when the trailing-window mean loss changes by less than `tolerance`
/// (relative) from one epoch to the next.
struct Convergence {
  std::size_t window = 10;
  double tolerance = 1e-4;
};

struct OptimizeOptions {
  double learning_rate = 0.001;
  std::size_t max_epochs = 1600;
  bool ascent = false;
  std::optional<Convergence> convergence;
  /// On a non-finite loss or gradient, keep the last finite parameters and
  /// report divergence instead of throwing.
  bool tolerate_divergence = false;
  double dropout = 0.0;
  double weight_decay = 0.0;
};

/// Full-batch Adam on masked_cross_entropy, updating `params` in place.
/// Throws NumericError (carrying the epoch) on divergence unless tolerated.
TrainReport optimize(ModelParams& params, const GraphTensors& g, const DenseMatrix& targets,
                     const IndexSet& mask, const OptimizeOptions& options, Rng& rng);

struct TrainResult {
  ModelParams params;
  TrainReport report;
};

/// Trains from a fresh initialization drawn from `rng` on `label_mask`.
TrainResult train(const Graph& graph, const NormalizedAdjacency& adj, const ModelConfig& config,
                  Rng& rng, const IndexSet& label_mask, const TargetDistribution& targets);
TrainResult train(const Graph& graph, const GraphTensors& g, const ModelConfig& config,
                  Rng& rng, const IndexSet& label_mask, const TargetDistribution& targets);

/// Fraction of `idx` whose arg-max posterior equals the label (ties go to the
/// lowest class).
double accuracy(const DenseMatrix& posteriors, std::span<const int> labels, const IndexSet& idx);

/// Arg-max per row, lowest index on ties.
std::vector<int> predictions(const DenseMatrix& posteriors);

// ---------------------------------------------------------------------------
// Checkpoints: one JSON header line, then little-endian float64 weight blocks.

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
};

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const CheckpointMeta& meta);
std::pair<ModelParams, CheckpointMeta> load_checkpoint(const std::string& path);

}  // namespace gunlearn
