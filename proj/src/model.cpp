#include "gunlearn/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "gunlearn/error.hpp"

namespace gunlearn {

std::string to_string(Architecture arch) {
  return arch == Architecture::GCN ? "gcn" : "sgc";
}

Architecture parse_architecture(const std::string& name) {
  std::string lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "gcn") return Architecture::GCN;
  if (lower == "sgc") return Architecture::SGC;
  throw ValidationError("unknown architecture '" + name + "' (expected gcn or sgc)");
}

void ModelConfig::validate() const {
  if (architecture == Architecture::GCN && hidden_dim < 1) {
    throw ValidationError("model config: hidden_dim must be >= 1");
  }
  if (architecture == Architecture::SGC && sgc_hops < 1) {
    throw ValidationError("model config: sgc_hops must be >= 1");
  }
  if (max_epochs < 1) throw ValidationError("model config: max_epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ValidationError("model config: learning_rate must be > 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ValidationError("model config: dropout must be in [0, 1)");
  }
  if (!(weight_decay >= 0.0)) throw ValidationError("model config: weight_decay must be >= 0");
}

bool ModelParams::all_finite() const {
  return std::all_of(weights.begin(), weights.end(),
                     [](const DenseMatrix& w) { return w.all_finite(); });
}

ModelParams init_params(const ModelConfig& config, std::size_t num_features,
                        std::size_t num_classes, Rng& rng) {
  config.validate();
  ModelParams p;
  p.architecture = config.architecture;
  p.sgc_hops = config.sgc_hops;
  if (config.architecture == Architecture::GCN) {
    p.weights.push_back(glorot_init(num_features, config.hidden_dim, rng));
    p.weights.push_back(glorot_init(config.hidden_dim, num_classes, rng));
  } else {
    p.weights.push_back(glorot_init(num_features, num_classes, rng));
  }
  return p;
}

GraphTensors::GraphTensors(const NormalizedAdjacency& a, const DenseMatrix& x)
    : GraphTensors(a, SparseMatrix::from_dense(x)) {}

GraphTensors::GraphTensors(const NormalizedAdjacency& a, SparseMatrix x)
    : adj(&a), features(std::move(x)) {
  if (features.rows() != a.num_nodes()) {
    throw ShapeError("graph tensors: " + std::to_string(features.rows()) +
                     " feature rows for " + std::to_string(a.num_nodes()) + " nodes");
  }
}

// ---------------------------------------------------------------------------
// Forward

namespace {

void expect_blocks(const ModelParams& params, Architecture arch, std::size_t count) {
  if (params.architecture != arch || params.weights.size() != count) {
    throw ShapeError("model parameters do not match the " + to_string(arch) + " architecture");
  }
}

}  // namespace

ForwardCache gcn_forward(const GraphTensors& g, const ModelParams& params) {
  expect_blocks(params, Architecture::GCN, 2);
  return forward(g, params);
}

ForwardCache sgc_forward(const GraphTensors& g, const ModelParams& params) {
  expect_blocks(params, Architecture::SGC, 1);
  return forward(g, params);
}

ForwardCache forward(const GraphTensors& g, const ModelParams& params, double dropout,
                     Rng* dropout_rng) {
  ForwardCache cache;
  const auto& a_hat = g.adj->a_hat;
  if (params.architecture == Architecture::GCN) {
    expect_blocks(params, Architecture::GCN, 2);
    const auto& w0 = params.weights[0];
    const auto& w1 = params.weights[1];
    cache.pre_hidden = spmm(a_hat, spmm(g.features, w0));
    cache.hidden = relu(cache.pre_hidden);
    if (dropout > 0.0 && dropout_rng != nullptr) {
      cache.dropout_mask = DenseMatrix(cache.hidden.rows(), cache.hidden.cols());
      const double keep = 1.0 / (1.0 - dropout);
      auto mask = cache.dropout_mask.data();
      auto h = cache.hidden.data();
      for (std::size_t i = 0; i < h.size(); ++i) {
        mask[i] = dropout_rng->uniform() < dropout ? 0.0 : keep;
        h[i] *= mask[i];
      }
    }
    cache.logits = spmm(a_hat, matmul(cache.hidden, w1));
  } else {
    expect_blocks(params, Architecture::SGC, 1);
    if (params.sgc_hops < 1) throw ValidationError("sgc: hops must be >= 1");
    // A_hat^K (X W) == (A_hat^K X) W, and propagating C columns is cheaper.
    DenseMatrix z = spmm(g.features, params.weights[0]);
    for (std::size_t k = 0; k < params.sgc_hops; ++k) z = spmm(a_hat, z);
    cache.logits = std::move(z);
  }
  cache.posteriors = softmax_rows(cache.logits);
  return cache;
}

// ---------------------------------------------------------------------------
// Loss

namespace {

void check_mask(const IndexSet& mask, std::size_t rows) {
  if (mask.empty()) throw ValidationError("cross-entropy: empty mask");
  for (NodeIndex v : mask) {
    if (v >= rows) {
      throw IndexError("cross-entropy: mask node " + std::to_string(v) + " outside " +
                       std::to_string(rows) + " rows");
    }
  }
}

void check_targets(const DenseMatrix& posteriors, const DenseMatrix& targets,
                   const IndexSet& mask) {
  if (targets.rows() != posteriors.rows() || targets.cols() != posteriors.cols()) {
    throw ShapeError("cross-entropy: targets and posteriors differ in shape");
  }
  check_mask(mask, posteriors.rows());
  for (NodeIndex v : mask) {
    const auto t = targets.row(v);
    const double total = std::accumulate(t.begin(), t.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-9) {
      throw ValidationError("cross-entropy: target row " + std::to_string(v) + " sums to " +
                            std::to_string(total));
    }
  }
}

}  // namespace

double masked_cross_entropy(const DenseMatrix& posteriors, const DenseMatrix& targets,
                            const IndexSet& mask) {
  check_targets(posteriors, targets, mask);
  double total = 0.0;
  for (NodeIndex v : mask) {
    const auto z = posteriors.row(v);
    const auto t = targets.row(v);
    for (std::size_t f = 0; f < z.size(); ++f) {
      if (t[f] != 0.0) total -= t[f] * std::log(z[f] + kLogGuard);
    }
  }
  return total / static_cast<double>(mask.size());
}

double masked_cross_entropy(const DenseMatrix& posteriors, const TargetDistribution& targets,
                            const IndexSet& mask) {
  for (NodeIndex v : mask) {
    if (!targets.has(v)) {
      throw ValidationError("cross-entropy: mask node " + std::to_string(v) + " has no target");
    }
  }
  return masked_cross_entropy(posteriors, targets.dense(posteriors.rows()), mask);
}

// ---------------------------------------------------------------------------
// Backward

namespace {

/// d loss / d logits: (Z - T) / |mask| on masked rows, zero elsewhere.
DenseMatrix logit_gradient(const ForwardCache& cache, const DenseMatrix& targets,
                           const IndexSet& mask) {
  check_targets(cache.posteriors, targets, mask);
  DenseMatrix grad(cache.posteriors.rows(), cache.posteriors.cols());
  const double scale = 1.0 / static_cast<double>(mask.size());
  for (NodeIndex v : mask) {
    const auto z = cache.posteriors.row(v);
    const auto t = targets.row(v);
    auto g = grad.row(v);
    for (std::size_t f = 0; f < g.size(); ++f) g[f] = (z[f] - t[f]) * scale;
  }
  return grad;
}

}  // namespace

std::vector<DenseMatrix> gcn_backward(const ForwardCache& cache, const GraphTensors& g,
                                      const ModelParams& params, const DenseMatrix& targets,
                                      const IndexSet& mask) {
  expect_blocks(params, Architecture::GCN, 2);
  const auto& w1 = params.weights[1];
  if (cache.hidden.rows() != g.num_nodes() || cache.hidden.cols() != w1.rows() ||
      cache.posteriors.cols() != w1.cols()) {
    throw ShapeError("gcn_backward: cache does not match parameters");
  }
  const auto& a_hat = g.adj->a_hat;
  const DenseMatrix d_logits = logit_gradient(cache, targets, mask);
  const DenseMatrix d_hw1 = spmm_transposed(a_hat, d_logits);
  DenseMatrix d_w1 = matmul_tn(cache.hidden, d_hw1);
  DenseMatrix d_pre = matmul_nt(d_hw1, w1);
  auto dp = d_pre.data();
  const auto pre = cache.pre_hidden.data();
  const bool dropped = !cache.dropout_mask.empty();
  for (std::size_t i = 0; i < dp.size(); ++i) {
    if (pre[i] <= 0.0) {
      dp[i] = 0.0;
    } else if (dropped) {
      dp[i] *= cache.dropout_mask.data()[i];
    }
  }
  const DenseMatrix d_xw0 = spmm_transposed(a_hat, d_pre);
  DenseMatrix d_w0 = spmm_transposed(g.features, d_xw0);
  std::vector<DenseMatrix> grads;
  grads.push_back(std::move(d_w0));
  grads.push_back(std::move(d_w1));
  return grads;
}

std::vector<DenseMatrix> sgc_backward(const ForwardCache& cache, const GraphTensors& g,
                                      const ModelParams& params, const DenseMatrix& targets,
                                      const IndexSet& mask) {
  expect_blocks(params, Architecture::SGC, 1);
  if (cache.posteriors.rows() != g.num_nodes() ||
      cache.posteriors.cols() != params.weights[0].cols()) {
    throw ShapeError("sgc_backward: cache does not match parameters");
  }
  DenseMatrix d = logit_gradient(cache, targets, mask);
  for (std::size_t k = 0; k < params.sgc_hops; ++k) d = spmm_transposed(g.adj->a_hat, d);
  std::vector<DenseMatrix> grads;
  grads.push_back(spmm_transposed(g.features, d));
  return grads;
}

std::vector<DenseMatrix> backward(const ForwardCache& cache, const GraphTensors& g,
                                  const ModelParams& params, const DenseMatrix& targets,
                                  const IndexSet& mask) {
  return params.architecture == Architecture::GCN
             ? gcn_backward(cache, g, params, targets, mask)
             : sgc_backward(cache, g, params, targets, mask);
}

// ---------------------------------------------------------------------------
// Optimization

namespace {

bool has_converged(const std::vector<double>& history, const Convergence& c) {
  const std::size_t w = c.window;
  if (history.size() < w + 1) return false;
  const auto end = history.end();
  const double current = std::accumulate(end - static_cast<std::ptrdiff_t>(w), end, 0.0) /
                         static_cast<double>(w);
  const double previous =
      std::accumulate(end - static_cast<std::ptrdiff_t>(w + 1), end - 1, 0.0) /
      static_cast<double>(w);
  const double scale = std::max(std::abs(previous), 1e-12);
  return std::abs(current - previous) / scale < c.tolerance;
}

}  // namespace

TrainReport optimize(ModelParams& params, const GraphTensors& g, const DenseMatrix& targets,
                     const IndexSet& mask, const OptimizeOptions& options, Rng& rng) {
  if (mask.empty()) throw ValidationError("optimize: empty label mask");
  if (options.max_epochs < 1) throw ValidationError("optimize: max_epochs must be >= 1");
  if (!(options.learning_rate > 0.0)) {
    throw ValidationError("optimize: learning_rate must be > 0");
  }
  if (options.convergence &&
      (options.convergence->window < 2 || !(options.convergence->tolerance > 0.0))) {
    throw ValidationError("optimize: convergence window must be >= 2 and tolerance > 0");
  }

  TrainReport report;
  report.loss_history.reserve(options.max_epochs);
  AdamHyper hyper;
  hyper.learning_rate = options.learning_rate;
  AdamState state = AdamState::for_params(params.weights, hyper);
  ModelParams last_finite = params;
  Rng dropout_rng = rng.derive(0xD20);

  const auto start = std::chrono::steady_clock::now();
  for (std::size_t epoch = 0; epoch < options.max_epochs; ++epoch) {
    const ForwardCache cache = forward(g, params, options.dropout, &dropout_rng);
    const double loss = masked_cross_entropy(cache.posteriors, targets, mask);
    std::vector<DenseMatrix> grads;
    bool finite = std::isfinite(loss);
    if (finite) {
      grads = backward(cache, g, params, targets, mask);
      for (std::size_t b = 0; b < grads.size(); ++b) {
        auto gd = grads[b].data();
        const auto w = params.weights[b].data();
        if (options.weight_decay > 0.0) {
          for (std::size_t i = 0; i < gd.size(); ++i) gd[i] += options.weight_decay * w[i];
        }
        if (options.ascent) {
          for (double& v : gd) v = -v;
        }
        finite = finite && grads[b].all_finite();
      }
    }
    if (!finite) {
      if (!options.tolerate_divergence) {
        throw NumericError("optimization diverged at epoch " + std::to_string(epoch),
                           static_cast<long>(epoch));
      }
      params = last_finite;
      report.diverged = true;
      report.divergence_epoch = static_cast<long>(epoch);
      break;
    }
    report.loss_history.push_back(loss);
    last_finite = params;
    adam_step(params.weights, grads, state);
    report.epochs_run = epoch + 1;
    if (!params.all_finite()) {
      if (!options.tolerate_divergence) {
        throw NumericError("parameters became non-finite at epoch " + std::to_string(epoch),
                           static_cast<long>(epoch));
      }
      params = last_finite;
      report.diverged = true;
      report.divergence_epoch = static_cast<long>(epoch);
      break;
    }
    if (options.convergence && has_converged(report.loss_history, *options.convergence)) {
      report.converged = true;
      break;
    }
  }
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report.final_loss = report.loss_history.empty() ? 0.0 : report.loss_history.back();
  return report;
}

TrainResult train(const Graph& graph, const NormalizedAdjacency& adj, const ModelConfig& config,
                  Rng& rng, const IndexSet& label_mask, const TargetDistribution& targets) {
  const GraphTensors g(adj, graph.features);
  return train(graph, g, config, rng, label_mask, targets);
}

TrainResult train(const Graph& graph, const GraphTensors& g, const ModelConfig& config,
                  Rng& rng, const IndexSet& label_mask, const TargetDistribution& targets) {
  config.validate();
  if (label_mask.empty()) throw ValidationError("train: empty label mask");
  TrainResult result;
  Rng init_rng = rng.derive(0x1417);
  result.params = init_params(config, graph.num_features(), graph.num_classes, init_rng);
  OptimizeOptions opts;
  opts.learning_rate = config.learning_rate;
  opts.max_epochs = config.max_epochs;
  opts.dropout = config.dropout;
  opts.weight_decay = config.weight_decay;
  Rng opt_rng = rng.derive(0x0971);
  const DenseMatrix dense_targets = targets.dense(graph.num_nodes);
  result.report = optimize(result.params, g, dense_targets, label_mask, opts, opt_rng);
  return result;
}

// ---------------------------------------------------------------------------
// Metrics

std::vector<int> predictions(const DenseMatrix& posteriors) {
  std::vector<int> out(posteriors.rows(), 0);
  for (std::size_t r = 0; r < posteriors.rows(); ++r) {
    const auto row = posteriors.row(r);
    // max_element returns the first maximum, i.e. the lowest class on ties.
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

double accuracy(const DenseMatrix& posteriors, std::span<const int> labels,
                const IndexSet& idx) {
  if (idx.empty()) throw ValidationError("accuracy: empty index set");
  std::size_t correct = 0;
  for (NodeIndex v : idx) {
    if (v >= posteriors.rows() || v >= labels.size()) {
      throw IndexError("accuracy: node " + std::to_string(v) + " out of range");
    }
    const auto row = posteriors.row(v);
    const auto pred = std::max_element(row.begin(), row.end()) - row.begin();
    if (pred == labels[v]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(idx.size());
}

}  // namespace gunlearn
