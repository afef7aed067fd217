#include "gunlearn/unlearning.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "gunlearn/error.hpp"

namespace gunlearn {

std::string to_string(Method method) {
  switch (method) {
    case Method::CLR: return "clr";
    case Method::TNMPP: return "tnmpp";
    case Method::CNNF: return "cnnf";
    case Method::NAIVE: return "naive";
    case Method::RETRAIN: return "retrain";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  std::string lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (Method m : {Method::CLR, Method::TNMPP, Method::CNNF, Method::NAIVE, Method::RETRAIN}) {
    if (lower == to_string(m)) return m;
  }
  throw ValidationError("unknown unlearning method '" + name +
                        "' (expected clr, tnmpp, cnnf, naive or retrain)");
}

bool is_fine_tune_method(Method method) {
  return method == Method::CLR || method == Method::TNMPP || method == Method::CNNF;
}

// ---------------------------------------------------------------------------
// Target replacement

std::vector<double> ClassMeanTable::row(int cls) const {
  if (!valid(cls)) throw UnsupportedClassError(cls);
  const auto r = means.row(static_cast<std::size_t>(cls));
  return {r.begin(), r.end()};
}

ClassMeanTable class_mean_posteriors(const DenseMatrix& posteriors, std::span<const int> labels,
                                     const IndexSet& test_idx, std::size_t num_classes) {
  if (test_idx.empty()) throw ValidationError("class mean posteriors: empty test set");
  if (posteriors.cols() != num_classes) {
    throw ShapeError("class mean posteriors: posterior width differs from class count");
  }
  ClassMeanTable table{DenseMatrix(num_classes, num_classes),
                       std::vector<std::size_t>(num_classes, 0)};
  for (NodeIndex v : test_idx) {
    if (v >= posteriors.rows() || v >= labels.size()) {
      throw IndexError("class mean posteriors: test node " + std::to_string(v) +
                       " out of range");
    }
    const auto c = static_cast<std::size_t>(labels[v]);
    auto dst = table.means.row(c);
    const auto src = posteriors.row(v);
    for (std::size_t f = 0; f < num_classes; ++f) dst[f] += src[f];
    ++table.support[c];
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (table.support[c] == 0) continue;
    for (double& x : table.means.row(c)) x /= static_cast<double>(table.support[c]);
  }
  return table;
}

namespace {

TargetDistribution labeled_one_hot(std::span<const int> labels, const SplitIndices& splits,
                                   std::size_t num_classes) {
  return TargetDistribution::one_hot(labels, splits.labeled, num_classes);
}

std::vector<double> mean_posterior(const DenseMatrix& posteriors, const IndexSet& nodes) {
  std::vector<double> mean(posteriors.cols(), 0.0);
  for (NodeIndex u : nodes) {
    const auto src = posteriors.row(u);
    for (std::size_t f = 0; f < mean.size(); ++f) mean[f] += src[f];
  }
  for (double& x : mean) x /= static_cast<double>(nodes.size());
  return mean;
}

}  // namespace

TargetDistribution clr_targets(std::span<const int> labels, const SplitIndices& splits,
                               const ClassMeanTable& table, std::size_t num_classes) {
  auto targets = labeled_one_hot(labels, splits, num_classes);
  for (NodeIndex v : splits.unlearning) targets.set_soft(v, table.row(labels[v]));
  return targets;
}

TargetDistribution tnmpp_targets(const NormalizedAdjacency& adj, const DenseMatrix& posteriors,
                                 std::span<const int> labels, const SplitIndices& splits,
                                 const ClassMeanTable& fallback) {
  auto targets = labeled_one_hot(labels, splits, posteriors.cols());
  for (NodeIndex v : splits.unlearning) {
    const IndexSet nbrs = neighbors(adj, v);
    targets.set_soft(v, nbrs.empty() ? fallback.row(labels[v]) : mean_posterior(posteriors, nbrs));
  }
  return targets;
}

IndexSet cnnf_neighbors(const NormalizedAdjacency& adj, std::span<const int> labels,
                        const SplitIndices& splits, NodeIndex v) {
  IndexSet kept;
  for (NodeIndex u : neighbors(adj, v)) {
    if (!contains(splits.labeled, u) && labels[u] == labels[v]) kept.push_back(u);
  }
  return kept;
}

TargetDistribution cnnf_targets(const NormalizedAdjacency& adj, const DenseMatrix& posteriors,
                                std::span<const int> labels, const SplitIndices& splits,
                                const ClassMeanTable& table) {
  auto targets = labeled_one_hot(labels, splits, posteriors.cols());
  for (NodeIndex v : splits.unlearning) {
    const IndexSet kept = cnnf_neighbors(adj, labels, splits, v);
    targets.set_soft(v, kept.empty() ? table.row(labels[v]) : mean_posterior(posteriors, kept));
  }
  return targets;
}

TargetDistribution replacement_targets(Method method, const Graph& graph,
                                       const NormalizedAdjacency& adj,
                                       const DenseMatrix& org_posteriors,
                                       const SplitIndices& splits) {
  const auto table =
      class_mean_posteriors(org_posteriors, graph.labels, splits.test, graph.num_classes);
  switch (method) {
    case Method::CLR: return clr_targets(graph.labels, splits, table, graph.num_classes);
    case Method::TNMPP: return tnmpp_targets(adj, org_posteriors, graph.labels, splits, table);
    case Method::CNNF: return cnnf_targets(adj, org_posteriors, graph.labels, splits, table);
    default: break;
  }
  throw ValidationError("method " + to_string(method) + " does not replace targets");
}

// ---------------------------------------------------------------------------
// Fine-tuning and baselines

void FineTuneConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("fine-tune: learning_rate must be > 0");
  if (max_epochs < 1) throw ValidationError("fine-tune: max_epochs must be >= 1");
  if (window < 2) throw ValidationError("fine-tune: convergence window must be >= 2");
  if (!(tolerance > 0.0)) throw ValidationError("fine-tune: tolerance must be > 0");
}

UnlearningResult fine_tune(Method method, const ModelParams& params_org, const GraphTensors& g,
                           const TargetDistribution& targets, const IndexSet& labeled_idx,
                           const FineTuneConfig& config, Rng& rng) {
  config.validate();
  for (NodeIndex v : labeled_idx) {
    if (!targets.has(v)) {
      throw ValidationError("fine-tune: labeled node " + std::to_string(v) + " has no target");
    }
  }
  UnlearningResult result;
  result.method = method;
  result.params = params_org;
  OptimizeOptions opts;
  opts.learning_rate = config.learning_rate;
  opts.max_epochs = config.max_epochs;
  opts.convergence = config.convergence();
  result.report =
      optimize(result.params, g, targets.dense(g.num_nodes()), labeled_idx, opts, rng);
  return result;
}

UnlearningResult naive_unlearn(const ModelParams& params_org, const GraphTensors& g,
                               std::span<const int> labels, const IndexSet& unlearning_idx,
                               const FineTuneConfig& config, Rng& rng) {
  config.validate();
  if (unlearning_idx.empty()) throw ValidationError("naive unlearning: empty unlearning set");
  const auto targets = TargetDistribution::one_hot(labels, unlearning_idx,
                                                   params_org.num_classes());
  UnlearningResult result;
  result.method = Method::NAIVE;
  result.params = params_org;
  OptimizeOptions opts;
  opts.learning_rate = config.learning_rate;
  opts.max_epochs = config.max_epochs;
  opts.convergence = config.convergence();
  opts.ascent = true;
  opts.tolerate_divergence = true;
  result.report =
      optimize(result.params, g, targets.dense(g.num_nodes()), unlearning_idx, opts, rng);
  return result;
}

UnlearningResult retrain(const Graph& graph, const GraphTensors& g, const SplitIndices& splits,
                         const ModelConfig& config, Rng& rng) {
  if (splits.retained.empty()) throw ValidationError("retrain: retained set is empty");
  const auto targets =
      TargetDistribution::one_hot(graph.labels, splits.retained, graph.num_classes);
  auto trained = train(graph, g, config, rng, splits.retained, targets);
  UnlearningResult result;
  result.method = Method::RETRAIN;
  result.params = std::move(trained.params);
  result.report = std::move(trained.report);
  return result;
}

UnlearningResult run_unlearning(Method method, const Graph& graph, const GraphTensors& g,
                                const SplitIndices& splits, const ModelParams& params_org,
                                const DenseMatrix& org_posteriors, const ModelConfig& model_config,
                                const FineTuneConfig& ft_config, Rng& rng) {
  UnlearningResult result;
  switch (method) {
    case Method::RETRAIN:
      result = retrain(graph, g, splits, model_config, rng);
      break;
    case Method::NAIVE:
      result = naive_unlearn(params_org, g, graph.labels, splits.unlearning, ft_config, rng);
      break;
    default: {
      const auto targets = replacement_targets(method, graph, *g.adj, org_posteriors, splits);
      result = fine_tune(method, params_org, g, targets, splits.labeled, ft_config, rng);
    }
  }
  result.provenance.unlearning = splits.unlearning;
  return result;
}

// ---------------------------------------------------------------------------
// Persistence

void save_unlearning_result(const std::string& path, const UnlearningResult& result) {
  save_checkpoint(path, result.params,
                  {result.provenance.seed, result.report.epochs_run});
  nlohmann::json j;
  j["method"] = to_string(result.method);
  j["dataset"] = result.provenance.dataset;
  j["fraction"] = result.provenance.fraction;
  j["seed"] = result.provenance.seed;
  j["epochs_run"] = result.report.epochs_run;
  j["wall_time_seconds"] = result.report.wall_time_seconds;
  j["final_loss"] = result.report.final_loss;
  j["converged"] = result.report.converged;
  j["diverged"] = result.report.diverged;
  j["divergence_epoch"] = result.report.divergence_epoch;
  j["parent_checkpoint"] = result.provenance.parent_checkpoint
                               ? nlohmann::json(*result.provenance.parent_checkpoint)
                               : nlohmann::json(nullptr);
  j["unlearning"] = result.provenance.unlearning;
  std::ofstream out(path + ".json", std::ios::trunc);
  if (!out) throw IoError("cannot write provenance '" + path + ".json'");
  out << j.dump(2) << '\n';
}

Provenance load_provenance(const std::string& sidecar_path) {
  std::ifstream in(sidecar_path);
  if (!in) throw IoError("cannot open provenance '" + sidecar_path + "'");
  try {
    const auto j = nlohmann::json::parse(in);
    Provenance p;
    p.dataset = j.at("dataset").get<std::string>();
    p.fraction = j.at("fraction").get<double>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.unlearning = j.at("unlearning").get<IndexSet>();
    if (!j.at("parent_checkpoint").is_null()) {
      p.parent_checkpoint = j.at("parent_checkpoint").get<std::string>();
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed provenance '" + sidecar_path + "': " + e.what());
  }
}

}  // namespace gunlearn
