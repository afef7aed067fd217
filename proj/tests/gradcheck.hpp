#pragma once

// Central finite-difference check of the analytic model gradients.

#include <algorithm>
#include <cmath>

#include "gunlearn/model.hpp"
#include "support.hpp"

namespace testing {

struct GradCheckInstance {
  Graph graph;
  NormalizedAdjacency adj;
  ModelParams params;
  DenseMatrix targets;
  IndexSet mask;
  bool soft = false;
};

/// Random instance with <= 10 nodes, H <= 8, C <= 4.
inline GradCheckInstance random_gradcheck_instance(Rng& rng, Architecture arch, bool soft) {
  GradCheckInstance inst;
  const std::size_t n = 2 + rng.uniform_index(9);
  const std::size_t f = 1 + rng.uniform_index(5);
  const std::size_t c = 2 + rng.uniform_index(3);
  inst.graph = random_graph(n, rng.uniform(0.1, 0.6), c, f, rng);
  inst.adj = build_adjacency(inst.graph);
  ModelConfig config;
  config.architecture = arch;
  config.hidden_dim = 1 + rng.uniform_index(8);
  config.sgc_hops = 1 + rng.uniform_index(3);
  inst.params = init_params(config, f, c, rng);
  for (auto& w : inst.params.weights)
    for (double& x : w.data()) x *= 2.0;
  for (NodeIndex v = 0; v < n; ++v)
    if (rng.uniform() < 0.6) inst.mask.push_back(v);
  if (inst.mask.empty()) inst.mask.push_back(rng.uniform_index(n));
  inst.soft = soft;
  inst.targets = DenseMatrix(n, c);
  for (NodeIndex v = 0; v < n; ++v) {
    if (soft) {
      DenseMatrix logits(1, c);
      for (double& x : logits.data()) x = rng.uniform(-2.0, 2.0);
      const auto p = softmax_rows(logits);
      for (std::size_t k = 0; k < c; ++k) inst.targets(v, k) = p(0, k);
    } else {
      inst.targets(v, static_cast<std::size_t>(inst.graph.labels[v])) = 1.0;
    }
  }
  return inst;
}

/// |a - n| / max(|a|, |n|), with the denominator floored at `floor` so that
/// entries that are zero up to rounding compare absolutely.
inline double gradient_relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Worst relative error over every weight entry, central differences with
/// step `h`.
inline double max_gradient_error(const GradCheckInstance& inst, double h = 1e-6) {
  const GraphTensors g(inst.adj, inst.graph.features);
  const auto cache = forward(g, inst.params);
  const auto grads = backward(cache, g, inst.params, inst.targets, inst.mask);
  ModelParams probe = inst.params;
  auto loss_at = [&] {
    return masked_cross_entropy(forward(g, probe).posteriors, inst.targets, inst.mask);
  };
  double worst = 0.0;
  for (std::size_t b = 0; b < probe.weights.size(); ++b) {
    auto w = probe.weights[b].data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double orig = w[i];
      w[i] = orig + h;
      const double up = loss_at();
      w[i] = orig - h;
      const double down = loss_at();
      w[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      worst = std::max(worst, gradient_relative_error(grads[b].data()[i], numeric));
    }
  }
  return worst;
}

}  // namespace testing
