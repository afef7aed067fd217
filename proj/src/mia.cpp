#include "gunlearn/mia.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>

#include <json.hpp>

#include "gunlearn/error.hpp"
#include "gunlearn/model.hpp"

namespace gunlearn::mia {

std::vector<double> AttackFeatures::as_vector() const {
  std::vector<double> v = sorted_posterior;
  v.push_back(entropy);
  v.push_back(truth_probability);
  v.push_back(loss);
  return v;
}

std::vector<AttackFeatures> extract_features(const DenseMatrix& posteriors,
                                             std::span<const int> labels, const IndexSet& idx) {
  std::vector<AttackFeatures> out;
  out.reserve(idx.size());
  for (NodeIndex v : idx) {
    if (v >= posteriors.rows() || v >= labels.size()) {
      throw IndexError("attack features: node " + std::to_string(v) + " out of range");
    }
    const auto row = posteriors.row(v);
    AttackFeatures f;
    f.sorted_posterior.assign(row.begin(), row.end());
    std::sort(f.sorted_posterior.begin(), f.sorted_posterior.end(), std::greater<>());
    for (double p : row) {
      if (p > 0.0) f.entropy -= p * std::log(p);
    }
    f.truth_probability = row[static_cast<std::size_t>(labels[v])];
    f.loss = -std::log(f.truth_probability + kLogGuard);
    out.push_back(std::move(f));
  }
  return out;
}

// ---------------------------------------------------------------------------

double AttackModel::member_probability(const AttackFeatures& f) const {
  const auto x = f.as_vector();
  if (x.size() != weights.size()) {
    throw ShapeError("attack model expects " + std::to_string(weights.size()) +
                     " features, got " + std::to_string(x.size()));
  }
  double score = bias;
  for (std::size_t i = 0; i < x.size(); ++i) {
    score += weights[i] * (x[i] - feature_mean[i]) / feature_scale[i];
  }
  return 1.0 / (1.0 + std::exp(-score));
}

AttackModel AttackModel::constant(bool member, std::size_t num_features) {
  AttackModel m;
  m.weights.assign(num_features, 0.0);
  m.feature_mean.assign(num_features, 0.0);
  m.feature_scale.assign(num_features, 1.0);
  m.bias = member ? 1.0 : -1.0;
  return m;
}

AttackModel train_attack(const std::vector<AttackFeatures>& members,
                         const std::vector<AttackFeatures>& nonmembers, Rng& rng,
                         const AttackTrainConfig& config) {
  if (members.empty() || nonmembers.empty()) {
    throw ValidationError("train_attack: member and non-member groups must be non-empty");
  }
  // Balance by resampling the smaller group with replacement.
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  const std::size_t target = std::max(members.size(), nonmembers.size());
  auto add_group = [&](const std::vector<AttackFeatures>& group, double y) {
    for (const auto& f : group) {
      xs.push_back(f.as_vector());
      ys.push_back(y);
    }
    for (std::size_t i = group.size(); i < target; ++i) {
      xs.push_back(group[rng.uniform_index(group.size())].as_vector());
      ys.push_back(y);
    }
  };
  add_group(members, 1.0);
  add_group(nonmembers, 0.0);

  const std::size_t n = xs.size();
  const std::size_t d = xs.front().size();
  AttackModel model;
  model.feature_mean.assign(d, 0.0);
  model.feature_scale.assign(d, 0.0);
  for (const auto& x : xs)
    for (std::size_t j = 0; j < d; ++j) model.feature_mean[j] += x[j] / static_cast<double>(n);
  for (const auto& x : xs)
    for (std::size_t j = 0; j < d; ++j) {
      const double dev = x[j] - model.feature_mean[j];
      model.feature_scale[j] += dev * dev / static_cast<double>(n);
    }
  for (double& s : model.feature_scale) s = s > 1e-24 ? std::sqrt(s) : 1.0;

  DenseMatrix design(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      design(i, j) = (xs[i][j] - model.feature_mean[j]) / model.feature_scale[j];

  std::vector<DenseMatrix> params{DenseMatrix(d, 1), DenseMatrix(1, 1)};
  AdamHyper hyper;
  hyper.learning_rate = config.learning_rate;
  AdamState state = AdamState::for_params(params, hyper);
  std::vector<DenseMatrix> grads{DenseMatrix(d, 1), DenseMatrix(1, 1)};
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::fill(grads[0].data().begin(), grads[0].data().end(), 0.0);
    grads[1](0, 0) = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double score = params[1](0, 0);
      for (std::size_t j = 0; j < d; ++j) score += params[0](j, 0) * design(i, j);
      const double residual = (1.0 / (1.0 + std::exp(-score)) - ys[i]) / static_cast<double>(n);
      for (std::size_t j = 0; j < d; ++j) grads[0](j, 0) += residual * design(i, j);
      grads[1](0, 0) += residual;
    }
    adam_step(params, grads, state);
  }
  model.weights.assign(params[0].data().begin(), params[0].data().end());
  model.bias = params[1](0, 0);
  model.epochs = config.epochs;

  std::size_t correct = 0;
  for (const auto& f : members) correct += model.predicts_member(f) ? 1 : 0;
  for (const auto& f : nonmembers) correct += model.predicts_member(f) ? 0 : 1;
  model.train_accuracy =
      static_cast<double>(correct) / static_cast<double>(members.size() + nonmembers.size());
  return model;
}

// ---------------------------------------------------------------------------

void AttackSplit::validate() const {
  for (const IndexSet* fit : {&member_train, &nonmember_train}) {
    for (const IndexSet* scored : {&member_eval, &nonmember_eval, &unlearning}) {
      if (!set_intersection(*fit, *scored).empty()) {
        throw ValidationError("attack split: fitting and scoring groups overlap");
      }
    }
  }
  if (!set_intersection(member_train, nonmember_train).empty() ||
      !set_intersection(member_eval, nonmember_eval).empty() ||
      !set_intersection(member_eval, unlearning).empty() ||
      !set_intersection(nonmember_eval, unlearning).empty()) {
    throw ValidationError("attack split: member and non-member groups overlap");
  }
}

namespace {

std::pair<IndexSet, IndexSet> halves(const IndexSet& nodes, Rng& rng) {
  IndexSet shuffled = nodes;
  rng.shuffle(shuffled);
  const auto mid = static_cast<std::ptrdiff_t>((shuffled.size() + 1) / 2);
  IndexSet first(shuffled.begin(), shuffled.begin() + mid);
  IndexSet second(shuffled.begin() + mid, shuffled.end());
  std::sort(first.begin(), first.end());
  std::sort(second.begin(), second.end());
  return {std::move(first), std::move(second)};
}

}  // namespace

AttackSplit make_attack_split(const SplitIndices& splits, Rng& rng) {
  AttackSplit split;
  Rng member_rng = rng.derive(1);
  Rng nonmember_rng = rng.derive(2);
  std::tie(split.member_train, split.member_eval) = halves(splits.retained, member_rng);
  std::tie(split.nonmember_train, split.nonmember_eval) = halves(splits.test, nonmember_rng);
  split.unlearning = splits.unlearning;
  split.validate();
  return split;
}

MiaReport evaluate_mia(const AttackModel& model, const DenseMatrix& posteriors,
                       std::span<const int> labels, const AttackSplit& split) {
  split.validate();
  auto score = [&](const IndexSet& group) {
    GroupCounts counts;
    counts.size = group.size();
    for (const auto& f : extract_features(posteriors, labels, group)) {
      if (model.predicts_member(f)) ++counts.predicted_member;
    }
    return counts;
  };
  MiaReport report;
  report.retained_eval = score(split.member_eval);
  report.test_eval = score(split.nonmember_eval);
  report.unlearning = score(split.unlearning);
  const std::size_t total =
      report.retained_eval.size + report.test_eval.size + report.unlearning.size;
  const std::size_t correct =
      report.retained_eval.predicted_member +
      (report.test_eval.size - report.test_eval.predicted_member) +
      (report.unlearning.size - report.unlearning.predicted_member);
  report.all_node_accuracy =
      total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  report.unlearning_node_accuracy =
      report.unlearning.size == 0
          ? 0.0
          : static_cast<double>(report.unlearning.size - report.unlearning.predicted_member) /
                static_cast<double>(report.unlearning.size);
  return report;
}

MiaReport run_mia(const DenseMatrix& posteriors, std::span<const int> labels,
                  const SplitIndices& splits, Rng& rng, const AttackTrainConfig& config) {
  Rng split_rng = rng.derive(0x5B1);
  Rng fit_rng = rng.derive(0xF17);
  const AttackSplit split = make_attack_split(splits, split_rng);
  const auto model = train_attack(extract_features(posteriors, labels, split.member_train),
                                  extract_features(posteriors, labels, split.nonmember_train),
                                  fit_rng, config);
  return evaluate_mia(model, posteriors, labels, split);
}

std::string MiaReport::to_json() const {
  auto group = [](const GroupCounts& g) {
    return nlohmann::json{{"size", g.size}, {"predicted_member", g.predicted_member}};
  };
  nlohmann::json j;
  j["all_node_accuracy"] = all_node_accuracy;
  j["unlearning_node_accuracy"] = unlearning_node_accuracy;
  j["groups"] = {{"retained_eval", group(retained_eval)},
                 {"test_eval", group(test_eval)},
                 {"unlearning", group(unlearning)}};
  return j.dump(2);
}

void write_posteriors_csv(const std::string& path, const DenseMatrix& posteriors,
                          std::span<const int> labels, const SplitIndices& splits) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write posteriors '" + path + "'");
  out << "node,label,group";
  for (std::size_t c = 0; c < posteriors.cols(); ++c) out << ",p" << c;
  out << '\n';
  out.precision(17);
  for (std::size_t v = 0; v < posteriors.rows(); ++v) {
    const char* group = contains(splits.unlearning, v) ? "unlearning"
                        : contains(splits.retained, v) ? "retained"
                        : contains(splits.test, v)     ? "test"
                                                       : "other";
    out << v << ',' << labels[v] << ',' << group;
    for (double p : posteriors.row(v)) out << ',' << p;
    out << '\n';
  }
}

}  // namespace gunlearn::mia
