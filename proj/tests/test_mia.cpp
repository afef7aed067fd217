#include <doctest.h>

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "gunlearn/error.hpp"
#include "gunlearn/mia.hpp"
#include "support.hpp"

using namespace gunlearn;
using namespace gunlearn::mia;
using testing::random_dense;

namespace {

/// Posterior with `p` on class 0 and the rest spread with a little noise.
std::vector<double> peaked(double p, std::size_t c, Rng& rng) {
  std::vector<double> row(c);
  double rest = 0.0;
  for (std::size_t k = 1; k < c; ++k) rest += row[k] = rng.uniform(0.5, 1.5);
  row[0] = p;
  for (std::size_t k = 1; k < c; ++k) row[k] *= (1.0 - p) / rest;
  return row;
}

AttackFeatures features_of(const std::vector<double>& row, int label) {
  DenseMatrix z(1, row.size(), row);
  return extract_features(z, std::vector<int>{label}, {0}).front();
}

SplitIndices split_fixture(std::size_t n, Rng& rng) {
  return sample_unlearning_set(testing::random_splits(n, rng, 0.5, 0.1), 0.3, rng);
}

}  // namespace

TEST_CASE("attack features") {
  SUBCASE("uniform posterior") {
    const auto f = features_of({0.25, 0.25, 0.25, 0.25}, 2);
    CHECK(f.entropy == doctest::Approx(std::log(4.0)).epsilon(1e-14));
    CHECK(f.sorted_posterior == std::vector<double>(4, 0.25));
    CHECK(f.truth_probability == 0.25);
  }
  SUBCASE("confident posterior") {
    const auto f = features_of({0.97, 0.01, 0.01, 0.01}, 0);
    CHECK(f.truth_probability == 0.97);
    CHECK(f.entropy == doctest::Approx(0.16770053683981007).epsilon(1e-12));
    CHECK(f.entropy < 0.2);
    CHECK(f.loss == doctest::Approx(-std::log(0.97)).epsilon(1e-10));
  }
  SUBCASE("random batch matches a per-node recomputation") {
    Rng rng(4);
    const auto z = softmax_rows(random_dense(30, 5, rng, -4, 4));
    std::vector<int> labels(30);
    for (int& y : labels) y = static_cast<int>(rng.uniform_index(5));
    IndexSet idx{0, 3, 7, 8, 15, 29};
    const auto feats = extract_features(z, labels, idx);
    REQUIRE(feats.size() == idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const NodeIndex v = idx[i];
      std::vector<double> sorted(z.row(v).begin(), z.row(v).end());
      std::sort(sorted.rbegin(), sorted.rend());
      double h = 0.0;
      for (double p : z.row(v)) h -= p * std::log(p);
      const double truth = z(v, static_cast<std::size_t>(labels[v]));
      CHECK(feats[i].sorted_posterior == sorted);
      CHECK(feats[i].entropy == doctest::Approx(h).epsilon(1e-13));
      CHECK(feats[i].truth_probability == truth);
      CHECK(feats[i].loss == doctest::Approx(-std::log(truth + 1e-12)).epsilon(1e-13));
      CHECK(feats[i].entropy >= 0.0);
      CHECK(feats[i].entropy <= std::log(5.0) + 1e-12);
      CHECK(std::is_sorted(feats[i].sorted_posterior.rbegin(), feats[i].sorted_posterior.rend()));
      CHECK(feats[i].as_vector().size() == 5 + 3);
    }
  }
  SUBCASE("index out of range") {
    CHECK_THROWS_AS(extract_features(DenseMatrix(2, 2, 0.5), std::vector<int>{0, 1}, {2}),
                    IndexError);
  }
}

TEST_CASE("train_attack") {
  Rng data(9);
  std::vector<AttackFeatures> members, nonmembers;
  for (int i = 0; i < 80; ++i) members.push_back(features_of(peaked(0.99, 4, data), 0));
  for (int i = 0; i < 50; ++i) nonmembers.push_back(features_of(peaked(0.5, 4, data), 0));

  SUBCASE("separable groups") {
    Rng rng(1);
    const auto model = train_attack(members, nonmembers, rng);
    CHECK(model.train_accuracy >= 0.95);
    CHECK(model.epochs == 500);
    for (double w : model.weights) CHECK(std::isfinite(w));
  }

  SUBCASE("indistinguishable groups") {
    Rng rng(2);
    auto draw = [&](int n) {
      std::vector<AttackFeatures> out;
      for (int i = 0; i < n; ++i) out.push_back(features_of(peaked(data.uniform(0.3, 0.9), 3, data), 0));
      return out;
    };
    const auto model = train_attack(draw(200), draw(200), rng);
    const auto held_members = draw(300);
    const auto held_nonmembers = draw(300);
    std::size_t correct = 0;
    for (const auto& f : held_members) correct += model.predicts_member(f) ? 1 : 0;
    for (const auto& f : held_nonmembers) correct += model.predicts_member(f) ? 0 : 1;
    const double acc = static_cast<double>(correct) / 600.0;
    CHECK(std::abs(acc - 0.5) <= 0.1);
  }

  SUBCASE("deterministic per seed") {
    Rng a(3), b(3);
    const auto ma = train_attack(members, nonmembers, a);
    const auto mb = train_attack(members, nonmembers, b);
    CHECK(ma.weights == mb.weights);
    CHECK(ma.bias == mb.bias);
  }

  SUBCASE("empty group") {
    Rng rng(1);
    CHECK_THROWS_AS(train_attack({}, nonmembers, rng), ValidationError);
    CHECK_THROWS_AS(train_attack(members, {}, rng), ValidationError);
  }
}

TEST_CASE("attack split") {
  Rng rng(5);
  const auto splits = split_fixture(60, rng);
  Rng a(7), b(7);
  const auto s = make_attack_split(splits, a);
  CHECK(s.member_train == make_attack_split(splits, b).member_train);
  CHECK(set_union(s.member_train, s.member_eval) == splits.retained);
  CHECK(set_union(s.nonmember_train, s.nonmember_eval) == splits.test);
  CHECK(s.unlearning == splits.unlearning);
  CHECK(s.member_train.size() - s.member_eval.size() <= 1);
  CHECK(s.nonmember_train.size() - s.nonmember_eval.size() <= 1);
  CHECK_NOTHROW(s.validate());

  auto leaky = s;
  leaky.member_eval.push_back(leaky.member_train.front());
  std::sort(leaky.member_eval.begin(), leaky.member_eval.end());
  CHECK_THROWS_AS(leaky.validate(), ValidationError);
  auto crossed = s;
  crossed.unlearning = set_union(crossed.unlearning, {crossed.nonmember_eval.front()});
  CHECK_THROWS_AS(crossed.validate(), ValidationError);
}

TEST_CASE("evaluate_mia with constant oracles") {
  Rng rng(6);
  const auto splits = split_fixture(80, rng);
  const auto z = softmax_rows(random_dense(80, 3, rng));
  std::vector<int> labels(80, 0);
  const auto split = make_attack_split(splits, rng);
  const std::size_t total =
      split.member_eval.size() + split.nonmember_eval.size() + split.unlearning.size();

  const auto all_member = evaluate_mia(AttackModel::constant(true, 3 + 3), z, labels, split);
  CHECK(all_member.unlearning_node_accuracy == 0.0);
  CHECK(all_member.all_node_accuracy ==
        doctest::Approx(static_cast<double>(split.member_eval.size()) / static_cast<double>(total)));
  CHECK(all_member.unlearning.predicted_member == split.unlearning.size());

  const auto none = evaluate_mia(AttackModel::constant(false, 3 + 3), z, labels, split);
  CHECK(none.unlearning_node_accuracy == 1.0);
  CHECK(none.all_node_accuracy ==
        doctest::Approx(static_cast<double>(split.nonmember_eval.size() + split.unlearning.size()) /
                        static_cast<double>(total)));
  CHECK(none.retained_eval.size == split.member_eval.size());
  CHECK(none.retained_eval.predicted_member == 0);

  auto bad = split;
  bad.nonmember_eval = set_union(bad.nonmember_eval, {bad.nonmember_train.front()});
  CHECK_THROWS_AS(evaluate_mia(AttackModel::constant(true, 6), z, labels, bad), ValidationError);
}

TEST_CASE("run_mia end to end") {
  Rng rng(8);
  const auto splits = split_fixture(120, rng);
  std::vector<int> labels(120);
  for (int& y : labels) y = static_cast<int>(rng.uniform_index(3));
  // Members get confident correct posteriors, everyone else a flat one.
  DenseMatrix z(120, 3, 1.0 / 3.0);
  for (NodeIndex v : splits.retained) {
    for (std::size_t c = 0; c < 3; ++c) z(v, c) = 0.01;
    z(v, static_cast<std::size_t>(labels[v])) = 0.98;
  }
  Rng a(1), b(1);
  const auto report = run_mia(z, labels, splits, a);
  CHECK(report.all_node_accuracy >= 0.95);
  CHECK(report.unlearning_node_accuracy == 1.0);
  const auto again = run_mia(z, labels, splits, b);
  CHECK(again.to_json() == report.to_json());

  const auto j = nlohmann::json::parse(report.to_json());
  CHECK(j.at("all_node_accuracy").get<double>() == report.all_node_accuracy);
  CHECK(j.at("groups").at("unlearning").at("size").get<std::size_t>() == splits.unlearning.size());
  CHECK(report.all_node_accuracy >= 0.0);
  CHECK(report.all_node_accuracy <= 1.0);

  testing::TempDir dir("mia");
  write_posteriors_csv(dir.str("p.csv"), z, labels, splits);
  std::ifstream in(dir.str("p.csv"));
  std::string header;
  std::getline(in, header);
  CHECK(header == "node,label,group,p0,p1,p2");
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == 120);
}
