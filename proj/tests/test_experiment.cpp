#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "gunlearn/experiment.hpp"
#include "support.hpp"

using namespace gunlearn;
using nlohmann::json;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.synthetic = SyntheticSpec{80, 8, 2, 0.1, 0.01, 1.5, 3};
  c.model.max_epochs = 150;
  c.model.learning_rate = 0.01;
  c.fine_tune.max_epochs = 40;
  c.attack.epochs = 100;
  c.methods = {Method::CLR};
  c.fractions = {0.4};
  c.repetitions = 2;
  c.base_seed = 11;
  return c;
}

json without_timing(json j) {
  for (auto& c : j.at("cells")) c.erase("wall_time_seconds");
  for (auto& r : j.at("runs")) r.erase("wall_time_seconds");
  return j;
}

}  // namespace

TEST_CASE("summarize uses the sample standard deviation") {
  CHECK(summarize({}).mean == 0.0);
  CHECK(summarize({3.0}).std == 0.0);
  const auto s = summarize({1.0, 2.0, 3.0, 4.0});
  CHECK(s.mean == 2.5);
  CHECK(s.std == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-15));
  CHECK(summarize({0.8, 0.9}).std == doctest::Approx(0.070710678118654738).epsilon(1e-12));
}

TEST_CASE("epochs_to_within") {
  CHECK(epochs_to_within({}, 0.01) == 0);
  CHECK(epochs_to_within({10.0, 5.0, 1.02, 1.0}, 0.05) == 3);
  CHECK(epochs_to_within({1.0, 1.0}, 0.0) == 1);
}

TEST_CASE("seeds depend only on their coordinates") {
  CHECK(original_seed(1, 0.2, 0) == original_seed(1, 0.2, 0));
  CHECK(original_seed(1, 0.2, 0) != original_seed(1, 0.2, 1));
  CHECK(original_seed(1, 0.2, 0) != original_seed(1, 0.4, 0));
  CHECK(original_seed(1, 0.2, 0) != original_seed(2, 0.2, 0));
  CHECK(cell_seed(1, Method::CLR, 0.2, 0) != cell_seed(1, Method::CNNF, 0.2, 0));
  CHECK(cell_seed(1, Method::CLR, 0.2, 0) != original_seed(1, 0.2, 0));
  CHECK(cell_seed(7, Method::NAIVE, 0.8, 3) == cell_seed(7, Method::NAIVE, 0.8, 3));
}

TEST_CASE("config JSON") {
  SUBCASE("round trip") {
    auto c = small_config();
    c.methods = {Method::RETRAIN, Method::TNMPP};
    c.model.architecture = Architecture::SGC;
    const auto back = ExperimentConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    CHECK(back.methods == c.methods);
    CHECK(back.synthetic->num_nodes == 80);
  }
  SUBCASE("defaults") {
    const auto c = ExperimentConfig::from_json(R"({"dataset": "data/cora"})");
    CHECK(*c.dataset_path == "data/cora");
    CHECK(c.methods.size() == 5);
    CHECK(c.fractions == std::vector<double>{0.2, 0.4, 0.6, 0.8});
    CHECK(c.repetitions == 5);
    CHECK(c.model.max_epochs == 1600);
    CHECK(c.model.hidden_dim == 16);
    CHECK(c.model.learning_rate == 0.001);
    CHECK_NOTHROW(c.validate());
  }
  SUBCASE("rejections") {
    CHECK_THROWS_AS(ExperimentConfig::from_json("{"), ValidationError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(R"({"dataset": "x", "epochs": 3})"),
                    ValidationError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(R"({"dataset": "x", "fine_tune": {"lr": 1}})"),
                    ValidationError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(R"({"dataset": "x", "methods": ["magic"]})"),
                    ValidationError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(R"({"dataset": "x", "repetitions": "two"})"),
                    ValidationError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(R"({"dataset": "x", "architecture": "gat"})"),
                    ValidationError);
    CHECK_THROWS_AS(ExperimentConfig::from_file("/nonexistent/config.json"), IoError);
  }
  SUBCASE("validation") {
    auto c = small_config();
    c.fractions = {1.0};
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = small_config();
    c.dataset_path = "x";
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = small_config();
    c.synthetic.reset();
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = small_config();
    c.repetitions = 0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = small_config();
    c.methods.clear();
    CHECK_THROWS_AS(c.validate(), ValidationError);
  }
}

TEST_CASE("sweep of one method, one fraction, two repetitions") {
  const auto config = small_config();
  const auto bundle = load_experiment_dataset(config);
  const auto report = run_experiment(bundle, config);
  REQUIRE(report.cells.size() == 1);
  REQUIRE(report.runs.size() == 2);
  const auto* cell = report.cell(Method::CLR, 0.4);
  REQUIRE(cell != nullptr);
  CHECK(cell->ok);
  CHECK(cell->runs == 2);
  CHECK(cell->failed == 0);
  CHECK(cell->accuracy.mean ==
        doctest::Approx((report.runs[0].accuracy + report.runs[1].accuracy) / 2));
  CHECK(cell->accuracy.std == doctest::Approx(summarize({report.runs[0].accuracy,
                                                         report.runs[1].accuracy})
                                                  .std));
  CHECK(report.cell(Method::CNNF, 0.4) == nullptr);
  for (const auto& r : report.runs) {
    CHECK(r.ok);
    CHECK(r.epochs >= 1);
    CHECK(r.epochs <= 40);
    CHECK(r.loss_history.size() == r.epochs);
    CHECK(r.accuracy >= 0.0);
    CHECK(r.accuracy <= 1.0);
  }

  SUBCASE("deterministic up to wall time, regardless of job count") {
    const auto again = run_experiment(bundle, config, 2);
    CHECK(without_timing(json::parse(again.to_json())) ==
          without_timing(json::parse(report.to_json())));
  }

  SUBCASE("a single cell reproduces the sweep") {
    const auto rec = run_cell(bundle, config, Method::CLR, 0.4, 1);
    CHECK(rec.seed == report.runs[1].seed);
    CHECK(rec.accuracy == report.runs[1].accuracy);
    CHECK(rec.mia_all == report.runs[1].mia_all);
    CHECK(rec.loss_history == report.runs[1].loss_history);
  }

  SUBCASE("adding methods does not perturb existing ones") {
    auto wider = config;
    wider.methods = {Method::RETRAIN, Method::CLR};
    const auto r2 = run_experiment(bundle, wider);
    const auto* c = r2.cell(Method::CLR, 0.4);
    REQUIRE(c != nullptr);
    CHECK(c->accuracy.mean == cell->accuracy.mean);
    CHECK(c->mia_unlearning.mean == cell->mia_unlearning.mean);
  }

  SUBCASE("CSV and JSON carry the same numbers") {
    const auto j = json::parse(report.to_json());
    std::istringstream csv(report.to_csv());
    std::string header, row;
    std::getline(csv, header);
    std::getline(csv, row);
    std::vector<std::string> fields;
    std::stringstream ss(row);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    REQUIRE(fields.size() == 15);
    CHECK(fields[0] == "clr");
    CHECK(std::stod(fields[5]) == j["cells"][0]["accuracy"]["mean"].get<double>());
    CHECK(std::stod(fields[6]) == j["cells"][0]["accuracy"]["std"].get<double>());
    CHECK(std::stod(fields[9]) == j["cells"][0]["mia_unlearning"]["mean"].get<double>());
  }

  SUBCASE("report files") {
    testing::TempDir dir("exp");
    auto out = config;
    out.output_dir = dir.str("out");
    write_report(report, out);
    for (const char* f : {"report.json", "report.csv", "runs.csv", "config.json",
                          "loss_history.csv"}) {
      CHECK(std::filesystem::exists(dir.str(std::string("out/") + f)));
    }
    CHECK(ExperimentConfig::from_file(dir.str("out/config.json")).to_json() == out.to_json());
  }
}

TEST_CASE("a failing method is isolated") {
  auto config = small_config();
  config.repetitions = 1;
  config.methods = {Method::RETRAIN, Method::CLR};
  config.fine_tune.learning_rate = 1e300;
  const auto bundle = load_experiment_dataset(config);
  const auto report = run_experiment(bundle, config);
  const auto* good = report.cell(Method::RETRAIN, 0.4);
  const auto* bad = report.cell(Method::CLR, 0.4);
  REQUIRE(good != nullptr);
  REQUIRE(bad != nullptr);
  CHECK(good->ok);
  CHECK_FALSE(bad->ok);
  CHECK(bad->failed == 1);
  REQUIRE(bad->failures.size() == 1);
  CHECK(json::parse(report.to_json())["cells"][1]["status"] == "failed");
}
