#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "support.hpp"

#ifndef GUNLEARN_CLI_PATH
#error "GUNLEARN_CLI_PATH must point at the built gunlearn binary"
#endif

namespace {

/// Runs the CLI with `args`, stdout and stderr to `log`, returning the exit code.
int run_cli(const std::string& args, const std::string& log) {
  const std::string cmd = std::string("\"") + GUNLEARN_CLI_PATH + "\" " + args + " > \"" + log +
                          "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("command line workflow") {
  testing::TempDir dir("cli");
  const auto data = dir.str("data");
  const auto log = dir.str("log.txt");
  REQUIRE(run_cli("dataset-gen --out \"" + data + "\" --nodes 120 --features 8 --classes 3 " +
                       "--p-intra 0.1 --p-inter 0.01 --signal 2 --seed 5",
                   log) == 0);

  SUBCASE("dataset-validate") {
    CHECK(run_cli("dataset-validate \"" + data + "\"", log) == 0);
    const auto out = slurp(log);
    CHECK(out.find("\"num_nodes\": 120") != std::string::npos);
    CHECK(out.find("OK") != std::string::npos);
    std::ofstream(dir.str("data/labels.txt"), std::ios::app) << "9\n";
    CHECK(run_cli("dataset-validate \"" + data + "\"", log) == 2);
  }

  SUBCASE("train, unlearn and attack") {
    const auto ckpt = dir.str("model.ckpt");
    REQUIRE(run_cli("train --dataset \"" + data + "\" --epochs 200 --lr 0.01 --out \"" + ckpt +
                         "\"",
                     log) == 0);
    CHECK(std::filesystem::exists(ckpt));
    CHECK(slurp(log).find("test accuracy") != std::string::npos);

    const auto clr = dir.str("clr.ckpt");
    REQUIRE(run_cli("unlearn --dataset \"" + data + "\" --method clr --fraction 0.2 " +
                         "--ft-epochs 30 --from-checkpoint \"" + ckpt + "\" --out \"" + clr + "\"",
                     log) == 0);
    const auto prov = nlohmann::json::parse(slurp(clr + ".json"));
    CHECK(prov.contains("epochs_run"));
    CHECK(prov.at("method") == "clr");
    CHECK(prov.at("parent_checkpoint") == ckpt);

    const auto retrained = dir.str("retrain.ckpt");
    REQUIRE(run_cli("unlearn --dataset \"" + data + "\" --method retrain --epochs 50 --out \"" +
                         retrained + "\"",
                     log) == 0);
    CHECK(nlohmann::json::parse(slurp(retrained + ".json")).at("parent_checkpoint").is_null());

    const auto report = dir.str("mia.json");
    CHECK(run_cli("mia --dataset \"" + data + "\" --checkpoint \"" + clr + "\" --out \"" +
                       report + "\" --posteriors-csv \"" + dir.str("p.csv") + "\"",
                   log) == 0);
    const auto mia = nlohmann::json::parse(slurp(report));
    CHECK(mia.at("all_node_accuracy").get<double>() >= 0.0);
    CHECK(mia.at("all_node_accuracy").get<double>() <= 1.0);
    CHECK(std::filesystem::exists(dir.str("p.csv")));

    CHECK(run_cli("unlearn --dataset \"" + data + "\" --method clr --fraction 1.5 " +
                       "--from-checkpoint \"" + ckpt + "\"",
                   log) == 2);
    CHECK(run_cli("unlearn --dataset \"" + data + "\" --method clr --out \"" + clr + "\"", log) ==
          2);
  }

  SUBCASE("usage errors") {
    CHECK(run_cli("train", log) == 2);
    CHECK(run_cli("unlearn --dataset \"" + data + "\" --method forget-me", log) == 2);
    CHECK(run_cli("train --dataset \"" + dir.str("missing") + "\"", log) == 2);
    CHECK(run_cli("bogus-subcommand", log) == 2);
  }

  SUBCASE("experiment") {
    const auto config = dir.str("exp.json");
    std::ofstream(config) << R"({"methods": ["clr", "retrain"], "fractions": [0.4],
      "repetitions": 1, "max_epochs": 100, "learning_rate": 0.01,
      "fine_tune": {"max_epochs": 20}, "attack": {"epochs": 50}})";
    const auto out = dir.str("results");
    CHECK(run_cli("experiment --config \"" + config + "\" --dataset \"" + data + "\" --out \"" +
                       out + "\"",
                   log) == 0);
    CHECK(std::filesystem::exists(out + "/report.csv"));
    CHECK(std::filesystem::exists(out + "/report.json"));
  }
}
