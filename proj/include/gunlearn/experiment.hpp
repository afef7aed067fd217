#pragma once

// Sweep harness: methods x fractions x repetitions, each repetition with
// seeds derived purely from (base seed, method, fraction, repetition).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gunlearn/dataset.hpp"
#include "gunlearn/mia.hpp"
#include "gunlearn/model.hpp"
#include "gunlearn/unlearning.hpp"

namespace gunlearn {

struct ExperimentConfig {
  std::optional<std::string> dataset_path;
  std::optional<SyntheticSpec> synthetic;
  ModelConfig model;  // seed is ignored; see derived seeds below
  FineTuneConfig fine_tune;
  mia::AttackTrainConfig attack;
  std::vector<Method> methods{Method::RETRAIN, Method::CLR, Method::TNMPP, Method::CNNF,
                              Method::NAIVE};
  std::vector<double> fractions{0.2, 0.4, 0.6, 0.8};
  std::size_t repetitions = 5;
  std::uint64_t base_seed = 0;
  std::string output_dir = "results";
  bool export_loss_history = true;

  void validate() const;
  std::string to_json() const;
  /// Unknown keys are rejected. Missing keys keep their defaults.
  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig from_file(const std::string& path);
};

/// Seed of the original model and the forget-set sample; shared by every
/// method at the same (fraction, repetition).
std::uint64_t original_seed(std::uint64_t base, double fraction, std::size_t repetition);
/// Seed of one method's unlearning run and its attack.
std::uint64_t cell_seed(std::uint64_t base, Method method, double fraction,
                        std::size_t repetition);

struct RunRecord {
  Method method = Method::CLR;
  double fraction = 0.0;
  std::size_t repetition = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double accuracy = 0.0;  // test set
  double mia_all = 0.0;
  double mia_unlearning = 0.0;
  std::size_t epochs = 0;
  double wall_time_seconds = 0.0;
  double final_loss = 0.0;
  bool converged = false;
  bool diverged = false;
  std::vector<double> loss_history;
};

struct Stat {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single run
};

/// Sample mean and standard deviation. Empty input gives {0, 0}.
Stat summarize(const std::vector<double>& values);

struct CellSummary {
  Method method = Method::CLR;
  double fraction = 0.0;
  std::size_t runs = 0;
  std::size_t failed = 0;
  bool ok = false;  // at least one successful run
  std::vector<std::string> failures;
  Stat accuracy;
  Stat mia_all;
  Stat mia_unlearning;
  Stat epochs;
  Stat wall_time_seconds;
};

struct ExperimentReport {
  std::string dataset;
  Architecture architecture = Architecture::GCN;
  std::size_t repetitions = 0;
  std::uint64_t base_seed = 0;
  std::vector<CellSummary> cells;  // methods-major, in config order
  std::vector<RunRecord> runs;

  const CellSummary* cell(Method method, double fraction) const;
  std::string to_json() const;
  std::string to_csv() const;
  /// method,fraction,repetition,epoch,loss
  std::string loss_history_csv() const;
  std::string runs_csv() const;
};

/// One (fraction, repetition) unit: trains the original model once and runs
/// every requested method against it. Failures are recorded per method.
std::vector<RunRecord> run_repetition(const DatasetBundle& bundle, const ExperimentConfig& config,
                                      double fraction, std::size_t repetition);

/// Recomputes a single cell in isolation.
RunRecord run_cell(const DatasetBundle& bundle, const ExperimentConfig& config, Method method,
                   double fraction, std::size_t repetition);

DatasetBundle load_experiment_dataset(const ExperimentConfig& config);

/// Runs the full sweep with up to `jobs` repetitions in flight.
ExperimentReport run_experiment(const DatasetBundle& bundle, const ExperimentConfig& config,
                                std::size_t jobs = 1);

/// Writes report.json, report.csv, runs.csv and (optionally) loss_history.csv.
void write_report(const ExperimentReport& report, const ExperimentConfig& config);

/// First epoch whose loss is within `relative` of the final loss, or the
/// history length when none is.
std::size_t epochs_to_within(const std::vector<double>& loss_history, double relative);

}  // namespace gunlearn
