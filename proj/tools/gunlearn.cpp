// gunlearn command-line front end.
//
// Exit codes: 0 success, 2 usage or validation error, 1 runtime failure.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "gunlearn/dataset.hpp"
#include "gunlearn/error.hpp"
#include "gunlearn/experiment.hpp"
#include "gunlearn/mia.hpp"
#include "gunlearn/model.hpp"
#include "gunlearn/unlearning.hpp"

using namespace gunlearn;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct ModelFlags {
  std::string arch = "gcn";
  std::size_t hidden = 16;
  std::size_t hops = 2;
  double lr = 0.001;
  std::size_t epochs = 1600;
  double dropout = 0.0;
  double weight_decay = 0.0;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--arch", arch, "gcn or sgc")->capture_default_str();
    cmd.add_option("--hidden", hidden, "GCN hidden width")->capture_default_str();
    cmd.add_option("--hops", hops, "SGC propagation steps")->capture_default_str();
    cmd.add_option("--lr", lr, "Adam learning rate")->capture_default_str();
    cmd.add_option("--epochs", epochs, "training epochs")->capture_default_str();
    cmd.add_option("--dropout", dropout, "GCN hidden dropout")->capture_default_str();
    cmd.add_option("--weight-decay", weight_decay, "L2 penalty")->capture_default_str();
  }

  ModelConfig config(std::uint64_t seed) const {
    ModelConfig c;
    c.architecture = parse_architecture(arch);
    c.hidden_dim = hidden;
    c.sgc_hops = hops;
    c.learning_rate = lr;
    c.max_epochs = epochs;
    c.dropout = dropout;
    c.weight_decay = weight_decay;
    c.seed = seed;
    c.validate();
    return c;
  }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
}

std::string percent(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * x);
  return buf;
}

// ---------------------------------------------------------------------------

struct TrainCmd {
  std::string dataset;
  std::string out = "model.ckpt";
  std::uint64_t seed = 0;
  ModelFlags model;

  int run() const {
    const auto bundle = load_dataset(dataset);
    const auto config = model.config(seed);
    const auto adj = build_adjacency(bundle.graph);
    const GraphTensors g(adj, bundle.graph.features);
    Rng rng(seed);
    const auto targets = TargetDistribution::one_hot(bundle.graph.labels, bundle.splits.labeled,
                                                     bundle.graph.num_classes);
    const auto result = train(bundle.graph, g, config, rng, bundle.splits.labeled, targets);
    save_checkpoint(out, result.params, {seed, result.report.epochs_run});
    const auto posteriors = forward(g, result.params).posteriors;
    const double acc = accuracy(posteriors, bundle.graph.labels, bundle.splits.test);
    std::cout << "dataset " << bundle.name << ", " << to_string(config.architecture) << ", "
              << result.report.epochs_run << " epochs, final loss " << result.report.final_loss
              << ", " << result.report.wall_time_seconds << " s\n"
              << "test accuracy " << percent(acc) << "%\n"
              << "checkpoint written to " << out << "\n";
    return 0;
  }
};

struct UnlearnCmd {
  std::string dataset;
  std::string method_name;
  double fraction = 0.2;
  std::uint64_t seed = 0;
  std::optional<std::string> from_checkpoint;
  std::string out = "unlearned.ckpt";
  FineTuneConfig fine_tune;
  ModelFlags model;

  int run() const {
    const Method method = parse_method(method_name);
    if (!(fraction > 0.0 && fraction < 1.0)) {
      throw ValidationError("--fraction must lie in (0, 1), got " + std::to_string(fraction));
    }
    fine_tune.validate();
    if (method != Method::RETRAIN && !from_checkpoint) {
      throw ValidationError("--from-checkpoint is required for method " + to_string(method));
    }
    const auto bundle = load_dataset(dataset);
    const auto adj = build_adjacency(bundle.graph);
    const GraphTensors g(adj, bundle.graph.features);
    const Rng root(seed);
    Rng sample_rng = root.derive(2);
    Rng method_rng = root.derive(3);
    const auto splits = sample_unlearning_set(bundle.splits, fraction, sample_rng);

    ModelParams params_org;
    ModelConfig config = model.config(seed);
    DenseMatrix org_posteriors;
    if (from_checkpoint) {
      params_org = load_checkpoint(*from_checkpoint).first;
      if (params_org.num_features() != bundle.graph.num_features() ||
          params_org.num_classes() != bundle.graph.num_classes) {
        throw ValidationError("checkpoint shape does not match dataset " + bundle.name);
      }
      config.architecture = params_org.architecture;
      config.sgc_hops = params_org.sgc_hops;
      if (params_org.architecture == Architecture::GCN) config.hidden_dim = params_org.hidden_dim();
      org_posteriors = forward(g, params_org).posteriors;
    }
    auto result = run_unlearning(method, bundle.graph, g, splits, params_org, org_posteriors,
                                 config, fine_tune, method_rng);
    result.provenance.dataset = bundle.name;
    result.provenance.fraction = fraction;
    result.provenance.seed = seed;
    if (method != Method::RETRAIN) result.provenance.parent_checkpoint = from_checkpoint;
    save_unlearning_result(out, result);
    const auto posteriors = forward(g, result.params).posteriors;
    std::cout << to_string(method) << ": forgot " << splits.unlearning.size() << " of "
              << splits.labeled.size() << " labeled nodes, " << result.report.epochs_run
              << " epochs" << (result.report.converged ? " (converged)" : "")
              << (result.report.diverged ? " (diverged)" : "") << ", "
              << result.report.wall_time_seconds << " s\n"
              << "test accuracy " << percent(accuracy(posteriors, bundle.graph.labels, splits.test))
              << "%\n"
              << "checkpoint written to " << out << " (provenance " << out << ".json)\n";
    return 0;
  }
};

struct MiaCmd {
  std::string dataset;
  std::string checkpoint;
  std::optional<std::string> provenance;
  std::uint64_t seed = 0;
  std::optional<std::string> out;
  std::optional<std::string> posteriors_csv;
  mia::AttackTrainConfig attack;

  int run() const {
    const auto bundle = load_dataset(dataset);
    const auto prov = load_provenance(provenance.value_or(checkpoint + ".json"));
    const auto splits = with_unlearning_set(bundle.splits, prov.unlearning);
    const auto params = load_checkpoint(checkpoint).first;
    if (params.num_features() != bundle.graph.num_features() ||
        params.num_classes() != bundle.graph.num_classes) {
      throw ValidationError("checkpoint shape does not match dataset " + bundle.name);
    }
    const auto adj = build_adjacency(bundle.graph);
    const GraphTensors g(adj, bundle.graph.features);
    const auto posteriors = forward(g, params).posteriors;
    Rng rng(seed);
    const auto report = mia::run_mia(posteriors, bundle.graph.labels, splits, rng, attack);
    if (posteriors_csv) mia::write_posteriors_csv(*posteriors_csv, posteriors, bundle.graph.labels, splits);
    if (out) write_text(*out, report.to_json() + "\n");
    std::cout << report.to_json() << "\n";
    return 0;
  }
};

struct ExperimentCmd {
  std::string config_path;
  std::optional<std::string> dataset;
  std::optional<std::string> out;
  std::optional<std::size_t> reps;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;

  int run() const {
    auto config = ExperimentConfig::from_file(config_path);
    if (dataset) {
      config.dataset_path = dataset;
      config.synthetic.reset();
    }
    if (out) config.output_dir = *out;
    if (reps) config.repetitions = *reps;
    if (seed) config.base_seed = *seed;
    const auto bundle = load_experiment_dataset(config);
    std::cerr << "running " << config.methods.size() << " methods x " << config.fractions.size()
              << " fractions x " << config.repetitions << " repetitions on " << bundle.name
              << " with " << jobs << " job(s)\n";
    const auto report = run_experiment(bundle, config, jobs);
    write_report(report, config);
    std::printf("%-8s %8s %16s %16s %16s %8s %10s\n", "method", "fraction", "accuracy",
                "mia_all", "mia_unlearn", "epochs", "time_s");
    bool any_failed = false;
    for (const auto& c : report.cells) {
      if (!c.ok) {
        any_failed = true;
        std::printf("%-8s %8.2f  FAILED: %s\n", to_string(c.method).c_str(), c.fraction,
                    c.failures.empty() ? "" : c.failures.front().c_str());
        continue;
      }
      std::printf("%-8s %8.2f %8.2f+-%-6.2f %8.2f+-%-6.2f %8.2f+-%-6.2f %8.1f %10.3f\n",
                  to_string(c.method).c_str(), c.fraction, 100 * c.accuracy.mean,
                  100 * c.accuracy.std, 100 * c.mia_all.mean, 100 * c.mia_all.std,
                  100 * c.mia_unlearning.mean, 100 * c.mia_unlearning.std, c.epochs.mean,
                  c.wall_time_seconds.mean);
    }
    std::cout << "report written to " << config.output_dir << "\n";
    return any_failed ? kExitRuntime : 0;
  }
};

struct DatasetGenCmd {
  std::string out;
  std::string name = "synthetic";
  SyntheticSpec spec;

  int run() const {
    auto bundle = generate_synthetic(spec);
    bundle.name = name;
    save_dataset(bundle, out);
    std::cout << "wrote " << bundle.graph.num_nodes << " nodes, " << bundle.graph.edges.size()
              << " edges to " << out << "\n";
    return 0;
  }
};

struct DatasetValidateCmd {
  std::string dataset;

  int run() const {
    const auto b = load_dataset(dataset);
    nlohmann::ordered_json j;
    j["name"] = b.name;
    j["num_nodes"] = b.graph.num_nodes;
    j["num_edges"] = b.graph.edges.size();
    j["num_directed_entries"] = 2 * b.graph.edges.size();
    j["num_features"] = b.graph.num_features();
    j["num_classes"] = b.graph.num_classes;
    j["train"] = b.splits.train.size();
    j["val"] = b.splits.val.size();
    j["test"] = b.splits.test.size();
    std::cout << j.dump(2) << "\nOK\n";
    return 0;
  }
};

std::size_t default_jobs() {
  if (const char* env = std::getenv("GUNLEARN_JOBS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    std::cerr << "warning: ignoring invalid GUNLEARN_JOBS='" << env << "'\n";
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Node unlearning for graph neural networks"};
  app.require_subcommand(1);

  TrainCmd train_cmd;
  auto* train = app.add_subcommand("train", "Train the original model on train+val labels");
  train->add_option("--dataset", train_cmd.dataset, "dataset directory")->required();
  train->add_option("--out", train_cmd.out, "checkpoint path")->capture_default_str();
  train->add_option("--seed", train_cmd.seed, "random seed")->capture_default_str();
  train_cmd.model.add_to(*train);

  UnlearnCmd unlearn_cmd;
  auto* unlearn = app.add_subcommand("unlearn", "Forget a random fraction of the labeled nodes");
  unlearn->add_option("--dataset", unlearn_cmd.dataset, "dataset directory")->required();
  unlearn->add_option("--method", unlearn_cmd.method_name, "clr, tnmpp, cnnf, naive or retrain")
      ->required();
  unlearn->add_option("--fraction", unlearn_cmd.fraction, "fraction of labeled nodes to forget")
      ->capture_default_str();
  unlearn->add_option("--seed", unlearn_cmd.seed, "random seed")->capture_default_str();
  unlearn->add_option("--from-checkpoint", unlearn_cmd.from_checkpoint, "original model");
  unlearn->add_option("--out", unlearn_cmd.out, "result checkpoint path")->capture_default_str();
  unlearn->add_option("--ft-lr", unlearn_cmd.fine_tune.learning_rate, "fine-tune learning rate")
      ->capture_default_str();
  unlearn->add_option("--ft-epochs", unlearn_cmd.fine_tune.max_epochs, "fine-tune epoch cap")
      ->capture_default_str();
  unlearn_cmd.model.add_to(*unlearn);

  MiaCmd mia_cmd;
  auto* mia = app.add_subcommand("mia", "Membership inference against an unlearned model");
  mia->add_option("--dataset", mia_cmd.dataset, "dataset directory")->required();
  mia->add_option("--checkpoint", mia_cmd.checkpoint, "unlearned checkpoint")->required();
  mia->add_option("--provenance", mia_cmd.provenance, "provenance sidecar (default <ckpt>.json)");
  mia->add_option("--seed", mia_cmd.seed, "random seed")->capture_default_str();
  mia->add_option("--out", mia_cmd.out, "write the report JSON here");
  mia->add_option("--posteriors-csv", mia_cmd.posteriors_csv, "export per-node posteriors");

  ExperimentCmd exp_cmd;
  exp_cmd.jobs = default_jobs();
  auto* exp = app.add_subcommand("experiment", "Run a methods x fractions x repetitions sweep");
  exp->add_option("--config", exp_cmd.config_path, "JSON config")->required();
  exp->add_option("--dataset", exp_cmd.dataset, "override the config dataset");
  exp->add_option("--out", exp_cmd.out, "override the output directory");
  exp->add_option("--reps", exp_cmd.reps, "override the repetition count");
  exp->add_option("--seed", exp_cmd.seed, "override the base seed");
  exp->add_option("--jobs", exp_cmd.jobs, "parallel repetitions (env GUNLEARN_JOBS)")
      ->capture_default_str();

  DatasetGenCmd gen_cmd;
  auto* gen = app.add_subcommand("dataset-gen", "Write a synthetic block-model dataset");
  gen->add_option("--out", gen_cmd.out, "output directory")->required();
  gen->add_option("--name", gen_cmd.name, "dataset name")->capture_default_str();
  gen->add_option("--nodes", gen_cmd.spec.num_nodes)->capture_default_str();
  gen->add_option("--features", gen_cmd.spec.num_features)->capture_default_str();
  gen->add_option("--classes", gen_cmd.spec.num_classes)->capture_default_str();
  gen->add_option("--p-intra", gen_cmd.spec.p_intra)->capture_default_str();
  gen->add_option("--p-inter", gen_cmd.spec.p_inter)->capture_default_str();
  gen->add_option("--signal", gen_cmd.spec.label_signal, "class mean shift")
      ->capture_default_str();
  gen->add_option("--seed", gen_cmd.spec.seed)->capture_default_str();

  DatasetValidateCmd validate_cmd;
  auto* validate = app.add_subcommand("dataset-validate", "Load and fully validate a dataset");
  validate->add_option("--dataset,dataset", validate_cmd.dataset, "dataset directory")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*train) return train_cmd.run();
    if (*unlearn) return unlearn_cmd.run();
    if (*mia) return mia_cmd.run();
    if (*exp) return exp_cmd.run();
    if (*gen) return gen_cmd.run();
    if (*validate) return validate_cmd.run();
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IndexError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
