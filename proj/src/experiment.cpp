#include "gunlearn/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "gunlearn/error.hpp"

namespace gunlearn {

using nlohmann::json;

namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
  if (!j.is_object()) throw ValidationError(std::string(where) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; }) == allowed.end()) {
      throw ValidationError(std::string(where) + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void ExperimentConfig::validate() const {
  if (dataset_path.has_value() == synthetic.has_value()) {
    throw ValidationError("experiment: exactly one of 'dataset' and 'synthetic' is required");
  }
  if (synthetic) synthetic->validate();
  model.validate();
  fine_tune.validate();
  if (attack.epochs < 1 || !(attack.learning_rate > 0.0)) {
    throw ValidationError("experiment: attack epochs and learning_rate must be positive");
  }
  if (methods.empty()) throw ValidationError("experiment: no methods");
  if (fractions.empty()) throw ValidationError("experiment: no fractions");
  for (double f : fractions) {
    if (!(f > 0.0 && f < 1.0)) {
      throw ValidationError("experiment: fraction " + fmt(f) + " outside (0, 1)");
    }
  }
  if (repetitions < 1) throw ValidationError("experiment: repetitions must be >= 1");
  if (output_dir.empty()) throw ValidationError("experiment: empty output_dir");
}

std::string ExperimentConfig::to_json() const {
  json j;
  if (dataset_path) j["dataset"] = *dataset_path;
  if (synthetic) {
    j["synthetic"] = {{"num_nodes", synthetic->num_nodes},
                      {"num_features", synthetic->num_features},
                      {"num_classes", synthetic->num_classes},
                      {"p_intra", synthetic->p_intra},
                      {"p_inter", synthetic->p_inter},
                      {"label_signal", synthetic->label_signal},
                      {"seed", synthetic->seed}};
  }
  j["architecture"] = to_string(model.architecture);
  j["hidden_dim"] = model.hidden_dim;
  j["sgc_hops"] = model.sgc_hops;
  j["learning_rate"] = model.learning_rate;
  j["max_epochs"] = model.max_epochs;
  j["dropout"] = model.dropout;
  j["weight_decay"] = model.weight_decay;
  j["fine_tune"] = {{"learning_rate", fine_tune.learning_rate},
                    {"max_epochs", fine_tune.max_epochs},
                    {"window", fine_tune.window},
                    {"tolerance", fine_tune.tolerance}};
  j["attack"] = {{"epochs", attack.epochs}, {"learning_rate", attack.learning_rate}};
  auto names = json::array();
  for (Method m : methods) names.push_back(to_string(m));
  j["methods"] = names;
  j["fractions"] = fractions;
  j["repetitions"] = repetitions;
  j["base_seed"] = base_seed;
  j["output_dir"] = output_dir;
  j["export_loss_history"] = export_loss_history;
  return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  ExperimentConfig c;
  try {
    const json j = json::parse(text);
    check_keys(j,
               {"dataset", "synthetic", "architecture", "hidden_dim", "sgc_hops", "learning_rate",
                "max_epochs", "dropout", "weight_decay", "fine_tune", "attack", "methods",
                "fractions", "repetitions", "base_seed", "output_dir", "export_loss_history"},
               "experiment config");
    if (j.contains("dataset")) c.dataset_path = j.at("dataset").get<std::string>();
    if (j.contains("synthetic")) {
      const auto& s = j.at("synthetic");
      check_keys(s,
                 {"num_nodes", "num_features", "num_classes", "p_intra", "p_inter",
                  "label_signal", "seed"},
                 "experiment config 'synthetic'");
      SyntheticSpec spec;
      read_opt(s, "num_nodes", spec.num_nodes);
      read_opt(s, "num_features", spec.num_features);
      read_opt(s, "num_classes", spec.num_classes);
      read_opt(s, "p_intra", spec.p_intra);
      read_opt(s, "p_inter", spec.p_inter);
      read_opt(s, "label_signal", spec.label_signal);
      read_opt(s, "seed", spec.seed);
      c.synthetic = spec;
    }
    if (j.contains("architecture")) {
      c.model.architecture = parse_architecture(j.at("architecture").get<std::string>());
    }
    read_opt(j, "hidden_dim", c.model.hidden_dim);
    read_opt(j, "sgc_hops", c.model.sgc_hops);
    read_opt(j, "learning_rate", c.model.learning_rate);
    read_opt(j, "max_epochs", c.model.max_epochs);
    read_opt(j, "dropout", c.model.dropout);
    read_opt(j, "weight_decay", c.model.weight_decay);
    if (j.contains("fine_tune")) {
      const auto& f = j.at("fine_tune");
      check_keys(f, {"learning_rate", "max_epochs", "window", "tolerance"},
                 "experiment config 'fine_tune'");
      read_opt(f, "learning_rate", c.fine_tune.learning_rate);
      read_opt(f, "max_epochs", c.fine_tune.max_epochs);
      read_opt(f, "window", c.fine_tune.window);
      read_opt(f, "tolerance", c.fine_tune.tolerance);
    }
    if (j.contains("attack")) {
      const auto& a = j.at("attack");
      check_keys(a, {"epochs", "learning_rate"}, "experiment config 'attack'");
      read_opt(a, "epochs", c.attack.epochs);
      read_opt(a, "learning_rate", c.attack.learning_rate);
    }
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& m : j.at("methods")) c.methods.push_back(parse_method(m.get<std::string>()));
    }
    read_opt(j, "fractions", c.fractions);
    read_opt(j, "repetitions", c.repetitions);
    read_opt(j, "base_seed", c.base_seed);
    read_opt(j, "output_dir", c.output_dir);
    read_opt(j, "export_loss_history", c.export_loss_history);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("experiment config: ") + e.what());
  }
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open experiment config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

// ---------------------------------------------------------------------------
// Seeds

std::uint64_t original_seed(std::uint64_t base, double fraction, std::size_t repetition) {
  std::uint64_t s = mix64(base ^ 0x6f726967696e616cULL);
  s = mix64(s + std::bit_cast<std::uint64_t>(fraction));
  return mix64(s + repetition);
}

std::uint64_t cell_seed(std::uint64_t base, Method method, double fraction,
                        std::size_t repetition) {
  const auto code = static_cast<std::uint64_t>(method) + 1;
  return mix64(original_seed(base, fraction, repetition) ^ mix64(code * 0x9E3779B97F4A7C15ULL));
}

// ---------------------------------------------------------------------------
// Statistics

Stat summarize(const std::vector<double>& values) {
  Stat s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

std::size_t epochs_to_within(const std::vector<double>& loss_history, double relative) {
  if (loss_history.empty()) return 0;
  const double final_loss = loss_history.back();
  for (std::size_t i = 0; i < loss_history.size(); ++i) {
    if (std::abs(loss_history[i] - final_loss) <= relative * std::abs(final_loss)) return i + 1;
  }
  return loss_history.size();
}

// ---------------------------------------------------------------------------
// Runs

namespace {

struct Context {
  const DatasetBundle& bundle;
  const ExperimentConfig& config;
  NormalizedAdjacency adj;
  GraphTensors g;

  Context(const DatasetBundle& b, const ExperimentConfig& c)
      : bundle(b), config(c), adj(build_adjacency(b.graph)), g(adj, b.graph.features) {}
};

RunRecord run_method(const Context& ctx, Method method, double fraction, std::size_t repetition,
                     const SplitIndices& splits, const ModelParams& params_org,
                     const DenseMatrix& org_posteriors) {
  RunRecord rec;
  rec.method = method;
  rec.fraction = fraction;
  rec.repetition = repetition;
  rec.seed = cell_seed(ctx.config.base_seed, method, fraction, repetition);
  try {
    const Rng root(rec.seed);
    Rng unlearn_rng = root.derive(1);
    Rng attack_rng = root.derive(2);
    ModelConfig model = ctx.config.model;
    model.seed = rec.seed;
    const auto result = run_unlearning(method, ctx.bundle.graph, ctx.g, splits, params_org,
                                       org_posteriors, model, ctx.config.fine_tune, unlearn_rng);
    const DenseMatrix posteriors = forward(ctx.g, result.params).posteriors;
    const auto& labels = ctx.bundle.graph.labels;
    rec.accuracy = accuracy(posteriors, labels, splits.test);
    const auto mia = mia::run_mia(posteriors, labels, splits, attack_rng, ctx.config.attack);
    rec.mia_all = mia.all_node_accuracy;
    rec.mia_unlearning = mia.unlearning_node_accuracy;
    rec.epochs = result.report.epochs_run;
    rec.wall_time_seconds = result.report.wall_time_seconds;
    rec.final_loss = result.report.final_loss;
    rec.converged = result.report.converged;
    rec.diverged = result.report.diverged;
    rec.loss_history = result.report.loss_history;
    rec.ok = true;
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  return rec;
}

std::vector<RunRecord> run_methods(const Context& ctx, const std::vector<Method>& methods,
                                   double fraction, std::size_t repetition) {
  const auto& graph = ctx.bundle.graph;
  const std::uint64_t seed = original_seed(ctx.config.base_seed, fraction, repetition);
  const Rng root(seed);
  std::vector<RunRecord> out;
  try {
    ModelConfig model = ctx.config.model;
    model.seed = seed;
    Rng train_rng = root.derive(1);
    Rng sample_rng = root.derive(2);
    const auto targets =
        TargetDistribution::one_hot(graph.labels, ctx.bundle.splits.labeled, graph.num_classes);
    const auto org = train(graph, ctx.g, model, train_rng, ctx.bundle.splits.labeled, targets);
    const DenseMatrix org_posteriors = forward(ctx.g, org.params).posteriors;
    const SplitIndices splits = sample_unlearning_set(ctx.bundle.splits, fraction, sample_rng);
    for (Method m : methods) {
      out.push_back(run_method(ctx, m, fraction, repetition, splits, org.params, org_posteriors));
    }
  } catch (const std::exception& e) {
    out.clear();
    for (Method m : methods) {
      RunRecord rec;
      rec.method = m;
      rec.fraction = fraction;
      rec.repetition = repetition;
      rec.seed = cell_seed(ctx.config.base_seed, m, fraction, repetition);
      rec.error = std::string("original model: ") + e.what();
      out.push_back(std::move(rec));
    }
  }
  return out;
}

}  // namespace

std::vector<RunRecord> run_repetition(const DatasetBundle& bundle, const ExperimentConfig& config,
                                      double fraction, std::size_t repetition) {
  const Context ctx(bundle, config);
  return run_methods(ctx, config.methods, fraction, repetition);
}

RunRecord run_cell(const DatasetBundle& bundle, const ExperimentConfig& config, Method method,
                   double fraction, std::size_t repetition) {
  const Context ctx(bundle, config);
  return run_methods(ctx, {method}, fraction, repetition).front();
}

DatasetBundle load_experiment_dataset(const ExperimentConfig& config) {
  config.validate();
  if (config.dataset_path) return load_dataset(*config.dataset_path);
  return generate_synthetic(*config.synthetic);
}

ExperimentReport run_experiment(const DatasetBundle& bundle, const ExperimentConfig& config,
                                std::size_t jobs) {
  config.validate();
  bundle.validate();
  const Context ctx(bundle, config);

  struct Unit {
    std::size_t fraction_index;
    std::size_t repetition;
  };
  std::vector<Unit> units;
  for (std::size_t f = 0; f < config.fractions.size(); ++f)
    for (std::size_t r = 0; r < config.repetitions; ++r) units.push_back({f, r});

  std::vector<std::vector<RunRecord>> results(units.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < units.size(); i = next++) {
      results[i] = run_methods(ctx, config.methods, config.fractions[units[i].fraction_index],
                               units[i].repetition);
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, units.size());
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  ExperimentReport report;
  report.dataset = bundle.name;
  report.architecture = config.model.architecture;
  report.repetitions = config.repetitions;
  report.base_seed = config.base_seed;
  for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
    for (std::size_t f = 0; f < config.fractions.size(); ++f) {
      CellSummary cell;
      cell.method = config.methods[mi];
      cell.fraction = config.fractions[f];
      std::vector<double> acc, mia_all, mia_unl, epochs, wall;
      for (std::size_t u = 0; u < units.size(); ++u) {
        if (units[u].fraction_index != f) continue;
        const RunRecord& rec = results[u][mi];
        report.runs.push_back(rec);
        ++cell.runs;
        if (!rec.ok) {
          ++cell.failed;
          cell.failures.push_back("repetition " + std::to_string(rec.repetition) + ": " +
                                  rec.error);
          continue;
        }
        acc.push_back(rec.accuracy);
        mia_all.push_back(rec.mia_all);
        mia_unl.push_back(rec.mia_unlearning);
        epochs.push_back(static_cast<double>(rec.epochs));
        wall.push_back(rec.wall_time_seconds);
      }
      cell.ok = cell.failed < cell.runs;
      cell.accuracy = summarize(acc);
      cell.mia_all = summarize(mia_all);
      cell.mia_unlearning = summarize(mia_unl);
      cell.epochs = summarize(epochs);
      cell.wall_time_seconds = summarize(wall);
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Report output

const CellSummary* ExperimentReport::cell(Method method, double fraction) const {
  for (const auto& c : cells) {
    if (c.method == method && c.fraction == fraction) return &c;
  }
  return nullptr;
}

std::string ExperimentReport::to_json() const {
  auto stat = [](const Stat& s) { return json{{"mean", s.mean}, {"std", s.std}}; };
  json j;
  j["dataset"] = dataset;
  j["architecture"] = to_string(architecture);
  j["repetitions"] = repetitions;
  j["base_seed"] = base_seed;
  auto jc = json::array();
  for (const auto& c : cells) {
    jc.push_back({{"method", to_string(c.method)},
                  {"fraction", c.fraction},
                  {"status", c.ok ? "ok" : "failed"},
                  {"runs", c.runs},
                  {"failed", c.failed},
                  {"failures", c.failures},
                  {"accuracy", stat(c.accuracy)},
                  {"mia_all", stat(c.mia_all)},
                  {"mia_unlearning", stat(c.mia_unlearning)},
                  {"epochs", stat(c.epochs)},
                  {"wall_time_seconds", stat(c.wall_time_seconds)}});
  }
  j["cells"] = jc;
  auto jr = json::array();
  for (const auto& r : runs) {
    jr.push_back({{"method", to_string(r.method)},
                  {"fraction", r.fraction},
                  {"repetition", r.repetition},
                  {"seed", r.seed},
                  {"status", r.ok ? "ok" : "failed"},
                  {"error", r.error},
                  {"accuracy", r.accuracy},
                  {"mia_all", r.mia_all},
                  {"mia_unlearning", r.mia_unlearning},
                  {"epochs", r.epochs},
                  {"wall_time_seconds", r.wall_time_seconds},
                  {"final_loss", r.final_loss},
                  {"converged", r.converged},
                  {"diverged", r.diverged}});
  }
  j["runs"] = jr;
  return j.dump(2);
}

std::string ExperimentReport::to_csv() const {
  std::ostringstream out;
  out << "method,fraction,status,runs,failed,accuracy_mean,accuracy_std,mia_all_mean,mia_all_std,"
         "mia_unlearning_mean,mia_unlearning_std,epochs_mean,epochs_std,wall_time_mean,"
         "wall_time_std\n";
  for (const auto& c : cells) {
    out << to_string(c.method) << ',' << fmt(c.fraction) << ',' << (c.ok ? "ok" : "failed")
        << ',' << c.runs << ',' << c.failed;
    for (const Stat* s :
         {&c.accuracy, &c.mia_all, &c.mia_unlearning, &c.epochs, &c.wall_time_seconds}) {
      out << ',' << fmt(s->mean) << ',' << fmt(s->std);
    }
    out << '\n';
  }
  return out.str();
}

std::string ExperimentReport::runs_csv() const {
  std::ostringstream out;
  out << "method,fraction,repetition,seed,status,accuracy,mia_all,mia_unlearning,epochs,"
         "wall_time_seconds,final_loss,converged,diverged\n";
  for (const auto& r : runs) {
    out << to_string(r.method) << ',' << fmt(r.fraction) << ',' << r.repetition << ',' << r.seed
        << ',' << (r.ok ? "ok" : "failed") << ',' << fmt(r.accuracy) << ',' << fmt(r.mia_all)
        << ',' << fmt(r.mia_unlearning) << ',' << r.epochs << ',' << fmt(r.wall_time_seconds)
        << ',' << fmt(r.final_loss) << ',' << (r.converged ? 1 : 0) << ','
        << (r.diverged ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string ExperimentReport::loss_history_csv() const {
  std::ostringstream out;
  out << "method,fraction,repetition,epoch,loss\n";
  for (const auto& r : runs) {
    for (std::size_t e = 0; e < r.loss_history.size(); ++e) {
      out << to_string(r.method) << ',' << fmt(r.fraction) << ',' << r.repetition << ',' << e
          << ',' << fmt(r.loss_history[e]) << '\n';
    }
  }
  return out.str();
}

void write_report(const ExperimentReport& report, const ExperimentConfig& config) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + config.output_dir + "'");
  auto write = [&](const char* name, const std::string& text) {
    const auto path = fs::path(config.output_dir) / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw IoError("write to '" + path.string() + "' failed");
  };
  write("report.json", report.to_json() + "\n");
  write("report.csv", report.to_csv());
  write("runs.csv", report.runs_csv());
  write("config.json", config.to_json() + "\n");
  if (config.export_loss_history) write("loss_history.csv", report.loss_history_csv());
}

}  // namespace gunlearn
