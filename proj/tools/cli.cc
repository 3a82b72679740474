#include "truelift/cli.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <regex>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "truelift/dataset.h"
#include "truelift/errors.h"
#include "truelift/gradcheck.h"
#include "truelift/loss.h"
#include "truelift/models.h"
#include "truelift/trainer.h"

namespace truelift::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Resolved flags of one subcommand, written next to its outputs.
json Manifest(const CLI::App& sub, const std::vector<std::string>& inputs,
              const std::vector<std::string>& outputs) {
  json options = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_lnames().empty()
                                 ? opt->get_name()
                                 : opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    if (opt->get_type_size() == 0) {
      options[name] = opt->count() > 0;
    } else if (opt->count() > 0) {
      const auto& results = opt->results();
      options[name] = results.size() == 1 ? json(results.front()) : json(results);
    } else {
      options[name] = opt->get_default_str();
    }
  }
  return {{"tool", "truelift"},
          {"version", kVersion},
          {"command", sub.get_name()},
          {"options", options},
          {"inputs", inputs},
          {"outputs", outputs}};
}

void WriteJson(const json& doc, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << doc.dump(2) << '\n';
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

void EnsureDir(const fs::path& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory '" + dir.string() + "'");
}

std::string SnapshotFile(int step) {
  return "step_" + std::to_string(step) + ".csv";
}

struct GenFlags {
  std::size_t rows = 10000;
  double treatment_frac = 0.7;
  std::uint64_t seed = 1;
  std::string noise = "uniform";
  double lift_coef = 0.5;
  std::string out;
};

int RunGen(const CLI::App& sub, const GenFlags& f, std::ostream& out) {
  DataGenConfig config;
  config.n_rows = f.rows;
  config.treatment_fraction = f.treatment_frac;
  config.seed = f.seed;
  config.noise = f.noise == "normal" ? NoiseDistribution::kStdNormal
                                     : NoiseDistribution::kUniform01;
  config.lift_coefficient = f.lift_coef;
  const ABDataset data = Generate(config);
  const fs::path path(f.out);
  EnsureDir(path.parent_path());
  SaveCsv(data, path);
  const std::string manifest = f.out + ".manifest.json";
  WriteJson(Manifest(sub, {}, {f.out}), manifest);
  out << "wrote " << data.size() << " rows (" << data.treatment_count()
      << " treatment, " << data.control_count() << " control) to " << f.out
      << "\n";
  return kOk;
}

struct TrainFlags {
  std::string data;
  std::string model = "linear";
  std::size_t hidden = 8;
  std::string activation = "tanh";
  std::vector<double> init;
  double lr = 0.1;
  int steps = 100;
  int bins = 5;
  std::vector<int> snapshots{0, 1, 10, 100};
  std::size_t batch = 0;
  int rebin_every = 1;
  double migration_scale = 0.5;
  std::size_t max_sort = kDefaultMaxSort;
  std::uint64_t seed = 1;
  std::string out_dir = "train_out";
};

int RunTrain(const CLI::App& sub, const TrainFlags& f, std::ostream& out) {
  const ABDataset data = LoadCsv(f.data);
  ModelSpec spec = f.model == "mlp"
                       ? ModelSpec::Mlp(data.dim(), f.hidden,
                                        ParseActivation(f.activation))
                       : ModelSpec::Linear(data.dim());
  Validate(spec);
  Params init = InitParams(spec, f.seed);
  if (!f.init.empty()) {
    init = spec.kind == ModelKind::kLinear
               ? LinearFromCoefficients(data.dim(), f.init)
               : Params{f.init};
  }
  Validate(spec, init);

  TrainConfig config;
  config.step_size = f.lr;
  config.steps = f.steps;
  if (f.batch > 0) config.batch = f.batch;
  config.grad.n_bins = f.bins;
  config.grad.rebin_every = f.rebin_every;
  config.grad.migration_step_scale = f.migration_scale;
  config.grad.max_sort = f.max_sort;
  config.grad.cut_seed = f.seed;
  config.snapshot_steps = f.snapshots;
  config.seed = f.seed;

  const fs::path dir(f.out_dir);
  EnsureDir(dir / "snapshots");
  TrainResult result;
  try {
    result = Train(data, spec, init, config);
  } catch (const TrainingDiverged& e) {
    WriteTraceCsv(e.trace(), spec, dir / "trace.csv");
    throw;
  }
  SaveModel(spec, result.params, dir / "params.json");
  WriteTraceCsv(result.trace, spec, dir / "trace.csv");
  std::vector<std::string> outputs{(dir / "params.json").string(),
                                   (dir / "trace.csv").string()};
  for (const Snapshot& s : result.trace.snapshots) {
    const fs::path p = dir / "snapshots" / SnapshotFile(s.step);
    WriteLossReportCsv(s.report, p);
    outputs.push_back(p.string());
  }
  json manifest = Manifest(sub, {f.data}, outputs);
  manifest["events"] = result.trace.events;
  WriteJson(manifest, dir / "manifest.json");

  for (const std::string& e : result.trace.events) out << "note: " << e << "\n";
  const TraceEntry& last = result.trace.entries.back();
  out << "step " << last.step << " loss " << last.loss << "\n";
  if (spec.kind == ModelKind::kLinear) {
    out << "coefficients (c1, c2=offset, c3, ...):";
    for (double c : LinearCoefficients(result.params)) out << " " << c;
    out << "\n";
  }
  out << "wrote " << (dir / "params.json").string() << "\n";
  return kOk;
}

struct EvalFlags {
  std::string data;
  std::string params;
  int bins = 5;
  std::size_t max_sort = kDefaultMaxSort;
  std::uint64_t seed = 1;
  std::string out;
};

int RunEval(const CLI::App& sub, const EvalFlags& f, std::ostream& out) {
  const ABDataset data = LoadCsv(f.data);
  const StoredModel model = LoadModel(f.params);
  if (model.spec.dim != data.dim()) {
    throw ValidationError("model expects " + std::to_string(model.spec.dim) +
                          " features but the data has " +
                          std::to_string(data.dim()));
  }
  const std::vector<double> predictions =
      Predict(model.spec, model.params, data);
  const Evaluation eval =
      EvaluatePredictions(data, predictions, f.bins, f.max_sort, f.seed);
  if (eval.used_bins != eval.requested_bins) {
    out << "note: predictions have too few distinct values; using "
        << eval.used_bins << " bins instead of " << eval.requested_bins
        << "\n";
  }
  out << "loss " << eval.report.loss << " bias " << eval.report.bias_term
      << " separation " << eval.report.separation_term << " bins "
      << eval.used_bins << "\n";
  if (!f.out.empty()) {
    EnsureDir(fs::path(f.out).parent_path());
    WriteLossReportCsv(eval.report, f.out);
    WriteJson(Manifest(sub, {f.data, f.params}, {f.out}),
              f.out + ".manifest.json");
    out << "wrote " << f.out << "\n";
  }
  return kOk;
}

struct GradcheckFlags {
  std::string data;
  std::string params;
  std::size_t rows = 200;
  std::uint64_t seed = 1;
  int bins = 5;
  double migration_scale = 0.5;
  std::size_t max_sort = kDefaultMaxSort;
  std::size_t bias_rows = 100;
  bool sabotage = false;
};

int RunGradcheck(const GradcheckFlags& f, std::ostream& out) {
  std::optional<ABDataset> data;
  if (!f.data.empty()) {
    data.emplace(LoadCsv(f.data));
  } else {
    if (f.rows < 2) throw ValidationError("--rows must be at least 2");
    DataGenConfig gen;
    gen.n_rows = f.rows;
    gen.seed = f.seed;
    data.emplace(Generate(gen));
  }
  std::vector<double> predictions;
  if (!f.params.empty()) {
    const StoredModel model = LoadModel(f.params);
    predictions = Predict(model.spec, model.params, *data);
  } else {
    // Seeded random linear model.
    std::mt19937_64 rng(f.seed);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    Params params{std::vector<double>(data->dim() + 1)};
    for (double& v : params.values) v = coef(rng);
    predictions = Predict(ModelSpec::Linear(data->dim()), params, *data);
  }
  gradcheck::Config config;
  config.n_bins = f.bins;
  config.migration_step_scale = f.migration_scale;
  config.max_sort = f.max_sort;
  config.bias_rows = f.bias_rows;
  config.seed = f.seed;
  config.sabotage = f.sabotage;
  const gradcheck::Report report = gradcheck::Run(*data, predictions, config);
  out << "bias: " << report.bias_rows_checked << " rows, max rel error "
      << report.max_bias_rel_error << " (tol " << config.bias_tolerance
      << ") " << (report.bias_ok ? "PASS" : "FAIL") << "\n";
  out << "migration: " << report.migration_rows_checked
      << " rows, max rel error " << report.max_migration_rel_error << " (tol "
      << config.migration_tolerance << ") "
      << (report.migration_ok ? "PASS" : "FAIL") << "\n";
  out << (report.passed() ? "PASS" : "FAIL") << "\n";
  return report.passed() ? kOk : kRuntimeError;
}

struct PlotFlags {
  std::string run_dir;
  std::vector<int> steps;
  std::string out_dir;
};

std::map<int, fs::path> AvailableSnapshots(const fs::path& dir) {
  std::map<int, fs::path> found;
  if (!fs::is_directory(dir)) return found;
  const std::regex pattern("step_([0-9]+)\\.csv");
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) {
      found[std::stoi(m[1].str())] = entry.path();
    }
  }
  return found;
}

int RunPlotData(const PlotFlags& f, std::ostream& out) {
  const fs::path snap_dir = fs::path(f.run_dir) / "snapshots";
  const std::map<int, fs::path> available = AvailableSnapshots(snap_dir);
  std::vector<int> steps = f.steps;
  if (steps.empty()) {
    for (const auto& [step, path] : available) steps.push_back(step);
  }
  for (int step : steps) {
    if (available.count(step) == 0) {
      std::string names;
      for (const auto& [s, p] : available) {
        names += (names.empty() ? "" : ",") + std::to_string(s);
      }
      throw ValidationError("no snapshot for step " + std::to_string(step) +
                            " in " + snap_dir.string() + "; available: " +
                            (names.empty() ? "none" : names));
    }
  }
  const fs::path out_dir =
      f.out_dir.empty() ? fs::path(f.run_dir) / "plot" : fs::path(f.out_dir);
  EnsureDir(out_dir);
  for (int step : steps) {
    const LossReport report = ReadLossReportCsv(available.at(step));
    const fs::path path = out_dir / ("fig_step_" + std::to_string(step) + ".csv");
    std::ofstream file(path, std::ios::trunc);
    if (!file) throw Error("cannot open '" + path.string() + "' for writing");
    file.precision(17);
    file << "bin,mean_pred,lift,size\n";
    for (const LossRow& row : report.rows) {
      file << row.bin << "," << row.stats.mean_pred << "," << row.stats.lift
           << "," << row.stats.size << "\n";
    }
    if (!file) throw Error("write to '" + path.string() + "' failed");
    out << "wrote " << path.string() << "\n";
  }
  return kOk;
}

void AddGradFlags(CLI::App* sub, int* rebin_every, double* migration_scale,
                  std::size_t* max_sort) {
  if (rebin_every != nullptr) {
    sub->add_option("--rebin-every", *rebin_every,
                    "Recompute cut values every k steps")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
  }
  sub->add_option("--migration-scale", *migration_scale,
                  "Migration shift as a fraction of the segment width")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--max-sort", *max_sort,
                  "Subsample size above which cut values are estimated")
      ->capture_default_str();
}

bool GivenOnCommandLine(const std::vector<std::string>& args,
                        const std::string& flag) {
  return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
    return a == flag || a.rfind(flag + "=", 0) == 0;
  });
}

// Splices `key = value` lines from the subcommand's --config file in front of
// the command-line flags. Keys already given on the command line are skipped.
std::vector<std::string> ExpandConfig(const std::vector<std::string>& args) {
  std::optional<std::string> file;
  std::size_t sub = args.size();
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (sub == args.size() && !args[i].empty() && args[i][0] != '-') sub = i;
    if (args[i] == "--config" && i + 1 < args.size()) {
      file = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      file = args[i].substr(9);
    }
  }
  if (!file || sub == args.size()) return args;
  if (!fs::is_regular_file(*file)) {
    throw ValidationError("config file '" + *file + "' not found");
  }
  std::vector<std::string> expanded(args.begin(), args.begin() + sub + 1);
  for (const CLI::ConfigItem& item : CLI::ConfigINI().from_file(*file)) {
    const std::string flag = "--" + item.name;
    if (GivenOnCommandLine(args, flag)) continue;
    std::string value;
    for (const std::string& v : item.inputs) {
      value += (value.empty() ? "" : ",") + v;
    }
    expanded.push_back(flag + "=" + value);
  }
  expanded.insert(expanded.end(), args.begin() + sub + 1, args.end());
  return expanded;
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("truelift");
  for (const std::string& a : args) argv.push_back(a.c_str());
  return Run(static_cast<int>(argv.size()), argv.data(), out, err);
}

int Run(int argc, const char* const* argv, std::ostream& out,
        std::ostream& err) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    args = ExpandConfig(args);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kValidationError;
  }

  CLI::App app("Train and evaluate true-lift models on A/B-test data",
               "truelift");
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  std::string config_file;

  GenFlags gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "Generate synthetic A/B data");
  gen_cmd->add_option("--config", config_file, "File of key = value lines");
  gen_cmd->add_option("--rows", gen.rows, "Number of rows")
      ->check(CLI::Range(std::size_t{2}, std::numeric_limits<std::size_t>::max()))
      ->capture_default_str();
  gen_cmd->add_option("--treatment-frac", gen.treatment_frac,
                      "Probability that a row is treated")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "RNG seed")->capture_default_str();
  gen_cmd->add_option("--noise", gen.noise, "Noise distribution")
      ->check(CLI::IsMember({"uniform", "normal"}))
      ->capture_default_str();
  gen_cmd->add_option("--lift-coef", gen.lift_coef,
                      "Lift = lift_coef * r3")
      ->capture_default_str();
  gen_cmd->add_option("-o,--out", gen.out, "Output CSV")->required();

  TrainFlags train;
  CLI::App* train_cmd =
      app.add_subcommand("train", "Train a model by true-lift gradient descent");
  train_cmd->add_option("--config", config_file, "File of key = value lines");
  train_cmd->add_option("--data", train.data, "Training CSV")->required();
  train_cmd->add_option("--model", train.model, "Model kind")
      ->check(CLI::IsMember({"linear", "mlp"}))
      ->capture_default_str();
  train_cmd->add_option("--hidden", train.hidden, "MLP hidden units")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train_cmd->add_option("--activation", train.activation, "MLP activation")
      ->check(CLI::IsMember({"tanh", "relu"}))
      ->capture_default_str();
  train_cmd->add_option("--init", train.init,
                        "Initial parameters; linear models take "
                        "(c1, c2=offset, c3, ...)")
      ->delimiter(',');
  train_cmd->add_option("--lr", train.lr, "Step size")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  train_cmd->add_option("--steps", train.steps, "Gradient steps")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  train_cmd->add_option("--bins", train.bins, "Number of subsets N")
      ->check(CLI::Range(2, 1 << 20))
      ->capture_default_str();
  train_cmd->add_option("--snapshots", train.snapshots,
                        "Steps whose per-bin report is saved")
      ->delimiter(',')
      ->capture_default_str();
  train_cmd->add_option("--batch", train.batch,
                        "Minibatch size (0 = full batch)")
      ->capture_default_str();
  AddGradFlags(train_cmd, &train.rebin_every, &train.migration_scale,
               &train.max_sort);
  train_cmd->add_option("--seed", train.seed, "RNG seed")->capture_default_str();
  train_cmd->add_option("--out-dir", train.out_dir, "Output directory")
      ->capture_default_str();

  EvalFlags eval;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "Report the true-lift loss of a model");
  eval_cmd->add_option("--config", config_file, "File of key = value lines");
  eval_cmd->add_option("--data", eval.data, "Evaluation CSV")->required();
  eval_cmd->add_option("--params", eval.params, "Model JSON")->required();
  eval_cmd->add_option("--bins", eval.bins, "Number of subsets N")
      ->check(CLI::Range(1, 1 << 20))
      ->capture_default_str();
  eval_cmd->add_option("--max-sort", eval.max_sort,
                       "Subsample size above which cut values are estimated")
      ->capture_default_str();
  eval_cmd->add_option("--seed", eval.seed, "Cut subsample seed")
      ->capture_default_str();
  eval_cmd->add_option("-o,--out", eval.out, "Loss report CSV");

  GradcheckFlags check;
  CLI::App* check_cmd = app.add_subcommand(
      "gradcheck", "Compare the effective gradient with its oracles");
  check_cmd->add_option("--config", config_file, "File of key = value lines");
  check_cmd->add_option("--data", check.data,
                        "CSV to check on (default: synthetic)");
  check_cmd->add_option("--params", check.params,
                        "Model JSON producing the predictions");
  check_cmd->add_option("--rows", check.rows, "Synthetic rows")
      ->check(CLI::Range(std::size_t{2}, std::numeric_limits<std::size_t>::max()))
      ->capture_default_str();
  check_cmd->add_option("--seed", check.seed, "RNG seed")->capture_default_str();
  check_cmd->add_option("--bins", check.bins, "Number of subsets N")
      ->check(CLI::Range(2, 1 << 20))
      ->capture_default_str();
  check_cmd->add_option("--bias-rows", check.bias_rows,
                        "Rows checked by finite differences")
      ->capture_default_str();
  AddGradFlags(check_cmd, nullptr, &check.migration_scale, &check.max_sort);
  check_cmd->add_flag("--sabotage", check.sabotage,
                      "Flip the analytic gradient sign (checker self-test)");

  PlotFlags plot;
  CLI::App* plot_cmd = app.add_subcommand(
      "plot-data", "Export per-bin (mean prediction, lift) snapshot tables");
  plot_cmd->add_option("--config", config_file, "File of key = value lines");
  plot_cmd->add_option("--run-dir", plot.run_dir, "Directory written by train")
      ->required();
  plot_cmd->add_option("--steps", plot.steps,
                       "Snapshot steps to export (default: all)")
      ->delimiter(',');
  plot_cmd->add_option("--out-dir", plot.out_dir,
                       "Output directory (default: RUN_DIR/plot)");

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    // Prints help/version to `out` and parse errors to `err`.
    return app.exit(e, out, err) == 0 ? kOk : kValidationError;
  }

  try {
    if (gen_cmd->parsed()) return RunGen(*gen_cmd, gen, out);
    if (train_cmd->parsed()) return RunTrain(*train_cmd, train, out);
    if (eval_cmd->parsed()) return RunEval(*eval_cmd, eval, out);
    if (check_cmd->parsed()) return RunGradcheck(check, out);
    if (plot_cmd->parsed()) return RunPlotData(plot, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kValidationError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kValidationError;
}

}  // namespace truelift::cli
