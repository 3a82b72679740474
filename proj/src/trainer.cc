#include "truelift/trainer.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "text_util.h"

namespace truelift {
namespace {

bool AllFinite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

}  // namespace

void Validate(const TrainConfig& config) {
  if (!(config.step_size >= 0.0) || !std::isfinite(config.step_size)) {
    throw ValidationError("step size must be a finite non-negative number");
  }
  if (config.steps < 0) throw ValidationError("steps must be non-negative");
  if (config.batch && *config.batch < 2) {
    throw ValidationError("batch size must be at least 2");
  }
  for (std::size_t i = 0; i < config.snapshot_steps.size(); ++i) {
    if (config.snapshot_steps[i] < 0) {
      throw ValidationError("snapshot steps must be non-negative");
    }
  }
  Validate(config.grad);
}

const Snapshot* TrainTrace::FindSnapshot(int step) const {
  for (const Snapshot& s : snapshots) {
    if (s.step == step) return &s;
  }
  return nullptr;
}

TrainResult Train(const ABDataset& dataset, const ModelSpec& spec,
                  const Params& init, const TrainConfig& config) {
  Validate(config);
  Validate(spec, init);

  GradConfig grad = config.grad;
  const std::size_t rows_per_step =
      config.batch ? std::min(*config.batch, dataset.size()) : dataset.size();
  const std::size_t min_arm =
      std::min(dataset.treatment_count(), dataset.control_count());
  if (static_cast<std::size_t>(grad.n_bins) > min_arm) {
    throw EmptyArmInBin(
        static_cast<int>(min_arm) + 1,
        "EmptyArmInBin: " + std::to_string(grad.n_bins) +
            " bins cannot all hold treatment and control rows when one arm "
            "has only " + std::to_string(min_arm) +
            " rows; use a smaller number of bins");
  }

  const double global_lift = GlobalLift(dataset);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> all_rows(dataset.size());
  std::iota(all_rows.begin(), all_rows.end(), 0);

  TrainResult result{init, {}};
  TrainTrace& trace = result.trace;
  Params& params = result.params;
  BinningCache cache;
  bool halved = false;

  for (int step = 0; step <= config.steps; ++step) {
    std::optional<ABDataset> batch;
    if (rows_per_step < dataset.size()) {
      std::vector<std::size_t> picked;
      picked.reserve(rows_per_step);
      std::sample(all_rows.begin(), all_rows.end(), std::back_inserter(picked),
                  rows_per_step, rng);
      batch.emplace(dataset.Subset(picked));
    }
    const ABDataset& data = batch ? *batch : dataset;
    const std::vector<double> predictions = Predict(spec, params, data);

    GradientResult gr;
    try {
      gr = EffectiveGradient(data, predictions, grad, global_lift, &cache);
    } catch (const EmptyArmInBin& e) {
      if (step == 0) {
        throw EmptyArmInBin(e.bin(), std::string(e.what()) +
                                         " (at the initial parameters)");
      }
      if (halved || grad.n_bins / 2 < 2) throw;
      const int before = grad.n_bins;
      grad.n_bins /= 2;
      halved = true;
      cache.Invalidate();
      trace.events.push_back("step " + std::to_string(step) + ": bin " +
                             std::to_string(e.bin()) +
                             " lost an arm; n_bins " + std::to_string(before) +
                             " -> " + std::to_string(grad.n_bins));
      gr = EffectiveGradient(data, predictions, grad, global_lift, &cache);
    }

    LossReport report = TrueLiftLoss(gr.stats);
    TraceEntry entry;
    entry.step = step;
    entry.loss = report.loss;
    entry.bias_term = report.bias_term;
    entry.separation_term = report.separation_term;
    entry.mean_prediction = gr.stats.mean_prediction;
    entry.global_lift = global_lift;
    entry.n_bins = grad.n_bins;
    entry.params = params.values;
    trace.entries.push_back(std::move(entry));
    if (!std::isfinite(report.loss)) {
      throw TrainingDiverged(
          "non-finite loss at step " + std::to_string(step), trace);
    }
    if (std::find(config.snapshot_steps.begin(), config.snapshot_steps.end(),
                  step) != config.snapshot_steps.end()) {
      trace.snapshots.push_back({step, std::move(report)});
    }
    if (step == config.steps) break;

    const std::vector<double> param_grad =
        Backprop(spec, params, data, gr.point_gradient);
    for (std::size_t k = 0; k < params.values.size(); ++k) {
      params.values[k] -= config.step_size * param_grad[k];
    }
    if (!AllFinite(params.values)) {
      throw TrainingDiverged(
          "non-finite parameters after step " + std::to_string(step + 1),
          trace);
    }
  }
  return result;
}

std::vector<std::string> ParamNames(const ModelSpec& spec) {
  std::vector<std::string> names;
  if (spec.kind == ModelKind::kLinear) {
    for (std::size_t j = 0; j < spec.dim; ++j) {
      names.push_back("w_f" + std::to_string(j));
    }
    names.push_back("offset");
    return names;
  }
  const std::size_t h = spec.hidden.value_or(0);
  for (std::size_t k = 0; k < h; ++k) {
    for (std::size_t j = 0; j < spec.dim; ++j) {
      names.push_back("W1_" + std::to_string(k) + "_" + std::to_string(j));
    }
  }
  for (std::size_t k = 0; k < h; ++k) names.push_back("b1_" + std::to_string(k));
  for (std::size_t k = 0; k < h; ++k) names.push_back("w2_" + std::to_string(k));
  names.push_back("b2");
  return names;
}

void WriteTraceCsv(const TrainTrace& trace, const ModelSpec& spec,
                   const std::filesystem::path& path) {
  using internal::AppendNumber;
  std::string out = "step,loss,bias,separation,mean_pred,n_bins";
  for (const std::string& name : ParamNames(spec)) out += "," + name;
  out += '\n';
  for (const TraceEntry& e : trace.entries) {
    out += std::to_string(e.step) + ",";
    AppendNumber(out, e.loss);
    out += ',';
    AppendNumber(out, e.bias_term);
    out += ',';
    AppendNumber(out, e.separation_term);
    out += ',';
    AppendNumber(out, e.mean_prediction);
    out += "," + std::to_string(e.n_bins);
    for (double v : e.params) {
      out += ',';
      AppendNumber(out, v);
    }
    out += '\n';
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error("cannot open '" + path.string() + "' for writing");
  file << out;
  if (!file) throw Error("write to '" + path.string() + "' failed");
}

}  // namespace truelift
