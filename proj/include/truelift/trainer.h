#ifndef TRUELIFT_TRAINER_H_
#define TRUELIFT_TRAINER_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "truelift/dataset.h"
#include "truelift/errors.h"
#include "truelift/gradient.h"
#include "truelift/loss.h"
#include "truelift/models.h"

namespace truelift {

struct TrainConfig {
  double step_size = 0.1;
  int steps = 100;
  // Rows per minibatch, drawn without replacement each step. Unset means
  // full-batch descent.
  std::optional<std::size_t> batch;
  GradConfig grad;
  std::vector<int> snapshot_steps;
  std::uint64_t seed = 1;
};

void Validate(const TrainConfig& config);

// Entry t describes the parameters after t updates.
struct TraceEntry {
  int step = 0;
  double loss = 0.0;
  double bias_term = 0.0;
  double separation_term = 0.0;
  double mean_prediction = 0.0;
  double global_lift = 0.0;
  int n_bins = 0;
  std::vector<double> params;
};

struct Snapshot {
  int step = 0;
  LossReport report;
};

struct TrainTrace {
  std::vector<TraceEntry> entries;
  std::vector<Snapshot> snapshots;
  // Human-readable notes, e.g. a bin-count reduction after EmptyArmInBin.
  std::vector<std::string> events;

  const Snapshot* FindSnapshot(int step) const;
};

// Thrown when the loss or the parameters become non-finite. Carries the
// trace up to the failing step.
class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(const std::string& what, TrainTrace trace)
      : NumericError(what), trace_(std::move(trace)) {}
  const TrainTrace& trace() const { return trace_; }

 private:
  TrainTrace trace_;
};

struct TrainResult {
  Params params;
  TrainTrace trace;
};

// Plain gradient descent on the true-lift loss: predict, effective gradient,
// backprop, params -= step_size * gradient. The global lift is computed once
// from the full dataset. If a bin loses all rows of one arm mid-run, the bin
// count is halved once and training continues.
TrainResult Train(const ABDataset& dataset, const ModelSpec& spec,
                  const Params& init, const TrainConfig& config);

// step,loss,bias,separation,mean_pred,n_bins,<param names...>
void WriteTraceCsv(const TrainTrace& trace, const ModelSpec& spec,
                   const std::filesystem::path& path);
std::vector<std::string> ParamNames(const ModelSpec& spec);

}  // namespace truelift

#endif  // TRUELIFT_TRAINER_H_
