#ifndef TRUELIFT_LOSS_H_
#define TRUELIFT_LOSS_H_

#include <cstddef>
#include <filesystem>
#include <iterator>
#include <span>
#include <vector>

#include "truelift/binning.h"
#include "truelift/dataset.h"
#include "truelift/errors.h"

namespace truelift {

// Per-bin summary of the rows whose prediction falls in the bin.
struct BinStats {
  std::size_t size = 0;            // |S_n|
  std::size_t size_treatment = 0;  // |S_n^T|
  std::size_t size_control = 0;    // |S_n^C|
  double mean_pred = 0.0;          // P_n
  double mean_y_treatment = 0.0;
  double mean_y_control = 0.0;
  double lift = 0.0;               // mean_y_treatment - mean_y_control
};

struct SubsetStats {
  std::vector<BinStats> bins;  // bins[n - 1] is bin n
  std::size_t total_size = 0;
  double global_lift = 0.0;
  double mean_prediction = 0.0;
  // max_n | |S_n^T| / |S_n| - |S^T| / |S| |
  double max_arm_imbalance = 0.0;

  int n_bins() const { return static_cast<int>(bins.size()); }
  const BinStats& bin(int n) const { return bins[n - 1]; }
  BinStats& bin(int n) { return bins[n - 1]; }
};

// One row's contribution to the subset statistics.
struct StatRecord {
  int bin;
  Arm arm;
  double outcome;
  double prediction;
};

// Single-pass accumulator of per-bin sums. Partial accumulators over row
// chunks can be merged; the merge is order independent up to rounding.
class SubsetAccumulator {
 public:
  explicit SubsetAccumulator(int n_bins);

  void Add(const StatRecord& r) { Add(r.bin, r.arm, r.outcome, r.prediction); }
  void Add(int bin, Arm arm, double outcome, double prediction) {
    if (bin < 1 || bin > static_cast<int>(sums_.size())) {
      throw ValidationError("bin index out of range");
    }
    Sums& s = sums_[bin - 1];
    s.pred += prediction;
    if (arm == Arm::kTreatment) {
      ++s.count_t;
      s.y_t += outcome;
    } else {
      ++s.count_c;
      s.y_c += outcome;
    }
  }
  void Merge(const SubsetAccumulator& other);

  // Throws EmptyArmInBin naming the first bin without treatment or control
  // rows.
  SubsetStats Finish() const;

 private:
  struct Sums {
    std::size_t count_t = 0;
    std::size_t count_c = 0;
    double pred = 0.0;
    double y_t = 0.0;
    double y_c = 0.0;
  };
  std::vector<Sums> sums_;
};

// Consumes the range exactly once.
template <std::input_iterator It, std::sentinel_for<It> End>
SubsetStats AccumulateSubsetStats(It first, End last, int n_bins) {
  SubsetAccumulator acc(n_bins);
  for (; first != last; ++first) acc.Add(*first);
  return acc.Finish();
}

// mean(y | treatment) - mean(y | control) over the whole dataset.
double GlobalLift(const ABDataset& dataset);

SubsetStats ComputeSubsetStats(const ABDataset& dataset,
                               std::span<const double> predictions,
                               std::span<const int> bins, int n_bins);

// Oracle-only: statistics whose lifts are means of the known per-row true
// lifts instead of arm differences.
SubsetStats ComputeTrueLiftStats(const ABDataset& dataset,
                                 std::span<const double> predictions,
                                 std::span<const int> bins, int n_bins);

struct LossRow {
  int bin = 0;
  BinStats stats;
  double weight = 0.0;      // |S_n| / |S|
  double bias = 0.0;        // weight * (P_n - lift_n)^2
  double separation = 0.0;  // weight * (lift_n - global_lift)^2
};

struct LossReport {
  double loss = 0.0;  // bias_term - separation_term
  double bias_term = 0.0;
  double separation_term = 0.0;
  double global_lift = 0.0;
  std::size_t total_size = 0;
  int n_bins = 0;
  std::vector<LossRow> rows;
};

// L = sum_n |S_n|/|S| [ (P_n - l_n)^2 - (l_n - l)^2 ].
LossReport TrueLiftLoss(const SubsetStats& stats);

// P_{bin(i)} for every row.
std::vector<double> DiscretizedPredictions(const SubsetStats& stats,
                                           std::span<const int> bins);

// mean_i (prediction_i - true_lift_i)^2. Oracle-only; needs known lifts.
double PointwiseMse(std::span<const double> discrete_predictions,
                    std::span<const double> true_lifts);

struct VarianceParts {
  double total = 0.0;
  double within = 0.0;
  double between = 0.0;
};

// Population variance split by group label. Labels are arbitrary integers.
VarianceParts DecomposeVariance(std::span<const double> values,
                                std::span<const int> groups);

struct Evaluation {
  LossReport report;
  int requested_bins = 0;
  // Smaller than requested_bins when the predictions have too few distinct
  // values to fill every bin.
  int used_bins = 0;
  CutPoints cuts;
};

// Bins rows by their predictions and reports the loss. Constant or
// low-cardinality predictions fall back to as many bins as they have
// distinct values.
Evaluation EvaluatePredictions(const ABDataset& dataset,
                               std::span<const double> predictions,
                               int n_bins,
                               std::size_t max_sort = kDefaultMaxSort,
                               std::uint64_t seed = kDefaultCutSeed);

// CSV: bin,size,size_t,size_c,mean_pred,mean_y_t,mean_y_c,lift followed by
// a '# loss=...' summary line.
void WriteLossReportCsv(const LossReport& report,
                        const std::filesystem::path& path);
LossReport ReadLossReportCsv(const std::filesystem::path& path);

}  // namespace truelift

#endif  // TRUELIFT_LOSS_H_
