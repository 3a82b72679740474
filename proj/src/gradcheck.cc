#include "truelift/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "truelift/errors.h"

namespace truelift::gradcheck {
namespace {

int Destination(const MigratingRow& row, Direction direction) {
  return direction == Direction::kUp ? row.bin + 1 : row.bin - 1;
}

// Shifts the per-arm means of the source and destination bins as if the
// row's weight left one and joined the other, using pre-move counts.
void ShiftLifts(SubsetStats& stats, const MigratingRow& row, int to) {
  BinStats& src = stats.bin(row.bin);
  BinStats& dst = stats.bin(to);
  if (row.arm == Arm::kTreatment) {
    src.mean_y_treatment +=
        (src.mean_y_treatment - row.outcome) /
        static_cast<double>(src.size_treatment);
    dst.mean_y_treatment +=
        (row.outcome - dst.mean_y_treatment) /
        static_cast<double>(dst.size_treatment);
  } else {
    src.mean_y_control +=
        (src.mean_y_control - row.outcome) /
        static_cast<double>(src.size_control);
    dst.mean_y_control +=
        (row.outcome - dst.mean_y_control) /
        static_cast<double>(dst.size_control);
  }
  src.lift = src.mean_y_treatment - src.mean_y_control;
  dst.lift = dst.mean_y_treatment - dst.mean_y_control;
}

void ShiftSizes(SubsetStats& stats, const MigratingRow& row, int to) {
  stats.bin(row.bin).size -= 1;
  stats.bin(to).size += 1;
}

}  // namespace

double RecomputedMigration::magnitude() const {
  return (std::abs(lift_part) + std::abs(size_part)) / std::abs(shift);
}

double RelativeError(double a, double b, double scale) {
  const double denom = std::max({std::abs(a), std::abs(b), std::abs(scale)});
  if (denom == 0.0) return 0.0;
  return std::abs(a - b) / denom;
}

double BiasFiniteDifference(const ABDataset& dataset,
                            std::span<const double> predictions,
                            std::span<const int> bins, int n_bins,
                            std::size_t row, double global_lift, double eps) {
  std::vector<double> shifted(predictions.begin(), predictions.end());
  auto loss_at = [&](double p) {
    shifted[row] = p;
    SubsetStats stats = ComputeSubsetStats(dataset, shifted, bins, n_bins);
    stats.global_lift = global_lift;
    return TrueLiftLoss(stats).loss;
  };
  const double up = loss_at(predictions[row] + eps);
  const double down = loss_at(predictions[row] - eps);
  return (up - down) / (2.0 * eps);
}

RecomputedMigration RecomputeMigration(const SubsetStats& stats,
                                       const Binning& binning,
                                       const MigratingRow& row,
                                       Direction direction, double scale) {
  RecomputedMigration out;
  // The shift is read straight off the cut geometry.
  if (direction == Direction::kUp) {
    if (row.bin >= binning.n_bins()) {
      throw ContractViolation("no bin above the last bin");
    }
    const double top_width = binning.cuts.at(row.bin) -
                             binning.inner.at(row.bin).minus;
    out.shift = scale * top_width;
  } else {
    if (row.bin <= 1) throw ContractViolation("no bin below the first bin");
    const double bottom_width = binning.inner.at(row.bin - 1).plus -
                                binning.cuts.at(row.bin - 1);
    out.shift = -scale * bottom_width;
  }
  const int to = Destination(row, direction);
  const double before = TrueLiftLoss(stats).loss;

  SubsetStats lifts_moved = stats;
  ShiftLifts(lifts_moved, row, to);
  out.lift_part = TrueLiftLoss(lifts_moved).loss - before;

  SubsetStats sizes_moved = stats;
  ShiftSizes(sizes_moved, row, to);
  out.size_part = TrueLiftLoss(sizes_moved).loss - before;

  out.slope = (out.lift_part + out.size_part) / out.shift;
  return out;
}

double JointMoveLoss(const SubsetStats& stats, const MigratingRow& row,
                     Direction direction) {
  const int to = Destination(row, direction);
  SubsetStats moved = stats;
  ShiftLifts(moved, row, to);
  ShiftSizes(moved, row, to);
  return TrueLiftLoss(moved).loss;
}

Report Run(const ABDataset& dataset, std::span<const double> predictions,
           const Config& config) {
  GradConfig grad;
  grad.n_bins = config.n_bins;
  grad.migration_step_scale = config.migration_step_scale;
  grad.max_sort = config.max_sort;
  const double global_lift = GlobalLift(dataset);
  const GradientResult result =
      EffectiveGradient(dataset, predictions, grad, global_lift);
  const double sign = config.sabotage ? -1.0 : 1.0;

  Report report;
  std::vector<std::size_t> rows(dataset.size());
  std::iota(rows.begin(), rows.end(), 0);
  std::mt19937_64 rng(config.seed);
  std::shuffle(rows.begin(), rows.end(), rng);
  rows.resize(std::min(rows.size(), config.bias_rows));
  for (std::size_t i : rows) {
    const double analytic =
        sign * BiasGradient(result.assignment.bin[i], result.stats);
    const double numeric =
        BiasFiniteDifference(dataset, predictions, result.assignment.bin,
                             config.n_bins, i, global_lift, config.eps);
    report.max_bias_rel_error =
        std::max(report.max_bias_rel_error, RelativeError(analytic, numeric));
    ++report.bias_rows_checked;
  }

  const std::vector<BinPartials> partials = LossPartials(result.stats);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Segment seg = result.assignment.segment[i];
    if (seg == Segment::kMiddle) continue;
    const Direction dir =
        seg == Segment::kTop ? Direction::kUp : Direction::kDown;
    const MigratingRow row{result.assignment.bin[i], dataset.arm(i),
                           dataset.outcome(i)};
    const double analytic =
        sign * MigrationTerm(row, dir, result.stats, partials, result.binning,
                             config.migration_step_scale);
    const RecomputedMigration oracle = RecomputeMigration(
        result.stats, result.binning, row, dir, config.migration_step_scale);
    report.max_migration_rel_error =
        std::max(report.max_migration_rel_error,
                 RelativeError(analytic, oracle.slope, oracle.magnitude()));
    ++report.migration_rows_checked;
  }
  report.bias_ok = report.bias_rows_checked > 0 &&
                   report.max_bias_rel_error <= config.bias_tolerance;
  report.migration_ok = report.migration_rows_checked > 0 &&
                        report.max_migration_rel_error <=
                            config.migration_tolerance;
  return report;
}

}  // namespace truelift::gradcheck
