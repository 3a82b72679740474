#ifndef TRUELIFT_GRADCHECK_H_
#define TRUELIFT_GRADCHECK_H_

#include <cstddef>
#include <cstdint>
#include <span>

#include "truelift/binning.h"
#include "truelift/dataset.h"
#include "truelift/gradient.h"
#include "truelift/loss.h"

// Reference computations that validate the effective gradient without
// sharing its closed forms: every value here comes from re-evaluating the
// loss on perturbed statistics.
namespace truelift::gradcheck {

// Central difference of L with respect to p_i, with every row's bin label
// frozen. L is quadratic in p_i under frozen labels, so any `eps` is exact
// up to rounding.
double BiasFiniteDifference(const ABDataset& dataset,
                            std::span<const double> predictions,
                            std::span<const int> bins, int n_bins,
                            std::size_t row, double global_lift,
                            double eps = 1e-4);

struct RecomputedMigration {
  double slope = 0.0;      // (L_after - L_before) / dp
  double lift_part = 0.0;  // loss change through the bin lifts alone
  double size_part = 0.0;  // loss change through the bin sizes alone
  double shift = 0.0;      // dp
  // |lift_part| + |size_part| over |dp|; the natural scale of `slope`.
  double magnitude() const;
};

// Moves the row's weight between bins and recomputes L. Per-arm means are
// shifted using the pre-move counts, P_n and the global lift stay fixed, and
// the two channels are applied one at a time so the result is the first-order
// change the analytic migration term models.
RecomputedMigration RecomputeMigration(const SubsetStats& stats,
                                       const Binning& binning,
                                       const MigratingRow& row,
                                       Direction direction, double scale);

// L after moving the row with both channels applied together; differs from
// the channel-separated value by the sizes-times-lifts cross term.
double JointMoveLoss(const SubsetStats& stats, const MigratingRow& row,
                     Direction direction);

struct Config {
  int n_bins = 5;
  double migration_step_scale = 0.5;
  std::size_t max_sort = kDefaultMaxSort;
  std::size_t bias_rows = 100;
  double eps = 1e-4;
  double bias_tolerance = 1e-6;
  double migration_tolerance = 1e-10;
  std::uint64_t seed = 7;
  // Flips the sign of the analytic values so the checker can be seen to
  // fail. Test hook only.
  bool sabotage = false;
};

struct Report {
  std::size_t bias_rows_checked = 0;
  std::size_t migration_rows_checked = 0;
  double max_bias_rel_error = 0.0;
  double max_migration_rel_error = 0.0;
  bool bias_ok = false;
  bool migration_ok = false;
  bool passed() const { return bias_ok && migration_ok; }
};

// Bias check on `bias_rows` randomly chosen rows, migration check on every
// top- or bottom-segment row.
Report Run(const ABDataset& dataset, std::span<const double> predictions,
           const Config& config);

// |a - b| / max(|a|, |b|, scale), 0 when all are zero.
double RelativeError(double a, double b, double scale = 0.0);

}  // namespace truelift::gradcheck

#endif  // TRUELIFT_GRADCHECK_H_
