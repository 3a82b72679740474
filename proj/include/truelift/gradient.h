#ifndef TRUELIFT_GRADIENT_H_
#define TRUELIFT_GRADIENT_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "truelift/binning.h"
#include "truelift/dataset.h"
#include "truelift/loss.h"

namespace truelift {

struct GradConfig {
  int n_bins = 5;
  // Fraction of the segment width used as the finite prediction shift when
  // a row migrates to a neighbouring bin.
  double migration_step_scale = 0.5;
  // Recompute cuts and inner cuts every this many gradient evaluations.
  int rebin_every = 1;
  std::size_t max_sort = kDefaultMaxSort;
  std::uint64_t cut_seed = kDefaultCutSeed;
};

void Validate(const GradConfig& config);

// 2 (P_n - l_n) / |S| for a row in `bin`.
double BiasGradient(int bin, const SubsetStats& stats);

// Derivatives of L with respect to one bin's lift and size, with P_n, the
// global lift and |S| held fixed.
struct BinPartials {
  double d_lift = 0.0;
  double d_size = 0.0;
};

std::vector<BinPartials> LossPartials(const SubsetStats& stats);

enum class Direction { kUp, kDown };

// What migration needs to know about a row.
struct MigratingRow {
  int bin;
  Arm arm;
  double outcome;
};

// Signed prediction shift that carries a row across the upper (kUp) or lower
// (kDown) boundary of `bin`: positive for kUp, negative for kDown.
double MigrationShift(int bin, Direction direction, const Binning& binning,
                      double scale);

// (1 / dp) sum_m (dL/dl_m * dl_m + dL/d|S_m| * d|S_m|) for the row moving to
// the neighbouring bin. Throws ContractViolation for an up-move out of the
// last bin or a down-move out of the first.
double MigrationTerm(const MigratingRow& row, Direction direction,
                     const SubsetStats& stats,
                     std::span<const BinPartials> partials,
                     const Binning& binning, double scale);
double MigrationTerm(const MigratingRow& row, Direction direction,
                     const SubsetStats& stats, const Binning& binning,
                     double scale);

// Binning reused across calls until it is rebin_every evaluations old.
struct BinningCache {
  std::optional<Binning> binning;
  int uses = 0;
  int n_bins = 0;

  void Invalidate() {
    binning.reset();
    uses = 0;
  }
};

struct GradientResult {
  std::vector<double> point_gradient;  // dL/dp_i
  BinAssignment assignment;
  SubsetStats stats;  // global_lift replaced by the cached value
  Binning binning;
  bool rebinned = false;
};

// Bins the predictions (or reuses `cache`), accumulates subset statistics in
// one pass over the rows, then assembles dL/dp_i per row in a second pass:
// bias gradient everywhere plus the migration term for top- and
// bottom-segment rows. Propagates EmptyArmInBin and DegeneratePredictions.
GradientResult EffectiveGradient(const ABDataset& dataset,
                                 std::span<const double> predictions,
                                 const GradConfig& config,
                                 double cached_global_lift,
                                 BinningCache* cache = nullptr);

}  // namespace truelift

#endif  // TRUELIFT_GRADIENT_H_
