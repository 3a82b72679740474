#include "truelift/gradient.h"

#include <cmath>
#include <string>

#include "truelift/errors.h"

namespace truelift {

void Validate(const GradConfig& config) {
  if (config.n_bins < 2) throw ValidationError("n_bins must be at least 2");
  if (!(config.migration_step_scale > 0.0) ||
      !std::isfinite(config.migration_step_scale)) {
    throw ValidationError("migration_step_scale must be positive");
  }
  if (config.rebin_every < 1) {
    throw ValidationError("rebin_every must be a positive integer");
  }
}

double BiasGradient(int bin, const SubsetStats& stats) {
  const BinStats& b = stats.bin(bin);
  return 2.0 * (b.mean_pred - b.lift) / static_cast<double>(stats.total_size);
}

std::vector<BinPartials> LossPartials(const SubsetStats& stats) {
  const double total = static_cast<double>(stats.total_size);
  std::vector<BinPartials> out(stats.bins.size());
  for (std::size_t n = 0; n < stats.bins.size(); ++n) {
    const BinStats& b = stats.bins[n];
    const double bias = b.mean_pred - b.lift;
    const double separation = b.lift - stats.global_lift;
    out[n].d_lift = static_cast<double>(b.size) / total *
                    (-2.0 * bias - 2.0 * separation);
    out[n].d_size = (bias * bias - separation * separation) / total;
  }
  return out;
}

double MigrationShift(int bin, Direction direction, const Binning& binning,
                      double scale) {
  const int n_bins = binning.n_bins();
  if (direction == Direction::kUp) {
    if (bin >= n_bins) {
      throw ContractViolation("no upward migration out of the last bin");
    }
    return scale * (binning.cuts.at(bin) - binning.inner.minus(bin));
  }
  if (bin <= 1) {
    throw ContractViolation("no downward migration out of the first bin");
  }
  return scale * (binning.cuts.at(bin - 1) - binning.inner.plus(bin - 1));
}

double MigrationTerm(const MigratingRow& row, Direction direction,
                     const SubsetStats& stats,
                     std::span<const BinPartials> partials,
                     const Binning& binning, double scale) {
  const double shift = MigrationShift(row.bin, direction, binning, scale);
  const int from = row.bin;
  const int to = direction == Direction::kUp ? from + 1 : from - 1;
  const BinStats& src = stats.bin(from);
  const BinStats& dst = stats.bin(to);

  double lift_from = 0.0;
  double lift_to = 0.0;
  if (row.arm == Arm::kTreatment) {
    lift_from = (src.mean_y_treatment - row.outcome) /
                static_cast<double>(src.size_treatment);
    lift_to = (row.outcome - dst.mean_y_treatment) /
              static_cast<double>(dst.size_treatment);
  } else {
    lift_from = (row.outcome - src.mean_y_control) /
                static_cast<double>(src.size_control);
    lift_to = (dst.mean_y_control - row.outcome) /
              static_cast<double>(dst.size_control);
  }
  const BinPartials& pf = partials[from - 1];
  const BinPartials& pt = partials[to - 1];
  const double delta_loss =
      pf.d_lift * lift_from + pt.d_lift * lift_to - pf.d_size + pt.d_size;
  return delta_loss / shift;
}

double MigrationTerm(const MigratingRow& row, Direction direction,
                     const SubsetStats& stats, const Binning& binning,
                     double scale) {
  const std::vector<BinPartials> partials = LossPartials(stats);
  return MigrationTerm(row, direction, stats, partials, binning, scale);
}

GradientResult EffectiveGradient(const ABDataset& dataset,
                                 std::span<const double> predictions,
                                 const GradConfig& config,
                                 double cached_global_lift,
                                 BinningCache* cache) {
  Validate(config);
  if (predictions.size() != dataset.size()) {
    throw ValidationError("predictions must align with the dataset");
  }
  GradientResult result;
  const bool reuse = cache != nullptr && cache->binning.has_value() &&
                     cache->n_bins == config.n_bins &&
                     cache->uses < config.rebin_every;
  if (reuse) {
    result.binning = *cache->binning;
    ++cache->uses;
  } else {
    result.binning = MakeBinning(predictions, config.n_bins, config.max_sort,
                                 config.cut_seed);
    result.rebinned = true;
    if (cache != nullptr) {
      cache->binning = result.binning;
      cache->n_bins = config.n_bins;
      cache->uses = 1;
    }
  }
  const Binning& binning = result.binning;
  const std::size_t n_rows = dataset.size();
  const auto outcomes = dataset.outcomes();
  const auto arms = dataset.arms();

  // Pass 1: bin labels and subset sums.
  result.assignment.bin.resize(n_rows);
  SubsetAccumulator acc(config.n_bins);
  for (std::size_t i = 0; i < n_rows; ++i) {
    const int bin = BinOf(predictions[i], binning.cuts);
    result.assignment.bin[i] = bin;
    acc.Add(bin, arms[i], outcomes[i], predictions[i]);
  }
  result.stats = acc.Finish();
  result.stats.global_lift = cached_global_lift;

  const SubsetStats& stats = result.stats;
  const std::vector<BinPartials> partials = LossPartials(stats);
  std::vector<double> bias(config.n_bins);
  for (int n = 1; n <= config.n_bins; ++n) bias[n - 1] = BiasGradient(n, stats);

  // Pass 2: segment labels and per-row gradient.
  result.assignment.segment.resize(n_rows);
  result.point_gradient.resize(n_rows);
  const double scale = config.migration_step_scale;
  for (std::size_t i = 0; i < n_rows; ++i) {
    const int bin = result.assignment.bin[i];
    const Segment seg =
        SegmentOf(predictions[i], bin, binning.cuts, binning.inner);
    result.assignment.segment[i] = seg;
    double g = bias[bin - 1];
    if (seg != Segment::kMiddle) {
      const Direction dir =
          seg == Segment::kTop ? Direction::kUp : Direction::kDown;
      g += MigrationTerm({bin, arms[i], outcomes[i]}, dir, stats, partials,
                         binning, scale);
    }
    result.point_gradient[i] = g;
  }
  return result;
}

}  // namespace truelift
