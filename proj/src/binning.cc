#include "truelift/binning.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "truelift/errors.h"

namespace truelift {

CutPoints::CutPoints(std::vector<double> cuts) : cuts_(std::move(cuts)) {
  for (std::size_t i = 0; i < cuts_.size(); ++i) {
    if (!std::isfinite(cuts_[i])) throw ValidationError("non-finite cut value");
    if (i > 0 && !(cuts_[i - 1] < cuts_[i])) {
      throw ValidationError("cut values must be strictly increasing");
    }
  }
}

CutPoints ComputeCuts(std::span<const double> predictions, int n_bins,
                      std::size_t max_sort, std::uint64_t seed) {
  if (predictions.empty()) throw ValidationError("no predictions to bin");
  if (n_bins < 1) throw ValidationError("n_bins must be at least 1");
  for (double p : predictions) {
    if (!std::isfinite(p)) throw ValidationError("non-finite prediction");
  }
  if (n_bins == 1) return CutPoints();

  std::vector<double> sorted;
  if (max_sort > 0 && predictions.size() > max_sort) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, predictions.size() - 1);
    sorted.resize(max_sort);
    for (double& v : sorted) v = predictions[pick(rng)];
  } else {
    sorted.assign(predictions.begin(), predictions.end());
  }
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size();

  // Split positions j where sorted[j-1] < sorted[j]; a cut at the midpoint
  // separates the first j values from the rest without ties.
  std::vector<std::size_t> splits;
  for (std::size_t j = 1; j < m; ++j) {
    if (sorted[j - 1] < sorted[j]) splits.push_back(j);
  }
  const std::size_t needed = static_cast<std::size_t>(n_bins) - 1;
  if (splits.size() < needed) {
    throw DegeneratePredictions(
        "degenerate predictions: " + std::to_string(splits.size() + 1) +
        " distinct values cannot fill " + std::to_string(n_bins) + " bins");
  }

  std::vector<double> cuts;
  cuts.reserve(needed);
  std::size_t lo = 0;
  for (std::size_t n = 1; n <= needed; ++n) {
    // Leave enough split positions for the remaining cuts.
    const std::size_t hi = splits.size() - (needed - n) - 1;
    const double target =
        static_cast<double>(n) * static_cast<double>(m) / n_bins;
    auto it = std::lower_bound(splits.begin() + lo, splits.begin() + hi + 1,
                               target, [](std::size_t j, double t) {
                                 return static_cast<double>(j) < t;
                               });
    std::size_t k = static_cast<std::size_t>(it - splits.begin());
    if (k > hi) k = hi;
    if (k > lo && std::abs(static_cast<double>(splits[k - 1]) - target) <=
                      std::abs(static_cast<double>(splits[k]) - target)) {
      --k;
    }
    const std::size_t j = splits[k];
    cuts.push_back(0.5 * (sorted[j - 1] + sorted[j]));
    lo = k + 1;
  }
  return CutPoints(std::move(cuts));
}

int BinOf(double prediction, const CutPoints& cuts) {
  const auto values = cuts.values();
  // First cut >= p; everything before it is strictly below p.
  const auto it = std::lower_bound(values.begin(), values.end(), prediction);
  return 1 + static_cast<int>(it - values.begin());
}

std::vector<int> AssignBins(std::span<const double> predictions,
                            const CutPoints& cuts) {
  std::vector<int> bins(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    bins[i] = BinOf(predictions[i], cuts);
  }
  return bins;
}

InnerCuts ComputeInnerCuts(const CutPoints& cuts, double single_cut_width) {
  const int n_cuts = cuts.n_bins() - 1;
  if (n_cuts < 1) throw ValidationError("no boundaries: n_bins must be >= 2");
  std::vector<InnerCut> bounds(n_cuts);
  if (n_cuts == 1) {
    if (!(single_cut_width > 0.0) || !std::isfinite(single_cut_width)) {
      throw ValidationError("single-cut segment width must be positive");
    }
    bounds[0] = {cuts.at(1) - single_cut_width / 6.0,
                 cuts.at(1) + single_cut_width / 6.0};
    return InnerCuts(std::move(bounds));
  }
  for (int n = 1; n <= n_cuts; ++n) {
    const double c = cuts.at(n);
    const double minus = n > 1 ? (2.0 / 3.0) * c + (1.0 / 3.0) * cuts.at(n - 1)
                               : c - (cuts.at(2) - c) / 3.0;
    const double plus = n < n_cuts
                            ? (2.0 / 3.0) * c + (1.0 / 3.0) * cuts.at(n + 1)
                            : c + (c - cuts.at(n - 1)) / 3.0;
    bounds[n - 1] = {minus, plus};
  }
  return InnerCuts(std::move(bounds));
}

InnerCuts ComputeInnerCuts(const CutPoints& cuts,
                           std::span<const double> predictions) {
  if (cuts.n_bins() != 2) return ComputeInnerCuts(cuts, 0.0);
  double width = InterquartileRange(predictions);
  if (!(width > 0.0)) {
    // Heavily tied predictions; fall back to the full range.
    const auto [lo, hi] = std::minmax_element(predictions.begin(),
                                              predictions.end());
    width = *hi - *lo;
  }
  return ComputeInnerCuts(cuts, width);
}

Segment SegmentOf(double prediction, int bin, const CutPoints& cuts,
                  const InnerCuts& inner) {
  const int n_bins = cuts.n_bins();
  if (bin < n_bins && prediction > inner.minus(bin) &&
      prediction <= cuts.at(bin)) {
    return Segment::kTop;
  }
  if (bin > 1 && prediction > cuts.at(bin - 1) &&
      prediction < inner.plus(bin - 1)) {
    return Segment::kBottom;
  }
  return Segment::kMiddle;
}

std::vector<Segment> AssignSegments(std::span<const double> predictions,
                                    std::span<const int> bins,
                                    const CutPoints& cuts,
                                    const InnerCuts& inner) {
  std::vector<Segment> segments(predictions.size(), Segment::kMiddle);
  if (cuts.n_bins() == 1) return segments;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    segments[i] = SegmentOf(predictions[i], bins[i], cuts, inner);
  }
  return segments;
}

Binning MakeBinning(std::span<const double> predictions, int n_bins,
                    std::size_t max_sort, std::uint64_t seed) {
  Binning binning{ComputeCuts(predictions, n_bins, max_sort, seed), {}};
  if (n_bins >= 2) binning.inner = ComputeInnerCuts(binning.cuts, predictions);
  return binning;
}

BinAssignment Assign(std::span<const double> predictions,
                     const Binning& binning) {
  BinAssignment out;
  out.bin = AssignBins(predictions, binning.cuts);
  out.segment =
      AssignSegments(predictions, out.bin, binning.cuts, binning.inner);
  return out;
}

double InterquartileRange(std::span<const double> values) {
  if (values.empty()) return 0.0;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  };
  return quantile(0.75) - quantile(0.25);
}

}  // namespace truelift
