#ifndef TRUELIFT_BINNING_H_
#define TRUELIFT_BINNING_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace truelift {

// Bin boundaries C_1 < ... < C_{N-1}. Bin n (1-based) holds predictions in
// (C_{n-1}, C_n]; bin 1 is unbounded below and bin N unbounded above.
class CutPoints {
 public:
  // Throws ValidationError unless `cuts` is strictly increasing and finite.
  explicit CutPoints(std::vector<double> cuts = {});

  int n_bins() const { return static_cast<int>(cuts_.size()) + 1; }
  // 1-based boundary index, 1 <= n <= n_bins() - 1.
  double at(int n) const { return cuts_[n - 1]; }
  std::span<const double> values() const { return cuts_; }

  friend bool operator==(const CutPoints&, const CutPoints&) = default;

 private:
  std::vector<double> cuts_;
};

// Segment boundaries around each cut: C_n^- < C_n < C_n^+.
struct InnerCut {
  double minus;
  double plus;
};

class InnerCuts {
 public:
  InnerCuts() = default;
  explicit InnerCuts(std::vector<InnerCut> bounds) : bounds_(std::move(bounds)) {}

  // 1-based boundary index.
  const InnerCut& at(int n) const { return bounds_[n - 1]; }
  double minus(int n) const { return at(n).minus; }
  double plus(int n) const { return at(n).plus; }
  std::size_t size() const { return bounds_.size(); }

 private:
  std::vector<InnerCut> bounds_;
};

enum class Segment : std::uint8_t { kBottom = 0, kMiddle = 1, kTop = 2 };

struct BinAssignment {
  std::vector<int> bin;  // 1-based
  std::vector<Segment> segment;
};

inline constexpr std::size_t kDefaultMaxSort = 100000;
inline constexpr std::uint64_t kDefaultCutSeed = 0x5eed;

// Equal-frequency cuts. When there are more than `max_sort` predictions the
// quantiles come from a seeded uniform subsample of `max_sort` points.
// Every cut lies strictly between two distinct (sampled) prediction values.
// Throws DegeneratePredictions when fewer than n_bins distinct values exist.
CutPoints ComputeCuts(std::span<const double> predictions, int n_bins,
                      std::size_t max_sort = kDefaultMaxSort,
                      std::uint64_t seed = kDefaultCutSeed);

// bin = 1 + #{cuts strictly below p}; p == C_n lands in bin n.
int BinOf(double prediction, const CutPoints& cuts);
std::vector<int> AssignBins(std::span<const double> predictions,
                            const CutPoints& cuts);

// Interior boundaries use C_n^pm = 2/3 C_n + 1/3 C_{n pm 1}; the outermost
// ones extrapolate with a third of the neighbouring gap. With a single cut
// there is no neighbour and `single_cut_width` (the prediction IQR) sets
// C_1^pm = C_1 pm width / 6.
InnerCuts ComputeInnerCuts(const CutPoints& cuts, double single_cut_width);
// Derives single_cut_width from the predictions when needed.
InnerCuts ComputeInnerCuts(const CutPoints& cuts,
                           std::span<const double> predictions);

// Segment rules within bin n:
//   Top     C_n^- < p <= C_n           (n < N)
//   Bottom  C_{n-1} < p < C_{n-1}^+    (n > 1)
//   Middle  otherwise
Segment SegmentOf(double prediction, int bin, const CutPoints& cuts,
                  const InnerCuts& inner);
std::vector<Segment> AssignSegments(std::span<const double> predictions,
                                    std::span<const int> bins,
                                    const CutPoints& cuts,
                                    const InnerCuts& inner);

// Cuts together with their inner cuts; what gets cached between
// rebinning steps.
struct Binning {
  CutPoints cuts;
  InnerCuts inner;

  int n_bins() const { return cuts.n_bins(); }
};

Binning MakeBinning(std::span<const double> predictions, int n_bins,
                    std::size_t max_sort = kDefaultMaxSort,
                    std::uint64_t seed = kDefaultCutSeed);

BinAssignment Assign(std::span<const double> predictions,
                     const Binning& binning);

// Interquartile range by linear interpolation between order statistics.
double InterquartileRange(std::span<const double> values);

}  // namespace truelift

#endif  // TRUELIFT_BINNING_H_
