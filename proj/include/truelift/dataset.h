#ifndef TRUELIFT_DATASET_H_
#define TRUELIFT_DATASET_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace truelift {

enum class Arm : std::uint8_t { kControl = 0, kTreatment = 1 };

// One experiment subject. `true_lift` is only known for synthetic data.
struct ABRow {
  std::vector<double> features;
  double outcome = 0.0;
  Arm arm = Arm::kControl;
  std::optional<double> true_lift;
};

// Non-owning view of a row stored inside an ABDataset.
struct ABRowView {
  std::span<const double> features;
  double outcome;
  Arm arm;
  std::optional<double> true_lift;
};

// Immutable A/B-test table. Features are stored row-major in one contiguous
// buffer. Construction validates:
//   - every row has the same feature dimension;
//   - features and outcomes are finite;
//   - at least one treatment and one control row;
//   - true_lift is present on all rows or on none.
class ABDataset {
 public:
  ABDataset(std::size_t dim, std::vector<double> features,
            std::vector<double> outcomes, std::vector<Arm> arms,
            std::optional<std::vector<double>> true_lifts = std::nullopt);

  static ABDataset FromRows(std::span<const ABRow> rows);

  std::size_t size() const { return outcomes_.size(); }
  std::size_t dim() const { return dim_; }
  std::size_t treatment_count() const { return treatment_count_; }
  std::size_t control_count() const { return size() - treatment_count_; }
  bool has_true_lift() const { return true_lifts_.has_value(); }

  std::span<const double> features(std::size_t i) const {
    return {features_.data() + i * dim_, dim_};
  }
  std::span<const double> feature_matrix() const { return features_; }
  std::span<const double> outcomes() const { return outcomes_; }
  std::span<const Arm> arms() const { return arms_; }
  // Throws ValidationError when the dataset carries no true lifts.
  std::span<const double> true_lifts() const;

  double outcome(std::size_t i) const { return outcomes_[i]; }
  Arm arm(std::size_t i) const { return arms_[i]; }
  ABRowView row(std::size_t i) const;
  ABRow CopyRow(std::size_t i) const;

  // Rows at `indices`, in that order. The result must still satisfy the
  // dataset invariants.
  ABDataset Subset(std::span<const std::size_t> indices) const;

  friend bool operator==(const ABDataset&, const ABDataset&) = default;

 private:
  std::size_t dim_;
  std::vector<double> features_;
  std::vector<double> outcomes_;
  std::vector<Arm> arms_;
  std::optional<std::vector<double>> true_lifts_;
  std::size_t treatment_count_ = 0;
};

enum class NoiseDistribution { kUniform01, kStdNormal };

// Synthetic A/B data with a known lift:
//   r1, r2, r3 ~ noise i.i.d.;  features = (r1, r3)
//   y = r1 + r2 + lift_coefficient * r3   (treatment)
//   y = r1 + r2                           (control)
struct DataGenConfig {
  std::size_t n_rows = 10000;
  double treatment_fraction = 0.7;
  std::uint64_t seed = 1;
  NoiseDistribution noise = NoiseDistribution::kUniform01;
  double lift_coefficient = 0.5;
};

void Validate(const DataGenConfig& config);

// Deterministic given config.seed. Arms are i.i.d. Bernoulli draws, so the
// treatment count is only approximately n_rows * treatment_fraction.
ABDataset Generate(const DataGenConfig& config);

// CSV header: f0,...,f{d-1},y,arm[,true_lift]; arm is 1 (treatment) or 0
// (control). Errors carry the 1-based line number.
ABDataset LoadCsv(const std::filesystem::path& path);
void SaveCsv(const ABDataset& dataset, const std::filesystem::path& path);

}  // namespace truelift

#endif  // TRUELIFT_DATASET_H_
