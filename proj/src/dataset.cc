#include "truelift/dataset.h"

#include <cmath>
#include <fstream>
#include <random>
#include <string>
#include <string_view>
#include <utility>

#include "truelift/errors.h"
#include "text_util.h"

namespace truelift {
namespace {

bool AllFinite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double ParseNumber(std::string_view cell, std::size_t line,
                   std::string_view column) {
  const std::optional<double> value = internal::ParseDouble(cell);
  if (!value) {
    throw ParseError(line, "column '" + std::string(column) +
                               "': not a number: '" + std::string(cell) + "'");
  }
  if (!std::isfinite(*value)) {
    throw ParseError(line, "column '" + std::string(column) +
                               "': non-finite value");
  }
  return *value;
}

}  // namespace

ABDataset::ABDataset(std::size_t dim, std::vector<double> features,
                     std::vector<double> outcomes, std::vector<Arm> arms,
                     std::optional<std::vector<double>> true_lifts)
    : dim_(dim),
      features_(std::move(features)),
      outcomes_(std::move(outcomes)),
      arms_(std::move(arms)),
      true_lifts_(std::move(true_lifts)) {
  const std::size_t n = outcomes_.size();
  if (arms_.size() != n || features_.size() != n * dim_) {
    throw ValidationError("dataset columns have inconsistent lengths");
  }
  if (true_lifts_ && true_lifts_->size() != n) {
    throw ValidationError("true_lift column length differs from row count");
  }
  if (!AllFinite(features_)) throw ValidationError("non-finite feature value");
  if (!AllFinite(outcomes_)) throw ValidationError("non-finite outcome value");
  for (Arm a : arms_) {
    if (a == Arm::kTreatment) ++treatment_count_;
  }
  if (treatment_count_ == 0) throw ValidationError("no treatment rows");
  if (treatment_count_ == n) throw ValidationError("no control rows");
}

ABDataset ABDataset::FromRows(std::span<const ABRow> rows) {
  if (rows.empty()) throw ValidationError("dataset has no rows");
  const std::size_t dim = rows.front().features.size();
  const bool with_lift = rows.front().true_lift.has_value();
  std::vector<double> features;
  features.reserve(rows.size() * dim);
  std::vector<double> outcomes;
  std::vector<Arm> arms;
  std::vector<double> lifts;
  for (const ABRow& r : rows) {
    if (r.features.size() != dim) {
      throw ValidationError("feature dimension differs between rows");
    }
    if (r.true_lift.has_value() != with_lift) {
      throw ValidationError("true_lift must be present on all rows or none");
    }
    features.insert(features.end(), r.features.begin(), r.features.end());
    outcomes.push_back(r.outcome);
    arms.push_back(r.arm);
    if (with_lift) lifts.push_back(*r.true_lift);
  }
  std::optional<std::vector<double>> opt_lifts;
  if (with_lift) opt_lifts = std::move(lifts);
  return ABDataset(dim, std::move(features), std::move(outcomes),
                   std::move(arms), std::move(opt_lifts));
}

std::span<const double> ABDataset::true_lifts() const {
  if (!true_lifts_) throw ValidationError("dataset has no true_lift column");
  return *true_lifts_;
}

ABRowView ABDataset::row(std::size_t i) const {
  return {features(i), outcomes_[i], arms_[i],
          true_lifts_ ? std::optional<double>((*true_lifts_)[i])
                      : std::nullopt};
}

ABRow ABDataset::CopyRow(std::size_t i) const {
  const ABRowView v = row(i);
  return {std::vector<double>(v.features.begin(), v.features.end()), v.outcome,
          v.arm, v.true_lift};
}

ABDataset ABDataset::Subset(std::span<const std::size_t> indices) const {
  std::vector<double> features;
  features.reserve(indices.size() * dim_);
  std::vector<double> outcomes;
  outcomes.reserve(indices.size());
  std::vector<Arm> arms;
  arms.reserve(indices.size());
  std::optional<std::vector<double>> lifts;
  if (true_lifts_) lifts.emplace().reserve(indices.size());
  for (std::size_t i : indices) {
    const auto f = this->features(i);
    features.insert(features.end(), f.begin(), f.end());
    outcomes.push_back(outcomes_[i]);
    arms.push_back(arms_[i]);
    if (lifts) lifts->push_back((*true_lifts_)[i]);
  }
  return ABDataset(dim_, std::move(features), std::move(outcomes),
                   std::move(arms), std::move(lifts));
}

void Validate(const DataGenConfig& config) {
  if (config.n_rows < 2) throw ValidationError("n_rows must be at least 2");
  if (!(config.treatment_fraction > 0.0 && config.treatment_fraction < 1.0)) {
    throw ValidationError("treatment_fraction must lie strictly in (0, 1)");
  }
  if (!std::isfinite(config.lift_coefficient)) {
    throw ValidationError("lift_coefficient must be finite");
  }
}

ABDataset Generate(const DataGenConfig& config) {
  Validate(config);
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&]() {
    return config.noise == NoiseDistribution::kUniform01 ? uniform(rng)
                                                         : normal(rng);
  };

  const std::size_t n = config.n_rows;
  std::vector<double> features;
  features.reserve(2 * n);
  std::vector<double> outcomes(n);
  std::vector<Arm> arms(n);
  std::vector<double> lifts(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r1 = draw();
    const double r2 = draw();
    const double r3 = draw();
    const bool treated = uniform(rng) < config.treatment_fraction;
    features.push_back(r1);
    features.push_back(r3);
    lifts[i] = config.lift_coefficient * r3;
    outcomes[i] = treated ? r1 + r2 + lifts[i] : r1 + r2;
    arms[i] = treated ? Arm::kTreatment : Arm::kControl;
  }
  // A tiny request can draw a single arm; that would not be an A/B test.
  std::size_t treated = 0;
  for (Arm a : arms) treated += a == Arm::kTreatment;
  if (treated == 0 || treated == n) {
    throw ValidationError(
        "generated data contains a single arm; increase n_rows or change "
        "the seed");
  }
  return ABDataset(2, std::move(features), std::move(outcomes),
                   std::move(arms), std::move(lifts));
}

ABDataset LoadCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");

  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  const auto header = internal::Split(line, ',');
  bool with_lift = !header.empty() && header.back() == "true_lift";
  const std::size_t fixed = with_lift ? 3 : 2;
  if (header.size() < fixed + 1) {
    throw ParseError(1, "header must be f0,...,f{d-1},y,arm[,true_lift]");
  }
  const std::size_t dim = header.size() - fixed;
  for (std::size_t j = 0; j < dim; ++j) {
    if (header[j] != "f" + std::to_string(j)) {
      throw ParseError(1, "expected column 'f" + std::to_string(j) +
                              "', found '" + std::string(header[j]) + "'");
    }
  }
  if (header[dim] != "y" || header[dim + 1] != "arm") {
    throw ParseError(1, "expected columns 'y,arm' after the features");
  }

  std::vector<double> features;
  std::vector<double> outcomes;
  std::vector<Arm> arms;
  std::vector<double> lifts;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (internal::Trim(line).empty()) continue;
    const auto cells = internal::Split(line, ',');
    if (cells.size() != header.size()) {
      throw ParseError(line_no, "expected " + std::to_string(header.size()) +
                                    " columns, found " +
                                    std::to_string(cells.size()));
    }
    for (std::size_t j = 0; j < dim; ++j) {
      features.push_back(ParseNumber(cells[j], line_no, header[j]));
    }
    outcomes.push_back(ParseNumber(cells[dim], line_no, "y"));
    const std::string_view arm = cells[dim + 1];
    if (arm == "1") {
      arms.push_back(Arm::kTreatment);
    } else if (arm == "0") {
      arms.push_back(Arm::kControl);
    } else {
      throw ParseError(line_no,
                       "arm must be 0 or 1, found '" + std::string(arm) + "'");
    }
    if (with_lift) {
      lifts.push_back(ParseNumber(cells[dim + 2], line_no, "true_lift"));
    }
  }
  if (outcomes.empty()) throw ParseError(line_no, "no data rows");

  std::optional<std::vector<double>> opt_lifts;
  if (with_lift) opt_lifts = std::move(lifts);
  return ABDataset(dim, std::move(features), std::move(outcomes),
                   std::move(arms), std::move(opt_lifts));
}

void SaveCsv(const ABDataset& dataset, const std::filesystem::path& path) {
  std::string out;
  for (std::size_t j = 0; j < dataset.dim(); ++j) {
    out += "f" + std::to_string(j) + ",";
  }
  out += "y,arm";
  if (dataset.has_true_lift()) out += ",true_lift";
  out += '\n';
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (double f : dataset.features(i)) {
      internal::AppendNumber(out, f);
      out += ',';
    }
    internal::AppendNumber(out, dataset.outcome(i));
    out += dataset.arm(i) == Arm::kTreatment ? ",1" : ",0";
    if (dataset.has_true_lift()) {
      out += ',';
      internal::AppendNumber(out, dataset.true_lifts()[i]);
    }
    out += '\n';
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error("cannot open '" + path.string() + "' for writing");
  file << out;
  if (!file) throw Error("write to '" + path.string() + "' failed");
}

}  // namespace truelift
