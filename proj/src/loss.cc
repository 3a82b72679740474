#include "truelift/loss.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <string>

#include "text_util.h"

namespace truelift {

SubsetAccumulator::SubsetAccumulator(int n_bins) {
  if (n_bins < 1) throw ValidationError("n_bins must be at least 1");
  sums_.resize(static_cast<std::size_t>(n_bins));
}

void SubsetAccumulator::Merge(const SubsetAccumulator& other) {
  if (other.sums_.size() != sums_.size()) {
    throw ValidationError("cannot merge accumulators with different n_bins");
  }
  for (std::size_t n = 0; n < sums_.size(); ++n) {
    sums_[n].count_t += other.sums_[n].count_t;
    sums_[n].count_c += other.sums_[n].count_c;
    sums_[n].pred += other.sums_[n].pred;
    sums_[n].y_t += other.sums_[n].y_t;
    sums_[n].y_c += other.sums_[n].y_c;
  }
}

SubsetStats SubsetAccumulator::Finish() const {
  SubsetStats stats;
  stats.bins.resize(sums_.size());
  std::size_t total_t = 0;
  std::size_t total_c = 0;
  double sum_pred = 0.0;
  double sum_y_t = 0.0;
  double sum_y_c = 0.0;
  for (std::size_t n = 0; n < sums_.size(); ++n) {
    const Sums& s = sums_[n];
    const int bin = static_cast<int>(n) + 1;
    if (s.count_t == 0 || s.count_c == 0) {
      throw EmptyArmInBin(
          bin, "EmptyArmInBin: bin " + std::to_string(bin) + " of " +
                   std::to_string(sums_.size()) + " has no " +
                   (s.count_t == 0 ? "treatment" : "control") +
                   " rows; use fewer bins");
    }
    BinStats& b = stats.bins[n];
    b.size_treatment = s.count_t;
    b.size_control = s.count_c;
    b.size = s.count_t + s.count_c;
    b.mean_pred = s.pred / static_cast<double>(b.size);
    b.mean_y_treatment = s.y_t / static_cast<double>(s.count_t);
    b.mean_y_control = s.y_c / static_cast<double>(s.count_c);
    b.lift = b.mean_y_treatment - b.mean_y_control;
    total_t += s.count_t;
    total_c += s.count_c;
    sum_pred += s.pred;
    sum_y_t += s.y_t;
    sum_y_c += s.y_c;
  }
  stats.total_size = total_t + total_c;
  stats.global_lift = sum_y_t / static_cast<double>(total_t) -
                      sum_y_c / static_cast<double>(total_c);
  stats.mean_prediction = sum_pred / static_cast<double>(stats.total_size);
  const double global_fraction =
      static_cast<double>(total_t) / static_cast<double>(stats.total_size);
  for (const BinStats& b : stats.bins) {
    const double fraction = static_cast<double>(b.size_treatment) /
                            static_cast<double>(b.size);
    stats.max_arm_imbalance =
        std::max(stats.max_arm_imbalance, std::abs(fraction - global_fraction));
  }
  return stats;
}

double GlobalLift(const ABDataset& dataset) {
  double sum_t = 0.0;
  double sum_c = 0.0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    (dataset.arm(i) == Arm::kTreatment ? sum_t : sum_c) += dataset.outcome(i);
  }
  if (dataset.treatment_count() == 0 || dataset.control_count() == 0) {
    throw ValidationError("global lift needs both arms");
  }
  return sum_t / static_cast<double>(dataset.treatment_count()) -
         sum_c / static_cast<double>(dataset.control_count());
}

SubsetStats ComputeSubsetStats(const ABDataset& dataset,
                               std::span<const double> predictions,
                               std::span<const int> bins, int n_bins) {
  if (predictions.size() != dataset.size() || bins.size() != dataset.size()) {
    throw ValidationError("predictions and bins must align with the dataset");
  }
  SubsetAccumulator acc(n_bins);
  const auto outcomes = dataset.outcomes();
  const auto arms = dataset.arms();
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    acc.Add(bins[i], arms[i], outcomes[i], predictions[i]);
  }
  return acc.Finish();
}

SubsetStats ComputeTrueLiftStats(const ABDataset& dataset,
                                 std::span<const double> predictions,
                                 std::span<const int> bins, int n_bins) {
  const auto lifts = dataset.true_lifts();
  if (predictions.size() != dataset.size() || bins.size() != dataset.size()) {
    throw ValidationError("predictions and bins must align with the dataset");
  }
  SubsetStats stats;
  stats.bins.resize(static_cast<std::size_t>(n_bins));
  std::vector<double> sum_pred(n_bins, 0.0);
  std::vector<double> sum_lift(n_bins, 0.0);
  double total_lift = 0.0;
  double total_pred = 0.0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const int n = bins[i] - 1;
    BinStats& b = stats.bins[n];
    ++b.size;
    ++(dataset.arm(i) == Arm::kTreatment ? b.size_treatment : b.size_control);
    sum_pred[n] += predictions[i];
    sum_lift[n] += lifts[i];
    total_lift += lifts[i];
    total_pred += predictions[i];
  }
  for (int n = 0; n < n_bins; ++n) {
    BinStats& b = stats.bins[n];
    if (b.size == 0) {
      throw ValidationError("bin " + std::to_string(n + 1) + " is empty");
    }
    b.mean_pred = sum_pred[n] / static_cast<double>(b.size);
    b.lift = sum_lift[n] / static_cast<double>(b.size);
  }
  stats.total_size = dataset.size();
  stats.global_lift = total_lift / static_cast<double>(dataset.size());
  stats.mean_prediction = total_pred / static_cast<double>(dataset.size());
  return stats;
}

LossReport TrueLiftLoss(const SubsetStats& stats) {
  LossReport report;
  report.n_bins = stats.n_bins();
  report.total_size = stats.total_size;
  report.global_lift = stats.global_lift;
  report.rows.reserve(stats.bins.size());
  const double total = static_cast<double>(stats.total_size);
  for (int n = 1; n <= stats.n_bins(); ++n) {
    const BinStats& b = stats.bin(n);
    LossRow row;
    row.bin = n;
    row.stats = b;
    row.weight = static_cast<double>(b.size) / total;
    const double bias = b.mean_pred - b.lift;
    const double separation = b.lift - stats.global_lift;
    row.bias = row.weight * bias * bias;
    row.separation = row.weight * separation * separation;
    report.bias_term += row.bias;
    report.separation_term += row.separation;
    report.rows.push_back(row);
  }
  report.loss = report.bias_term - report.separation_term;
  return report;
}

std::vector<double> DiscretizedPredictions(const SubsetStats& stats,
                                           std::span<const int> bins) {
  std::vector<double> out(bins.size());
  for (std::size_t i = 0; i < bins.size(); ++i) {
    out[i] = stats.bin(bins[i]).mean_pred;
  }
  return out;
}

double PointwiseMse(std::span<const double> discrete_predictions,
                    std::span<const double> true_lifts) {
  if (discrete_predictions.size() != true_lifts.size()) {
    throw ValidationError("need one true lift per prediction");
  }
  if (true_lifts.empty()) throw ValidationError("no rows");
  double sum = 0.0;
  for (std::size_t i = 0; i < true_lifts.size(); ++i) {
    const double r = discrete_predictions[i] - true_lifts[i];
    sum += r * r;
  }
  return sum / static_cast<double>(true_lifts.size());
}

VarianceParts DecomposeVariance(std::span<const double> values,
                                std::span<const int> groups) {
  if (values.empty()) throw ValidationError("no values");
  if (values.size() != groups.size()) {
    throw ValidationError("need one group label per value");
  }
  struct Group {
    std::size_t count = 0;
    double sum = 0.0;
    double mean = 0.0;
  };
  std::map<int, Group> by_label;
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    Group& g = by_label[groups[i]];
    ++g.count;
    g.sum += values[i];
    sum += values[i];
  }
  const double n = static_cast<double>(values.size());
  const double mean = sum / n;
  VarianceParts parts;
  for (auto& [label, g] : by_label) {
    g.mean = g.sum / static_cast<double>(g.count);
    const double d = g.mean - mean;
    parts.between += static_cast<double>(g.count) * d * d;
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double dt = values[i] - mean;
    const double dw = values[i] - by_label[groups[i]].mean;
    parts.total += dt * dt;
    parts.within += dw * dw;
  }
  parts.total /= n;
  parts.within /= n;
  parts.between /= n;
  return parts;
}

Evaluation EvaluatePredictions(const ABDataset& dataset,
                               std::span<const double> predictions,
                               int n_bins, std::size_t max_sort,
                               std::uint64_t seed) {
  if (predictions.size() != dataset.size()) {
    throw ValidationError("predictions must align with the dataset");
  }
  Evaluation eval;
  eval.requested_bins = n_bins;
  eval.used_bins = n_bins;
  try {
    eval.cuts = ComputeCuts(predictions, n_bins, max_sort, seed);
  } catch (const DegeneratePredictions&) {
    std::vector<double> sorted(predictions.begin(), predictions.end());
    std::sort(sorted.begin(), sorted.end());
    const auto distinct = std::unique(sorted.begin(), sorted.end()) -
                          sorted.begin();
    eval.used_bins = static_cast<int>(
        std::min<std::ptrdiff_t>(distinct, n_bins));
    // Full sort so the sample cannot miss a rare value.
    eval.cuts = ComputeCuts(predictions, eval.used_bins, 0, seed);
  }
  const std::vector<int> bins = AssignBins(predictions, eval.cuts);
  eval.report = TrueLiftLoss(
      ComputeSubsetStats(dataset, predictions, bins, eval.used_bins));
  return eval;
}

void WriteLossReportCsv(const LossReport& report,
                        const std::filesystem::path& path) {
  using internal::AppendNumber;
  std::string out = "bin,size,size_t,size_c,mean_pred,mean_y_t,mean_y_c,lift\n";
  for (const LossRow& row : report.rows) {
    const BinStats& b = row.stats;
    out += std::to_string(row.bin) + "," + std::to_string(b.size) + "," +
           std::to_string(b.size_treatment) + "," +
           std::to_string(b.size_control) + ",";
    AppendNumber(out, b.mean_pred);
    out += ',';
    AppendNumber(out, b.mean_y_treatment);
    out += ',';
    AppendNumber(out, b.mean_y_control);
    out += ',';
    AppendNumber(out, b.lift);
    out += '\n';
  }
  out += "# loss=";
  AppendNumber(out, report.loss);
  out += ",bias_term=";
  AppendNumber(out, report.bias_term);
  out += ",separation_term=";
  AppendNumber(out, report.separation_term);
  out += ",global_lift=";
  AppendNumber(out, report.global_lift);
  out += ",total_size=" + std::to_string(report.total_size) +
         ",n_bins=" + std::to_string(report.n_bins) + "\n";

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error("cannot open '" + path.string() + "' for writing");
  file << out;
  if (!file) throw Error("write to '" + path.string() + "' failed");
}

LossReport ReadLossReportCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  std::string line;
  if (!std::getline(in, line) ||
      internal::Trim(line) !=
          "bin,size,size_t,size_c,mean_pred,mean_y_t,mean_y_c,lift") {
    throw ParseError(1, "not a loss report: unexpected header");
  }
  auto number = [&](std::string_view cell, std::size_t line_no) {
    const auto v = internal::ParseDouble(cell);
    if (!v) throw ParseError(line_no, "not a number: '" + std::string(cell) + "'");
    return *v;
  };
  LossReport report;
  bool have_summary = false;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = internal::Trim(line);
    if (text.empty()) continue;
    if (text.front() == '#') {
      std::string_view body = text.substr(1);
      for (std::string_view kv : internal::Split(body, ',')) {
        const auto eq = kv.find('=');
        if (eq == std::string_view::npos) {
          throw ParseError(line_no, "malformed summary entry");
        }
        const std::string_view key = internal::Trim(kv.substr(0, eq));
        const double v = number(internal::Trim(kv.substr(eq + 1)), line_no);
        if (key == "loss") report.loss = v;
        else if (key == "bias_term") report.bias_term = v;
        else if (key == "separation_term") report.separation_term = v;
        else if (key == "global_lift") report.global_lift = v;
        else if (key == "total_size") report.total_size = static_cast<std::size_t>(v);
        else if (key == "n_bins") report.n_bins = static_cast<int>(v);
      }
      have_summary = true;
      continue;
    }
    const auto cells = internal::Split(text, ',');
    if (cells.size() != 8) throw ParseError(line_no, "expected 8 columns");
    LossRow row;
    row.bin = static_cast<int>(number(cells[0], line_no));
    row.stats.size = static_cast<std::size_t>(number(cells[1], line_no));
    row.stats.size_treatment = static_cast<std::size_t>(number(cells[2], line_no));
    row.stats.size_control = static_cast<std::size_t>(number(cells[3], line_no));
    row.stats.mean_pred = number(cells[4], line_no);
    row.stats.mean_y_treatment = number(cells[5], line_no);
    row.stats.mean_y_control = number(cells[6], line_no);
    row.stats.lift = number(cells[7], line_no);
    report.rows.push_back(row);
  }
  if (!have_summary) throw ParseError(line_no, "missing summary line");
  for (LossRow& row : report.rows) {
    if (report.total_size > 0) {
      row.weight = static_cast<double>(row.stats.size) /
                   static_cast<double>(report.total_size);
    }
    const double bias = row.stats.mean_pred - row.stats.lift;
    const double sep = row.stats.lift - report.global_lift;
    row.bias = row.weight * bias * bias;
    row.separation = row.weight * sep * sep;
  }
  return report;
}

}  // namespace truelift
