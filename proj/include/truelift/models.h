#ifndef TRUELIFT_MODELS_H_
#define TRUELIFT_MODELS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "truelift/dataset.h"

namespace truelift {

enum class ModelKind { kLinear, kMlp };
enum class Activation { kTanh, kRelu };

struct ModelSpec {
  ModelKind kind = ModelKind::kLinear;
  std::size_t dim = 0;
  std::optional<std::size_t> hidden;      // MLP only
  std::optional<Activation> activation;  // MLP only

  static ModelSpec Linear(std::size_t dim) {
    return {ModelKind::kLinear, dim, std::nullopt, std::nullopt};
  }
  static ModelSpec Mlp(std::size_t dim, std::size_t hidden,
                       Activation activation) {
    return {ModelKind::kMlp, dim, hidden, activation};
  }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

void Validate(const ModelSpec& spec);

// Parameter layout:
//   Linear  [w_1 .. w_d, offset]
//   MLP     [W1 (hidden x d, row-major), b1 (hidden), w2 (hidden), b2]
struct Params {
  std::vector<double> values;

  friend bool operator==(const Params&, const Params&) = default;
};

std::size_t ParamCount(const ModelSpec& spec);
// Throws ValidationError on size mismatch or non-finite values.
void Validate(const ModelSpec& spec, const Params& params);

// Seeded random weights with zero biases.
Params InitParams(const ModelSpec& spec, std::uint64_t seed);

std::vector<double> Predict(const ModelSpec& spec, const Params& params,
                            const ABDataset& dataset);
double PredictRow(const ModelSpec& spec, const Params& params,
                  std::span<const double> x);

// sum_i g_i * d f(params, x_i) / d params.
std::vector<double> Backprop(const ModelSpec& spec, const Params& params,
                             const ABDataset& dataset,
                             std::span<const double> point_gradient);

// Linear coefficients in the (c_1, c_2, c_3, ...) convention where c_1 is
// the first slope, c_2 the offset and c_{k+1} the k-th slope for k >= 2.
// For two features this is (slope of f0, offset, slope of f1).
Params LinearFromCoefficients(std::size_t dim, std::span<const double> c);
std::vector<double> LinearCoefficients(const Params& params);

std::string ToString(ModelKind kind);
std::string ToString(Activation activation);
ModelKind ParseModelKind(const std::string& text);
Activation ParseActivation(const std::string& text);

// {"kind", "d", "hidden"?, "activation"?, "values": [...]}
nlohmann::json ToJson(const ModelSpec& spec, const Params& params);
struct StoredModel {
  ModelSpec spec;
  Params params;
};
StoredModel ModelFromJson(const nlohmann::json& doc);

void SaveModel(const ModelSpec& spec, const Params& params,
               const std::filesystem::path& path);
StoredModel LoadModel(const std::filesystem::path& path);

}  // namespace truelift

#endif  // TRUELIFT_MODELS_H_
