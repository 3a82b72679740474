#include "truelift/models.h"

#include <cmath>
#include <fstream>
#include <random>

#include "truelift/errors.h"

namespace truelift {
namespace {

double Activate(Activation a, double z) {
  return a == Activation::kTanh ? std::tanh(z) : (z > 0.0 ? z : 0.0);
}

// Derivative in terms of the pre-activation z and the output h.
double ActivateDerivative(Activation a, double z, double h) {
  if (a == Activation::kTanh) return 1.0 - h * h;
  return z > 0.0 ? 1.0 : 0.0;
}

void CheckDataset(const ModelSpec& spec, const ABDataset& dataset) {
  if (dataset.dim() != spec.dim) {
    throw ValidationError("model expects " + std::to_string(spec.dim) +
                          " features, dataset has " +
                          std::to_string(dataset.dim()));
  }
}

}  // namespace

void Validate(const ModelSpec& spec) {
  if (spec.dim == 0) throw ValidationError("model input dimension must be > 0");
  const bool mlp = spec.kind == ModelKind::kMlp;
  if (mlp != spec.hidden.has_value() || mlp != spec.activation.has_value()) {
    throw ValidationError(
        "hidden and activation must be set for MLP models and only for them");
  }
  if (mlp && *spec.hidden == 0) {
    throw ValidationError("hidden layer size must be positive");
  }
}

std::size_t ParamCount(const ModelSpec& spec) {
  if (spec.kind == ModelKind::kLinear) return spec.dim + 1;
  const std::size_t h = spec.hidden.value_or(0);
  return h * spec.dim + 2 * h + 1;
}

void Validate(const ModelSpec& spec, const Params& params) {
  Validate(spec);
  if (params.values.size() != ParamCount(spec)) {
    throw ValidationError("expected " + std::to_string(ParamCount(spec)) +
                          " parameters, got " +
                          std::to_string(params.values.size()));
  }
  for (double v : params.values) {
    if (!std::isfinite(v)) throw ValidationError("non-finite parameter");
  }
}

Params InitParams(const ModelSpec& spec, std::uint64_t seed) {
  Validate(spec);
  Params params{std::vector<double>(ParamCount(spec), 0.0)};
  const std::size_t d = spec.dim;
  std::mt19937_64 rng(seed);
  if (spec.kind == ModelKind::kLinear) {
    // Zero weights would give constant predictions, which cannot be binned.
    std::normal_distribution<double> w(0.0, 1.0 / std::sqrt(double(d)));
    for (std::size_t j = 0; j < d; ++j) params.values[j] = w(rng);
    return params;
  }
  const std::size_t h = *spec.hidden;
  std::normal_distribution<double> w1(0.0, 1.0 / std::sqrt(double(d)));
  std::normal_distribution<double> w2(0.0, 1.0 / std::sqrt(double(h)));
  for (std::size_t k = 0; k < h * d; ++k) params.values[k] = w1(rng);
  for (std::size_t k = 0; k < h; ++k) params.values[h * d + h + k] = w2(rng);
  return params;
}

double PredictRow(const ModelSpec& spec, const Params& params,
                  std::span<const double> x) {
  const std::vector<double>& v = params.values;
  const std::size_t d = spec.dim;
  if (spec.kind == ModelKind::kLinear) {
    double p = v[d];
    for (std::size_t j = 0; j < d; ++j) p += v[j] * x[j];
    return p;
  }
  const std::size_t h = *spec.hidden;
  const Activation act = *spec.activation;
  const double* b1 = v.data() + h * d;
  const double* w2 = b1 + h;
  double p = w2[h];
  for (std::size_t k = 0; k < h; ++k) {
    double z = b1[k];
    for (std::size_t j = 0; j < d; ++j) z += v[k * d + j] * x[j];
    p += w2[k] * Activate(act, z);
  }
  return p;
}

std::vector<double> Predict(const ModelSpec& spec, const Params& params,
                            const ABDataset& dataset) {
  Validate(spec, params);
  CheckDataset(spec, dataset);
  std::vector<double> out(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    out[i] = PredictRow(spec, params, dataset.features(i));
  }
  return out;
}

std::vector<double> Backprop(const ModelSpec& spec, const Params& params,
                             const ABDataset& dataset,
                             std::span<const double> point_gradient) {
  Validate(spec, params);
  CheckDataset(spec, dataset);
  if (point_gradient.size() != dataset.size()) {
    throw ValidationError("point gradient must align with the dataset");
  }
  const std::size_t d = spec.dim;
  std::vector<double> grad(ParamCount(spec), 0.0);
  if (spec.kind == ModelKind::kLinear) {
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      const double g = point_gradient[i];
      const auto x = dataset.features(i);
      for (std::size_t j = 0; j < d; ++j) grad[j] += g * x[j];
      grad[d] += g;
    }
    return grad;
  }

  const std::size_t h = *spec.hidden;
  const Activation act = *spec.activation;
  const std::vector<double>& v = params.values;
  const double* b1 = v.data() + h * d;
  const double* w2 = b1 + h;
  double* g_w1 = grad.data();
  double* g_b1 = g_w1 + h * d;
  double* g_w2 = g_b1 + h;
  double* g_b2 = g_w2 + h;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const double g = point_gradient[i];
    if (g == 0.0) continue;
    const auto x = dataset.features(i);
    for (std::size_t k = 0; k < h; ++k) {
      double zk = b1[k];
      for (std::size_t j = 0; j < d; ++j) zk += v[k * d + j] * x[j];
      const double hk = Activate(act, zk);
      const double back = g * w2[k] * ActivateDerivative(act, zk, hk);
      for (std::size_t j = 0; j < d; ++j) g_w1[k * d + j] += back * x[j];
      g_b1[k] += back;
      g_w2[k] += g * hk;
    }
    *g_b2 += g;
  }
  return grad;
}

Params LinearFromCoefficients(std::size_t dim, std::span<const double> c) {
  if (c.size() != dim + 1) {
    throw ValidationError("linear model with " + std::to_string(dim) +
                          " features needs " + std::to_string(dim + 1) +
                          " coefficients, got " + std::to_string(c.size()));
  }
  Params params{std::vector<double>(dim + 1)};
  params.values[0] = c[0];
  params.values[dim] = c[1];
  for (std::size_t k = 2; k <= dim; ++k) params.values[k - 1] = c[k];
  return params;
}

std::vector<double> LinearCoefficients(const Params& params) {
  const std::size_t dim = params.values.size() - 1;
  std::vector<double> c(dim + 1);
  c[0] = params.values[0];
  c[1] = params.values[dim];
  for (std::size_t k = 2; k <= dim; ++k) c[k] = params.values[k - 1];
  return c;
}

std::string ToString(ModelKind kind) {
  return kind == ModelKind::kLinear ? "linear" : "mlp";
}

std::string ToString(Activation activation) {
  return activation == Activation::kTanh ? "tanh" : "relu";
}

ModelKind ParseModelKind(const std::string& text) {
  if (text == "linear") return ModelKind::kLinear;
  if (text == "mlp") return ModelKind::kMlp;
  throw ValidationError("unknown model kind '" + text + "'");
}

Activation ParseActivation(const std::string& text) {
  if (text == "tanh") return Activation::kTanh;
  if (text == "relu") return Activation::kRelu;
  throw ValidationError("unknown activation '" + text + "'");
}

nlohmann::json ToJson(const ModelSpec& spec, const Params& params) {
  nlohmann::json doc;
  doc["kind"] = ToString(spec.kind);
  doc["d"] = spec.dim;
  if (spec.hidden) doc["hidden"] = *spec.hidden;
  if (spec.activation) doc["activation"] = ToString(*spec.activation);
  doc["values"] = params.values;
  return doc;
}

StoredModel ModelFromJson(const nlohmann::json& doc) {
  StoredModel model;
  try {
    model.spec.kind = ParseModelKind(doc.at("kind").get<std::string>());
    model.spec.dim = doc.at("d").get<std::size_t>();
    if (doc.contains("hidden")) model.spec.hidden = doc["hidden"].get<std::size_t>();
    if (doc.contains("activation")) {
      model.spec.activation =
          ParseActivation(doc["activation"].get<std::string>());
    }
    model.params.values = doc.at("values").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("malformed model document: ") + e.what());
  }
  Validate(model.spec, model.params);
  return model;
}

void SaveModel(const ModelSpec& spec, const Params& params,
               const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << ToJson(spec, params).dump(2) << '\n';
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

StoredModel LoadModel(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, "'" + path.string() + "': " + e.what());
  }
  return ModelFromJson(doc);
}

}  // namespace truelift
