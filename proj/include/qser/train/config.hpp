#pragma once

// JSON run configuration. Sections: features, data, model, train, grid.
// Every section is optional and falls back to defaults; unknown keys and
// out-of-range values are rejected with the dotted path of the field.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "qser/data.hpp"
#include "qser/error.hpp"
#include "qser/features.hpp"
#include "qser/nn/optim.hpp"
#include "qser/qgrad.hpp"
#include "qser/train/model.hpp"
#include "qser/train/trainer.hpp"

namespace qser {

using json = nlohmann::json;

/// Search axes, in enumeration order (first axis varies slowest).
struct GridSpace {
  std::vector<double> learning_rates{0.001, 0.0001, 0.00001};
  std::vector<OptimizerKind> optimizers{OptimizerKind::Adam, OptimizerKind::SGD,
                                        OptimizerKind::RMSProp, OptimizerKind::AdaDelta,
                                        OptimizerKind::AdaGrad};
  std::vector<double> weight_decays{0.0, 0.01, 0.001};
  std::vector<EmbeddingKind> embeddings{AngleEmbedding{}, AmplitudeEmbedding{}, IqpEmbedding{}};
  std::vector<std::string> circuits{"random_layers", "strongly_entangling"};
  std::vector<MeasurementKind> measurements{MeasurementKind::PauliZ, MeasurementKind::PauliX,
                                            MeasurementKind::ZPlusPauliZ,
                                            MeasurementKind::Probability};

  std::size_t size() const {
    return learning_rates.size() * optimizers.size() * weight_decays.size() * embeddings.size() *
           circuits.size() * measurements.size();
  }
};

struct GridOptions {
  GridSpace space;
  std::size_t epochs = 10;        // per point
  std::size_t final_epochs = 30;  // retraining of the best point; 0 skips it
  std::size_t workers = 1;
};

enum class ModelKind { Hybrid, Classical };

struct QuantumOptions {
  std::size_t n_qubits = 8;
  std::string embedding = "angle";
  Axis axis = Axis::X;
  std::size_t iqp_repeats = 1;
  std::string circuit = "strongly_entangling";
  std::size_t layers = 2;
  std::size_t rots_per_layer = 0;
  double imprimitive_ratio = 0.3;
  std::optional<std::uint64_t> circuit_seed;  // falls back to train.seed
  MeasurementKind measurement = MeasurementKind::PauliZ;
};

struct RunConfig {
  MelConfig features;
  ValenceScheme valence_scheme = ValenceScheme::IEMOCAP;
  SplitSpec split;
  ModelKind model = ModelKind::Hybrid;
  ArchConfig arch;
  QuantumOptions quantum;
  TrainConfig train;
  GridOptions grid;
};

inline EmbeddingKind make_embedding(const std::string& name, Axis axis, std::size_t repeats) {
  EmbeddingKind e = parse_embedding(name);
  if (auto* a = std::get_if<AngleEmbedding>(&e)) a->axis = axis;
  if (auto* i = std::get_if<IqpEmbedding>(&e)) i->repeats = repeats;
  return e;
}

inline CircuitKind make_circuit(const std::string& name, const QuantumOptions& q, std::uint64_t seed) {
  CircuitKind c = parse_circuit(name);
  if (auto* s = std::get_if<StronglyEntangling>(&c)) {
    s->n_layers = q.layers;
  } else {
    auto& r = std::get<RandomLayers>(c);
    r.n_layers = q.layers;
    r.rots_per_layer = q.rots_per_layer;
    r.imprimitive_ratio = q.imprimitive_ratio;
    r.seed = q.circuit_seed.value_or(seed);
  }
  return c;
}

/// The resolved quantum layer for a run.
inline QuantumLayerConfig quantum_layer(const RunConfig& cfg) {
  QuantumLayerConfig q;
  q.n_qubits = cfg.quantum.n_qubits;
  q.embedding = make_embedding(cfg.quantum.embedding, cfg.quantum.axis, cfg.quantum.iqp_repeats);
  q.circuit = make_circuit(cfg.quantum.circuit, cfg.quantum, cfg.train.seed);
  q.measurement = cfg.quantum.measurement;
  return q;
}

inline Model build_model(const RunConfig& cfg, const Shape& input, std::size_t n_classes) {
  if (cfg.model == ModelKind::Classical) return build_classical(cfg.arch, input, n_classes);
  return build_hybrid(quantum_layer(cfg), cfg.arch, input, n_classes);
}

namespace detail {

/// Tracks which keys of one JSON object were consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    out = convert<T>(j_.at(key), field(key));
  }

  Section sub(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, field(key));
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ConfigError(field(key) + ": unknown key");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "config" : path_; }

  template <typename T>
  static T convert(const json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(path + ": expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
        throw ConfigError(path + ": expected a non-negative integer");
      return v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(path + ": expected a number");
      const double d = v.get<double>();
      if (!std::isfinite(d)) throw ConfigError(path + ": must be finite");
      return d;
    } else {
      if (!v.is_string()) throw ConfigError(path + ": expected a string");
      return v.get<std::string>();
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename F>
auto with_path(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

template <typename T, typename Parse>
std::vector<T> parse_list(Section& s, const std::string& key, std::vector<T> fallback, Parse parse) {
  if (!s.has(key)) return fallback;
  const json& arr = s.raw(key);
  const std::string path = s.field(key);
  if (!arr.is_array() || arr.empty()) throw ConfigError(path + ": expected a non-empty array");
  std::vector<T> out;
  for (std::size_t i = 0; i < arr.size(); ++i)
    out.push_back(parse(arr[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline std::string canonical_circuit(std::string name) {
  for (auto& c : name)
    if (c == '-') c = '_';
  parse_circuit(name);
  return name;
}

}  // namespace detail

inline RunConfig parse_run_config(const json& root) {
  using detail::Section;
  RunConfig cfg;
  Section top(root, "");

  {
    Section s = top.sub("features");
    s.get("target_rate", cfg.features.target_rate);
    s.get("duration", cfg.features.duration);
    s.get("window", cfg.features.window);
    s.get("hop", cfg.features.hop);
    s.get("n_mels", cfg.features.n_mels);
    s.get("fmin", cfg.features.fmin);
    s.get("fmax", cfg.features.fmax);
    s.get("log_floor", cfg.features.log_floor);
    s.finish();
    cfg.features.validate();
  }
  {
    Section s = top.sub("data");
    std::string scheme = "iemocap";
    s.get("valence_scheme", scheme);
    cfg.valence_scheme = detail::with_path(s.field("valence_scheme"), [&] { return parse_valence_scheme(scheme); });
    Section sp = s.sub("split");
    sp.get("train", cfg.split.train);
    sp.get("val", cfg.split.val);
    sp.get("test", cfg.split.test);
    sp.get("stratified", cfg.split.stratified);
    sp.finish();
    s.finish();
    cfg.split.validate();
  }
  {
    Section s = top.sub("model");
    std::string kind = "hybrid";
    s.get("kind", kind);
    if (kind == "hybrid") cfg.model = ModelKind::Hybrid;
    else if (kind == "classical") cfg.model = ModelKind::Classical;
    else throw ConfigError(s.field("kind") + ": expected 'hybrid' or 'classical'");

    Section a = s.sub("arch");
    a.get("conv1_channels", cfg.arch.conv1_channels);
    a.get("conv1_kernel", cfg.arch.conv1_kernel);
    a.get("conv2_channels", cfg.arch.conv2_channels);
    a.get("conv2_kernel", cfg.arch.conv2_kernel);
    a.get("pool", cfg.arch.pool);
    a.get("surrogate_width", cfg.arch.surrogate_width);
    a.finish();
    detail::with_path(a.where(), [&] { cfg.arch.validate(); return 0; });

    Section q = s.sub("quantum");
    auto& qo = cfg.quantum;
    q.get("n_qubits", qo.n_qubits);
    q.get("embedding", qo.embedding);
    detail::with_path(q.field("embedding"), [&] { return parse_embedding(qo.embedding); });
    std::string axis = "X";
    q.get("axis", axis);
    qo.axis = detail::with_path(q.field("axis"), [&] { return parse_axis(axis); });
    q.get("iqp_repeats", qo.iqp_repeats);
    q.get("circuit", qo.circuit);
    qo.circuit = detail::with_path(q.field("circuit"), [&] { return detail::canonical_circuit(qo.circuit); });
    q.get("layers", qo.layers);
    q.get("rots_per_layer", qo.rots_per_layer);
    q.get("imprimitive_ratio", qo.imprimitive_ratio);
    if (q.has("circuit_seed")) qo.circuit_seed = Section::convert<std::uint64_t>(q.raw("circuit_seed"), q.field("circuit_seed"));
    std::string meas = "pauliz";
    q.get("measurement", meas);
    qo.measurement = detail::with_path(q.field("measurement"), [&] { return parse_measurement(meas); });
    q.finish();
    if (qo.n_qubits < 1 || qo.n_qubits > kMaxQubits)
      throw ConfigError(q.field("n_qubits") + ": must lie in [1, " + std::to_string(kMaxQubits) + "]");
    if (qo.layers < 1) throw ConfigError(q.field("layers") + ": must be >= 1");
    if (qo.iqp_repeats < 1) throw ConfigError(q.field("iqp_repeats") + ": must be >= 1");
    if (!(qo.imprimitive_ratio >= 0.0 && qo.imprimitive_ratio <= 1.0))
      throw ConfigError(q.field("imprimitive_ratio") + ": must lie in [0, 1]");
    if (qo.circuit == "strongly_entangling" && qo.n_qubits < 2)
      throw ConfigError(q.field("n_qubits") + ": strongly_entangling needs >= 2 qubits");
    s.finish();
  }
  {
    Section s = top.sub("train");
    double lr = 1e-3, wd = 0.0;
    std::string opt = "adam";
    s.get("learning_rate", lr);
    s.get("optimizer", opt);
    s.get("weight_decay", wd);
    const auto kind = detail::with_path(s.field("optimizer"), [&] { return parse_optimizer(opt); });
    cfg.train.optimizer = OptimizerConfig::defaults(kind, lr, wd);
    s.get("beta1", cfg.train.optimizer.beta1);
    s.get("beta2", cfg.train.optimizer.beta2);
    s.get("epsilon", cfg.train.optimizer.epsilon);
    s.get("rho", cfg.train.optimizer.rho);
    s.get("momentum", cfg.train.optimizer.momentum);
    s.get("epochs", cfg.train.epochs);
    s.get("batch_size", cfg.train.batch_size);
    s.get("seed", cfg.train.seed);
    s.finish();
    detail::with_path("train", [&] { cfg.train.validate(); return 0; });
    cfg.split.seed = cfg.train.seed;
  }
  {
    Section s = top.sub("grid");
    auto& sp = cfg.grid.space;
    auto real = [](const json& v, const std::string& p) { return Section::convert<double>(v, p); };
    auto str = [](const json& v, const std::string& p) { return Section::convert<std::string>(v, p); };
    sp.learning_rates = detail::parse_list(s, "learning_rates", sp.learning_rates, [&](const json& v, const std::string& p) {
      const double d = real(v, p);
      if (!(d >= 0.0)) throw ConfigError(p + ": must be >= 0");
      return d;
    });
    sp.optimizers = detail::parse_list(s, "optimizers", sp.optimizers, [&](const json& v, const std::string& p) {
      return detail::with_path(p, [&] { return parse_optimizer(str(v, p)); });
    });
    sp.weight_decays = detail::parse_list(s, "weight_decays", sp.weight_decays, [&](const json& v, const std::string& p) {
      const double d = real(v, p);
      if (!(d >= 0.0)) throw ConfigError(p + ": must be >= 0");
      return d;
    });
    sp.embeddings = detail::parse_list(s, "embeddings", sp.embeddings, [&](const json& v, const std::string& p) {
      return detail::with_path(p, [&] {
        return make_embedding(str(v, p), cfg.quantum.axis, cfg.quantum.iqp_repeats);
      });
    });
    sp.circuits = detail::parse_list(s, "circuits", sp.circuits, [&](const json& v, const std::string& p) {
      return detail::with_path(p, [&] { return detail::canonical_circuit(str(v, p)); });
    });
    sp.measurements = detail::parse_list(s, "measurements", sp.measurements, [&](const json& v, const std::string& p) {
      return detail::with_path(p, [&] { return parse_measurement(str(v, p)); });
    });
    s.get("epochs", cfg.grid.epochs);
    s.get("final_epochs", cfg.grid.final_epochs);
    s.get("workers", cfg.grid.workers);
    s.finish();
    if (cfg.grid.workers < 1) throw ConfigError("grid.workers: must be >= 1");
  }
  top.finish();
  return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  return parse_run_config(j);
}

}  // namespace qser
