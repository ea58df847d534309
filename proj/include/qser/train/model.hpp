#pragma once

// Layer chains, the hybrid and classical reference models, and the binary
// checkpoint format.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include "qser/error.hpp"
#include "qser/io.hpp"
#include "qser/nn/layers.hpp"
#include "qser/nn/ops.hpp"
#include "qser/qgrad.hpp"
#include "qser/rng.hpp"

namespace qser {

struct Conv2DSpec {
  std::size_t in_channels, out_channels, kernel, stride = 1;
  friend bool operator==(const Conv2DSpec&, const Conv2DSpec&) = default;
};
struct ReLUSpec {
  friend bool operator==(const ReLUSpec&, const ReLUSpec&) = default;
};
struct MaxPool2DSpec {
  std::size_t kernel = 2, stride = 2;
  friend bool operator==(const MaxPool2DSpec&, const MaxPool2DSpec&) = default;
};
struct FlattenSpec {
  friend bool operator==(const FlattenSpec&, const FlattenSpec&) = default;
};
struct DenseSpec {
  std::size_t in, out;
  friend bool operator==(const DenseSpec&, const DenseSpec&) = default;
};
struct RangeMapSpec {
  double scale = std::numbers::pi;
  friend bool operator==(const RangeMapSpec&, const RangeMapSpec&) = default;
};
struct QuantumSpec {
  QuantumLayerConfig config;
  friend bool operator==(const QuantumSpec&, const QuantumSpec&) = default;
};
struct SoftmaxSpec {
  friend bool operator==(const SoftmaxSpec&, const SoftmaxSpec&) = default;
};

using LayerSpec = std::variant<Conv2DSpec, ReLUSpec, MaxPool2DSpec, FlattenSpec, DenseSpec,
                               RangeMapSpec, QuantumSpec, SoftmaxSpec>;

inline const char* layer_kind_name(const LayerSpec& spec) {
  constexpr const char* names[] = {"Conv2D",   "ReLU",     "MaxPool2D", "Flatten",
                                   "Dense",    "RangeMap", "Quantum",   "Softmax"};
  return names[spec.index()];
}

/// Embed, run the variational circuit, measure. Trainable angles are
/// initialised uniformly in [0, 2pi).
class QuantumLayer final : public Layer {
 public:
  explicit QuantumLayer(const QuantumLayerConfig& cfg)
      : pipeline_(cfg), params_(pipeline_.param_count(), 0.0), grads_(params_.size(), 0.0) {}

  Shape output_shape(const Shape& in) const override {
    if (in.size() != 1 || in[0] != pipeline_.input_width()) {
      throw ModelError("quantum layer expects [" + std::to_string(pipeline_.input_width()) +
                       "], got " + shape_string(in));
    }
    return {pipeline_.output_width()};
  }

  Tensor forward(const Tensor& x) override {
    output_shape(x.shape());
    for (double v : x.data())
      if (!std::isfinite(v)) throw NumericError("non-finite activation entering the quantum layer");
    input_ = x;
    auto out = pipeline_.forward(x.data(), params_);
    const std::size_t n = out.size();
    return Tensor({n}, std::move(out));
  }

  Tensor backward(const Tensor& g, bool want_input_grad) override {
    const auto gp = param_shift_grad(input_.data(), params_, pipeline_, g.data());
    for (std::size_t i = 0; i < gp.size(); ++i) grads_[i] += gp[i];
    if (!want_input_grad) return Tensor();
    auto gi = input_grad(input_.data(), params_, pipeline_, g.data());
    const std::size_t n = gi.size();
    return Tensor({n}, std::move(gi));
  }

  std::unique_ptr<Layer> clone() const override { return std::make_unique<QuantumLayer>(*this); }

  std::span<double> params() override { return params_; }
  std::span<const double> params() const override { return params_; }
  std::span<double> grads() override { return grads_; }

  void init_params(Rng& rng) override {
    for (auto& p : params_) p = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }

  const QuantumPipeline& pipeline() const { return pipeline_; }

 private:
  QuantumPipeline pipeline_;
  std::vector<double> params_, grads_;
  Tensor input_;
};

inline std::unique_ptr<Layer> make_layer(const LayerSpec& spec) {
  return std::visit(
      [](const auto& s) -> std::unique_ptr<Layer> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Conv2DSpec>)
          return std::make_unique<Conv2DLayer>(s.in_channels, s.out_channels, s.kernel, s.stride);
        else if constexpr (std::is_same_v<T, ReLUSpec>)
          return std::make_unique<ReLULayer>();
        else if constexpr (std::is_same_v<T, MaxPool2DSpec>)
          return std::make_unique<MaxPool2DLayer>(s.kernel, s.stride);
        else if constexpr (std::is_same_v<T, FlattenSpec>)
          return std::make_unique<FlattenLayer>();
        else if constexpr (std::is_same_v<T, DenseSpec>)
          return std::make_unique<DenseLayer>(s.in, s.out);
        else if constexpr (std::is_same_v<T, RangeMapSpec>)
          return std::make_unique<RangeMapLayer>(s.scale);
        else if constexpr (std::is_same_v<T, QuantumSpec>)
          return std::make_unique<QuantumLayer>(s.config);
        else
          return std::make_unique<SoftmaxLayer>();
      },
      spec);
}

/// A shape-checked layer chain. The final layer must be Softmax; training
/// reads logits from the layer before it.
class Model {
 public:
  Model(Shape input_shape, std::vector<LayerSpec> specs)
      : input_shape_(std::move(input_shape)), specs_(std::move(specs)) {
    if (specs_.empty() || !std::holds_alternative<SoftmaxSpec>(specs_.back()))
      throw ModelError("model must end with a Softmax layer");
    Shape shape = input_shape_;
    for (std::size_t i = 0; i < specs_.size(); ++i) {
      try {
        layers_.push_back(make_layer(specs_[i]));
        shape = layers_.back()->output_shape(shape);
      } catch (const Error& e) {
        throw ModelError("layer " + std::to_string(i) + " (" + layer_kind_name(specs_[i]) +
                         "): " + e.what());
      }
      shapes_.push_back(shape);
    }
    if (shape.size() != 1 || shape[0] < 2) throw ModelError("model output must be a class vector");
  }

  Model(const Model& other)
      : input_shape_(other.input_shape_), specs_(other.specs_), shapes_(other.shapes_) {
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
  }
  Model& operator=(const Model& other) {
    if (this != &other) *this = Model(other);
    return *this;
  }
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const Shape& input_shape() const { return input_shape_; }
  const std::vector<LayerSpec>& specs() const { return specs_; }
  const Shape& output_shape(std::size_t layer) const { return shapes_[layer]; }
  std::size_t n_classes() const { return shapes_.back()[0]; }
  std::size_t n_layers() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_[i]; }
  const Layer& layer(std::size_t i) const { return *layers_[i]; }

  /// Layer i draws from Rng(seed, "init", i).
  void init(std::uint64_t seed) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      Rng rng(seed, "init", i);
      layers_[i]->init_params(rng);
    }
  }

  Tensor logits(const Tensor& x) {
    check_input(x);
    Tensor h = x;
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i) h = layers_[i]->forward(h);
    return h;
  }

  Tensor predict_proba(const Tensor& x) { return softmax(logits(x)); }

  std::size_t predict(const Tensor& x) {
    const Tensor z = logits(x);
    std::size_t best = 0;
    for (std::size_t i = 1; i < z.size(); ++i)
      if (z[i] > z[best]) best = i;
    return best;
  }

  /// Forward, cross-entropy, backward; parameter gradients accumulate. The
  /// first layer's input gradient is never needed and is skipped.
  double accumulate_gradients(const Tensor& x, std::size_t label) {
    auto lg = softmax_cross_entropy(logits(x), label);
    Tensor g = std::move(lg.grad);
    for (std::size_t i = layers_.size() - 1; i-- > 0;) g = layers_[i]->backward(g, i > 0);
    return lg.loss;
  }

  void zero_grads() {
    for (auto& l : layers_) l->zero_grads();
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l->param_count();
    return n;
  }

  std::vector<double> flat_params() const {
    std::vector<double> out;
    for (const auto& l : layers_) {
      auto p = std::as_const(*l).params();
      out.insert(out.end(), p.begin(), p.end());
    }
    return out;
  }

  void set_flat_params(std::span<const double> values) {
    if (values.size() != param_count()) throw ModelError("parameter count mismatch");
    std::size_t at = 0;
    for (auto& l : layers_)
      for (auto& p : l->params()) p = values[at++];
  }

  std::vector<double> flat_grads() {
    std::vector<double> out;
    for (auto& l : layers_) {
      auto g = l->grads();
      out.insert(out.end(), g.begin(), g.end());
    }
    return out;
  }

 private:
  void check_input(const Tensor& x) const {
    if (x.shape() != input_shape_)
      throw ModelError("model expects input " + shape_string(input_shape_) + ", got " +
                       shape_string(x.shape()));
  }

  Shape input_shape_;
  std::vector<LayerSpec> specs_;
  std::vector<Shape> shapes_;
  std::vector<std::unique_ptr<Layer>> layers_;
};

inline std::size_t count_params(const Model& m) { return m.param_count(); }

// ---------------------------------------------------------------- builders

/// Dimensions of the reference CNN front-end and the classical surrogate.
struct ArchConfig {
  std::size_t conv1_channels = 16;
  std::size_t conv1_kernel = 5;
  std::size_t conv2_channels = 32;
  std::size_t conv2_kernel = 3;
  std::size_t pool = 2;
  std::size_t surrogate_width = 512;

  void validate() const {
    if (!conv1_channels || !conv1_kernel || !conv2_channels || !conv2_kernel || !pool ||
        !surrogate_width)
      throw ConfigError("model architecture sizes must all be >= 1");
  }
  friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

/// Conv -> ReLU -> MaxPool -> Conv -> ReLU -> MaxPool -> Flatten, plus the
/// flattened width.
inline std::pair<std::vector<LayerSpec>, std::size_t> cnn_prefix(const ArchConfig& arch,
                                                                 const Shape& input) {
  arch.validate();
  if (input.size() != 3) throw ModelError("model input must be [C, H, W], got " + shape_string(input));
  std::vector<LayerSpec> specs{
      Conv2DSpec{input[0], arch.conv1_channels, arch.conv1_kernel, 1},
      ReLUSpec{},
      MaxPool2DSpec{arch.pool, arch.pool},
      Conv2DSpec{arch.conv1_channels, arch.conv2_channels, arch.conv2_kernel, 1},
      ReLUSpec{},
      MaxPool2DSpec{arch.pool, arch.pool},
      FlattenSpec{}};
  Shape s = input;
  for (const auto& spec : specs) s = make_layer(spec)->output_shape(s);
  return {std::move(specs), s[0]};
}

/// Adaptor Dense(F -> embedding width), a [0, pi] sigmoid range map for the
/// angle-type embeddings, the quantum layer, then Dense(-> classes), Softmax.
inline Model build_hybrid(const QuantumLayerConfig& q, const ArchConfig& arch, const Shape& input,
                          std::size_t n_classes) {
  auto [specs, flat] = cnn_prefix(arch, input);
  specs.push_back(DenseSpec{flat, q.input_width()});
  if (!std::holds_alternative<AmplitudeEmbedding>(q.embedding)) specs.push_back(RangeMapSpec{});
  specs.push_back(QuantumSpec{q});
  specs.push_back(DenseSpec{q.output_width(), n_classes});
  specs.push_back(SoftmaxSpec{});
  return Model(input, std::move(specs));
}

/// Same prefix; the quantum block is replaced by Dense(F -> surrogate) + ReLU.
inline Model build_classical(const ArchConfig& arch, const Shape& input, std::size_t n_classes) {
  auto [specs, flat] = cnn_prefix(arch, input);
  specs.push_back(DenseSpec{flat, arch.surrogate_width});
  specs.push_back(ReLUSpec{});
  specs.push_back(DenseSpec{arch.surrogate_width, n_classes});
  specs.push_back(SoftmaxSpec{});
  return Model(input, std::move(specs));
}

// ---------------------------------------------------------------- checkpoint

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void write_quantum(io::Writer& w, const QuantumLayerConfig& q) {
  w.u64(q.n_qubits);
  w.u32(static_cast<std::uint32_t>(q.embedding.index()));
  if (const auto* a = std::get_if<AngleEmbedding>(&q.embedding)) w.u32(static_cast<std::uint32_t>(a->axis));
  if (const auto* i = std::get_if<IqpEmbedding>(&q.embedding)) w.u64(i->repeats);
  w.u32(static_cast<std::uint32_t>(q.circuit.index()));
  if (const auto* s = std::get_if<StronglyEntangling>(&q.circuit)) {
    w.u64(s->n_layers);
  } else {
    const auto& r = std::get<RandomLayers>(q.circuit);
    w.u64(r.n_layers);
    w.u64(r.rots_per_layer);
    w.u64(r.seed);
    w.f64(r.imprimitive_ratio);
  }
  w.u32(static_cast<std::uint32_t>(q.measurement));
}

inline QuantumLayerConfig read_quantum(io::Reader& r) {
  QuantumLayerConfig q;
  q.n_qubits = r.u64();
  switch (r.u32()) {
    case 0: {
      const auto axis = r.u32();
      if (axis > 2) r.fail("bad rotation axis tag");
      q.embedding = AngleEmbedding{static_cast<Axis>(axis)};
      break;
    }
    case 1: q.embedding = AmplitudeEmbedding{}; break;
    case 2: q.embedding = IqpEmbedding{r.u64()}; break;
    default: r.fail("bad embedding tag");
  }
  switch (r.u32()) {
    case 0: q.circuit = StronglyEntangling{r.u64()}; break;
    case 1: {
      RandomLayers rl;
      rl.n_layers = r.u64();
      rl.rots_per_layer = r.u64();
      rl.seed = r.u64();
      rl.imprimitive_ratio = r.f64();
      q.circuit = rl;
      break;
    }
    default: r.fail("bad circuit tag");
  }
  const auto m = r.u32();
  if (m > static_cast<std::uint32_t>(MeasurementKind::Probability)) r.fail("bad measurement tag");
  q.measurement = static_cast<MeasurementKind>(m);
  return q;
}

}  // namespace detail

/// "QSER", u32 version, u32 rank + u64 dims, u32 layer count, per layer a u32
/// kind tag and its fields, then per layer u64 count + f64 parameters.
inline io::Bytes encode_checkpoint(const Model& model) {
  io::Writer w;
  w.bytes("QSER");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(model.input_shape().size()));
  for (auto d : model.input_shape()) w.u64(d);
  w.u32(static_cast<std::uint32_t>(model.specs().size()));
  for (const auto& spec : model.specs()) {
    w.u32(static_cast<std::uint32_t>(spec.index()));
    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Conv2DSpec>) {
            w.u64(s.in_channels);
            w.u64(s.out_channels);
            w.u64(s.kernel);
            w.u64(s.stride);
          } else if constexpr (std::is_same_v<T, MaxPool2DSpec>) {
            w.u64(s.kernel);
            w.u64(s.stride);
          } else if constexpr (std::is_same_v<T, DenseSpec>) {
            w.u64(s.in);
            w.u64(s.out);
          } else if constexpr (std::is_same_v<T, RangeMapSpec>) {
            w.f64(s.scale);
          } else if constexpr (std::is_same_v<T, QuantumSpec>) {
            detail::write_quantum(w, s.config);
          }
        },
        spec);
  }
  for (std::size_t i = 0; i < model.n_layers(); ++i) {
    auto p = model.layer(i).params();
    w.u64(p.size());
    w.f64s(p);
  }
  return std::move(w.data());
}

inline Model decode_checkpoint(std::span<const std::uint8_t> bytes, const std::string& name) {
  io::Reader r(bytes, name);
  if (r.remaining() < 8 || r.bytes(4) != "QSER") r.fail("missing QSER magic", 0);
  if (const auto v = r.u32(); v != kCheckpointVersion)
    r.fail("unsupported checkpoint version " + std::to_string(v), 4);
  Shape input(r.u32());
  if (input.size() > 8) r.fail("implausible input rank");
  for (auto& d : input) d = r.u64();
  const std::uint32_t n = r.u32();
  if (n > 1024) r.fail("implausible layer count");
  std::vector<LayerSpec> specs;
  for (std::uint32_t i = 0; i < n; ++i) {
    switch (r.u32()) {
      case 0: {
        Conv2DSpec s{};
        s.in_channels = r.u64();
        s.out_channels = r.u64();
        s.kernel = r.u64();
        s.stride = r.u64();
        specs.push_back(s);
        break;
      }
      case 1: specs.push_back(ReLUSpec{}); break;
      case 2: {
        MaxPool2DSpec s;
        s.kernel = r.u64();
        s.stride = r.u64();
        specs.push_back(s);
        break;
      }
      case 3: specs.push_back(FlattenSpec{}); break;
      case 4: {
        DenseSpec s{};
        s.in = r.u64();
        s.out = r.u64();
        specs.push_back(s);
        break;
      }
      case 5: specs.push_back(RangeMapSpec{r.f64()}); break;
      case 6: specs.push_back(QuantumSpec{detail::read_quantum(r)}); break;
      case 7: specs.push_back(SoftmaxSpec{}); break;
      default: r.fail("unknown layer tag");
    }
  }
  Model model = [&] {
    try {
      return Model(input, std::move(specs));
    } catch (const Error& e) {
      r.fail(std::string("invalid layer chain: ") + e.what());
    }
  }();
  for (std::size_t i = 0; i < model.n_layers(); ++i) {
    const std::size_t at = r.offset();
    const auto count = r.u64();
    auto p = model.layer(i).params();
    if (count != p.size())
      r.fail("layer " + std::to_string(i) + " stores " + std::to_string(count) +
                 " parameters, expected " + std::to_string(p.size()),
             at);
    for (auto& v : p) v = r.f64();
  }
  if (!r.at_end()) r.fail("trailing bytes after parameters");
  return model;
}

inline void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  io::write_file(path, encode_checkpoint(model));
}

inline Model load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path), path.string());
}

}  // namespace qser
