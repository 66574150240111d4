#pragma once

// Small dense feed-forward network with manual backprop, coupled L2 decay and Adam.
//
// Weights of each layer are stored input-major: weights[i * out + j] connects
// input unit i to output unit j. The forward pass is then a sum of scaled
// columns that skips inactive relu inputs, and the parameter gradient is an
// outer product over the same layout.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "ildmap/domain.hpp"

namespace ildmap {

enum class Activation { relu, identity };

/// Where the first relu sits. `dense_then_relu` is the usual MLP; `relu_on_input`
/// additionally rectifies the raw input before the first dense layer.
enum class InputMode { dense_then_relu, relu_on_input };

inline const char* to_string(Activation a) { return a == Activation::relu ? "relu" : "identity"; }
inline const char* to_string(InputMode m) { return m == InputMode::relu_on_input ? "relu_on_input" : "dense_then_relu"; }

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

inline InputMode input_mode_from_string(const std::string& s) {
  if (s == "dense_then_relu") return InputMode::dense_then_relu;
  if (s == "relu_on_input") return InputMode::relu_on_input;
  throw std::invalid_argument("unknown input mode '" + s + "'");
}

struct LayerSpec {
  std::size_t input_width = 1;
  std::size_t output_width = 1;
  Activation activation = Activation::identity;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("AdamConfig: learning rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
      throw std::invalid_argument("AdamConfig: betas must lie in [0, 1)");
  }
};

struct DenseLayer {
  LayerSpec spec;
  std::vector<double> weights;  // input-major, size in * out
  std::vector<double> biases;   // size out

  double& weight(std::size_t in, std::size_t out) { return weights[in * spec.output_width + out]; }
  double weight(std::size_t in, std::size_t out) const { return weights[in * spec.output_width + out]; }
};

struct LayerGradient {
  std::vector<double> weights;
  std::vector<double> biases;
};

struct Gradients {
  std::vector<LayerGradient> layers;
  std::vector<double> input;  // d(output-gradient . output) / d(input)

  void scale(double factor) {
    for (auto& l : layers) {
      for (auto& w : l.weights) w *= factor;
      for (auto& b : l.biases) b *= factor;
    }
    for (auto& x : input) x *= factor;
  }
};

/// Activations recorded by a forward pass. Tied to the parameter version of the
/// network that produced it.
struct ForwardCache {
  std::vector<std::vector<double>> layer_inputs;  // input seen by each dense layer
  std::vector<std::vector<double>> outputs;       // post-activation output of each layer
  std::vector<double> raw_input;
  std::uint64_t version = 0;
  const void* owner = nullptr;

  std::span<const double> output() const { return outputs.back(); }
};

class Network {
 public:
  Network() = default;

  /// He-uniform weights (bound sqrt(6 / fan_in)), zero biases.
  Network(std::vector<LayerSpec> specs, double l2, RngStream& init_rng,
          InputMode input_mode = InputMode::dense_then_relu)
      : l2_(l2), input_mode_(input_mode) {
    build(specs);
    for (auto& layer : layers_) {
      const double bound = std::sqrt(6.0 / static_cast<double>(layer.spec.input_width));
      for (auto& w : layer.weights) w = init_rng.uniform(-bound, bound);
    }
  }

  /// All-zero parameters.
  static Network zeros(std::vector<LayerSpec> specs, double l2 = 0.0,
                       InputMode input_mode = InputMode::dense_then_relu) {
    Network net;
    net.l2_ = l2;
    net.input_mode_ = input_mode;
    net.build(specs);
    return net;
  }

  std::size_t input_width() const { return layers_.front().spec.input_width; }
  std::size_t output_width() const { return layers_.back().spec.output_width; }
  std::size_t layer_count() const { return layers_.size(); }
  double l2() const { return l2_; }
  void set_l2(double l2) { l2_ = l2; }
  InputMode input_mode() const { return input_mode_; }
  std::uint64_t adam_steps() const { return adam_steps_; }

  const DenseLayer& layer(std::size_t i) const { return layers_.at(i); }
  /// Mutable access invalidates outstanding caches.
  DenseLayer& mutable_layer(std::size_t i) {
    ++version_;
    return layers_.at(i);
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.size() + l.biases.size();
    return n;
  }

  void forward(std::span<const double> input, ForwardCache& cache) const {
    if (input.size() != input_width()) {
      throw std::invalid_argument("Network::forward: input width " + std::to_string(input.size()) +
                                  " does not match " + std::to_string(input_width()));
    }
    cache.raw_input.assign(input.begin(), input.end());
    cache.layer_inputs.resize(layers_.size());
    cache.outputs.resize(layers_.size());
    cache.layer_inputs[0].assign(input.begin(), input.end());
    if (input_mode_ == InputMode::relu_on_input) {
      for (auto& x : cache.layer_inputs[0]) x = x > 0.0 ? x : 0.0;
    }
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      const auto& layer = layers_[li];
      const std::size_t n_in = layer.spec.input_width;
      const std::size_t n_out = layer.spec.output_width;
      const double* x = cache.layer_inputs[li].data();
      auto& z = cache.outputs[li];
      z.assign(layer.biases.begin(), layer.biases.end());
      double* zp = z.data();
      for (std::size_t i = 0; i < n_in; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        const double* col = layer.weights.data() + i * n_out;
        for (std::size_t j = 0; j < n_out; ++j) zp[j] += xi * col[j];
      }
      if (layer.spec.activation == Activation::relu) {
        for (std::size_t j = 0; j < n_out; ++j) zp[j] = zp[j] > 0.0 ? zp[j] : 0.0;
      }
      if (li + 1 < layers_.size()) cache.layer_inputs[li + 1] = z;
    }
    cache.version = version_;
    cache.owner = this;
  }

  ForwardCache forward(std::span<const double> input) const {
    ForwardCache cache;
    forward(input, cache);
    return cache;
  }

  std::vector<double> predict(std::span<const double> input) const {
    ForwardCache cache;
    forward(input, cache);
    return cache.outputs.back();
  }

  double predict_scalar(std::span<const double> input) const { return predict(input).front(); }

  Gradients make_gradients() const {
    Gradients g;
    g.layers.resize(layers_.size());
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      g.layers[i].weights.assign(layers_[i].weights.size(), 0.0);
      g.layers[i].biases.assign(layers_[i].biases.size(), 0.0);
    }
    g.input.assign(input_width(), 0.0);
    return g;
  }

  /// Gradients of (output_gradient . output) w.r.t. every parameter and the
  /// input, plus l2 * w on each weight.
  Gradients backward(const ForwardCache& cache, std::span<const double> output_gradient) const {
    Gradients g = make_gradients();
    backward_into(cache, output_gradient, g, false);
    add_weight_decay(g);
    return g;
  }

  /// Data term only. With `accumulate` the result is added onto `grads`.
  void backward_into(const ForwardCache& cache, std::span<const double> output_gradient, Gradients& grads,
                     bool accumulate) const {
    check_cache(cache, output_gradient);
    if (!accumulate) {
      for (auto& l : grads.layers) {
        std::fill(l.weights.begin(), l.weights.end(), 0.0);
        std::fill(l.biases.begin(), l.biases.end(), 0.0);
      }
      std::fill(grads.input.begin(), grads.input.end(), 0.0);
    }
    std::vector<double> delta(output_gradient.begin(), output_gradient.end());
    std::vector<double> upstream;
    for (std::size_t li = layers_.size(); li-- > 0;) {
      const auto& layer = layers_[li];
      const std::size_t n_in = layer.spec.input_width;
      const std::size_t n_out = layer.spec.output_width;
      if (layer.spec.activation == Activation::relu) {
        const auto& out = cache.outputs[li];
        for (std::size_t j = 0; j < n_out; ++j) {
          if (out[j] <= 0.0) delta[j] = 0.0;
        }
      }
      const double* x = cache.layer_inputs[li].data();
      auto& lg = grads.layers[li];
      const double* d = delta.data();
      for (std::size_t j = 0; j < n_out; ++j) lg.biases[j] += d[j];
      for (std::size_t i = 0; i < n_in; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        double* gw = lg.weights.data() + i * n_out;
        for (std::size_t j = 0; j < n_out; ++j) gw[j] += xi * d[j];
      }
      propagate(layer, delta, upstream);
      delta.swap(upstream);
    }
    finish_input_gradient(cache, delta);
    for (std::size_t i = 0; i < delta.size(); ++i) grads.input[i] += delta[i];
  }

  /// Input gradient only; parameters are not touched.
  std::vector<double> input_gradient(const ForwardCache& cache, std::span<const double> output_gradient) const {
    check_cache(cache, output_gradient);
    std::vector<double> delta(output_gradient.begin(), output_gradient.end());
    std::vector<double> upstream;
    for (std::size_t li = layers_.size(); li-- > 0;) {
      const auto& layer = layers_[li];
      if (layer.spec.activation == Activation::relu) {
        const auto& out = cache.outputs[li];
        for (std::size_t j = 0; j < layer.spec.output_width; ++j) {
          if (out[j] <= 0.0) delta[j] = 0.0;
        }
      }
      propagate(layer, delta, upstream);
      delta.swap(upstream);
    }
    finish_input_gradient(cache, delta);
    return delta;
  }

  void add_weight_decay(Gradients& grads) const {
    if (l2_ == 0.0) return;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      const auto& w = layers_[li].weights;
      auto& g = grads.layers[li].weights;
      for (std::size_t k = 0; k < w.size(); ++k) g[k] += l2_ * w[k];
    }
  }

  /// Bias-corrected Adam update in place.
  void adam_step(const Gradients& grads, const AdamConfig& cfg) {
    if (grads.layers.size() != layers_.size()) {
      throw std::invalid_argument("Network::adam_step: gradient layer count mismatch");
    }
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      if (grads.layers[li].weights.size() != layers_[li].weights.size() ||
          grads.layers[li].biases.size() != layers_[li].biases.size()) {
        throw std::invalid_argument("Network::adam_step: gradient shape mismatch in layer " + std::to_string(li));
      }
    }
    ++adam_steps_;
    ++version_;
    const double t = static_cast<double>(adam_steps_);
    const double correction1 = 1.0 - std::pow(cfg.beta1, t);
    const double correction2 = 1.0 - std::pow(cfg.beta2, t);
    const double step_size = cfg.learning_rate / correction1;
    const double inv_sqrt_c2 = 1.0 / std::sqrt(correction2);
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      auto& layer = layers_[li];
      auto& state = moments_[li];
      adam_update(layer.weights, grads.layers[li].weights, state.m_weights, state.v_weights, cfg, step_size,
                  inv_sqrt_c2);
      adam_update(layer.biases, grads.layers[li].biases, state.m_biases, state.v_biases, cfg, step_size,
                  inv_sqrt_c2);
    }
  }

  /// JSON shape header on the first line, then one value per line: for each
  /// layer its weights (input-major) and biases, followed by the Adam first and
  /// second moments in the same order.
  void save(std::ostream& os) const {
    nlohmann::json header;
    header["format"] = "ildmap-network";
    header["version"] = 1;
    header["l2"] = l2_;
    header["input_mode"] = to_string(input_mode_);
    header["adam_steps"] = adam_steps_;
    header["layers"] = nlohmann::json::array();
    for (const auto& l : layers_) {
      header["layers"].push_back({{"input_width", l.spec.input_width},
                                  {"output_width", l.spec.output_width},
                                  {"activation", to_string(l.spec.activation)}});
    }
    os << header.dump() << '\n';
    std::ostringstream buf;
    buf.precision(17);
    const auto emit = [&](const std::vector<double>& v) {
      for (double x : v) buf << x << '\n';
    };
    for (const auto& l : layers_) {
      emit(l.weights);
      emit(l.biases);
    }
    for (const auto& m : moments_) {
      emit(m.m_weights);
      emit(m.m_biases);
    }
    for (const auto& m : moments_) {
      emit(m.v_weights);
      emit(m.v_biases);
    }
    os << buf.str();
  }

  static Network load(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("Network::load: missing header");
    const auto header = nlohmann::json::parse(line);
    if (header.value("format", "") != "ildmap-network" || header.value("version", 0) != 1) {
      throw std::runtime_error("Network::load: unsupported format");
    }
    std::vector<LayerSpec> specs;
    for (const auto& l : header.at("layers")) {
      specs.push_back({l.at("input_width").get<std::size_t>(), l.at("output_width").get<std::size_t>(),
                       activation_from_string(l.at("activation").get<std::string>())});
    }
    Network net = zeros(specs, header.at("l2").get<double>(),
                        input_mode_from_string(header.at("input_mode").get<std::string>()));
    net.adam_steps_ = header.at("adam_steps").get<std::uint64_t>();
    const auto read = [&](std::vector<double>& v) {
      for (double& x : v) {
        if (!std::getline(is, line)) throw std::runtime_error("Network::load: truncated parameter list");
        x = std::stod(line);
      }
    };
    for (auto& l : net.layers_) {
      read(l.weights);
      read(l.biases);
    }
    for (auto& m : net.moments_) {
      read(m.m_weights);
      read(m.m_biases);
    }
    for (auto& m : net.moments_) {
      read(m.v_weights);
      read(m.v_biases);
    }
    return net;
  }

  /// Flat parameter vector in save() order (weights then biases per layer).
  std::vector<double> flat_parameters() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& l : layers_) {
      out.insert(out.end(), l.weights.begin(), l.weights.end());
      out.insert(out.end(), l.biases.begin(), l.biases.end());
    }
    return out;
  }

 private:
  struct AdamMoments {
    std::vector<double> m_weights, v_weights, m_biases, v_biases;
  };

  void build(const std::vector<LayerSpec>& specs) {
    if (specs.empty()) throw std::invalid_argument("Network: at least one layer required");
    for (std::size_t i = 0; i < specs.size(); ++i) {
      if (specs[i].input_width < 1 || specs[i].output_width < 1) {
        throw std::invalid_argument("Network: layer widths must be >= 1");
      }
      if (i > 0 && specs[i].input_width != specs[i - 1].output_width) {
        throw std::invalid_argument("Network: width mismatch between layers " + std::to_string(i - 1) + " and " +
                                    std::to_string(i));
      }
    }
    layers_.clear();
    moments_.clear();
    for (const auto& s : specs) {
      DenseLayer layer{s, std::vector<double>(s.input_width * s.output_width, 0.0),
                       std::vector<double>(s.output_width, 0.0)};
      moments_.push_back({std::vector<double>(layer.weights.size(), 0.0), std::vector<double>(layer.weights.size(), 0.0),
                          std::vector<double>(layer.biases.size(), 0.0), std::vector<double>(layer.biases.size(), 0.0)});
      layers_.push_back(std::move(layer));
    }
  }

  void check_cache(const ForwardCache& cache, std::span<const double> output_gradient) const {
    if (cache.owner != this || cache.version != version_ || cache.outputs.size() != layers_.size()) {
      throw std::logic_error("Network: stale or foreign forward cache");
    }
    if (output_gradient.size() != output_width()) {
      throw std::invalid_argument("Network: output gradient width mismatch");
    }
  }

  // upstream[i] = sum_j W[i][j] * delta[j]
  static void propagate(const DenseLayer& layer, const std::vector<double>& delta, std::vector<double>& upstream) {
    const std::size_t n_in = layer.spec.input_width;
    const std::size_t n_out = layer.spec.output_width;
    upstream.assign(n_in, 0.0);
    const double* d = delta.data();
    for (std::size_t i = 0; i < n_in; ++i) {
      const double* row = layer.weights.data() + i * n_out;
      double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
      std::size_t j = 0;
      for (; j + 4 <= n_out; j += 4) {
        s0 += row[j] * d[j];
        s1 += row[j + 1] * d[j + 1];
        s2 += row[j + 2] * d[j + 2];
        s3 += row[j + 3] * d[j + 3];
      }
      for (; j < n_out; ++j) s0 += row[j] * d[j];
      upstream[i] = (s0 + s1) + (s2 + s3);
    }
  }

  void finish_input_gradient(const ForwardCache& cache, std::vector<double>& delta) const {
    if (input_mode_ == InputMode::relu_on_input) {
      for (std::size_t i = 0; i < delta.size(); ++i) {
        if (cache.raw_input[i] <= 0.0) delta[i] = 0.0;
      }
    }
  }

  static void adam_update(std::vector<double>& params, const std::vector<double>& grads, std::vector<double>& m,
                          std::vector<double>& v, const AdamConfig& cfg, double step_size, double inv_sqrt_c2) {
    const double b1 = cfg.beta1;
    const double b2 = cfg.beta2;
    const double eps = cfg.epsilon;
    double* p = params.data();
    const double* g = grads.data();
    double* mp = m.data();
    double* vp = v.data();
    const std::size_t n = params.size();
    // Moments of dead units decay geometrically into the subnormal range, which
    // is very slow on common hardware; values below kMomentFloor are flushed.
    constexpr double kMomentFloor = 1e-100;
    for (std::size_t k = 0; k < n; ++k) {
      const double gk = std::abs(g[k]) < kMomentFloor ? 0.0 : g[k];
      double mk = b1 * mp[k] + (1.0 - b1) * gk;
      double vk = b2 * vp[k] + (1.0 - b2) * gk * gk;
      mk = std::abs(mk) < kMomentFloor ? 0.0 : mk;
      vk = vk < kMomentFloor ? 0.0 : vk;
      mp[k] = mk;
      vp[k] = vk;
      p[k] -= step_size * mk / (std::sqrt(vk) * inv_sqrt_c2 + eps);
    }
  }

  std::vector<DenseLayer> layers_;
  std::vector<AdamMoments> moments_;
  double l2_ = 0.0;
  InputMode input_mode_ = InputMode::dense_then_relu;
  std::uint64_t adam_steps_ = 0;
  std::uint64_t version_ = 0;
};

inline constexpr std::size_t kHiddenWidth = 256;
inline constexpr double kDefaultWeightDecay = 0.1;

/// 1 -> 256 relu -> 256 relu -> 1 identity.
inline Network student_architecture(RngStream& rng, InputMode mode = InputMode::dense_then_relu,
                                    double l2 = kDefaultWeightDecay) {
  return Network({{1, kHiddenWidth, Activation::relu},
                  {kHiddenWidth, kHiddenWidth, Activation::relu},
                  {kHiddenWidth, 1, Activation::identity}},
                 l2, rng, mode);
}

/// 2 -> 256 relu -> 256 relu -> 1 identity, input (state, action).
inline Network critic_architecture(RngStream& rng, double l2 = kDefaultWeightDecay) {
  return Network({{2, kHiddenWidth, Activation::relu},
                  {kHiddenWidth, kHiddenWidth, Activation::relu},
                  {kHiddenWidth, 1, Activation::identity}},
                 l2, rng);
}

}  // namespace ildmap
