#pragma once

// Central finite-difference check of Network::backward.
//
// The probed objective is f = g . net(x) + 0.5 * l2 * |W|^2, whose exact
// gradient is what backward() returns. Probes that straddle a relu kink (the
// two one-sided differences disagree by more than the tolerance) are redrawn;
// an undetected kink can then bias the central difference by at most half the
// tolerance.

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "ildmap/neuralnet.hpp"

namespace ildmap {

struct GradCheckResult {
  int probes = 0;
  int failures = 0;
  int redrawn = 0;
  double max_relative_error = 0.0;
  bool passed() const { return failures == 0 && probes > 0; }
};

/// |a - n| / max(1, |a|, |n|).
inline double gradient_relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

namespace detail {

inline double probe_objective(const Network& net, const std::vector<double>& x, const std::vector<double>& g) {
  const std::vector<double> out = net.predict(x);
  double f = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) f += g[i] * out[i];
  double sq = 0.0;
  for (std::size_t li = 0; li < net.layer_count(); ++li) {
    for (double w : net.layer(li).weights) sq += w * w;
  }
  return f + 0.5 * net.l2() * sq;
}

}  // namespace detail

/**
 * \brief Compares backward() against central differences on random probes.
 *
 * Each probe draws an input (uniform in +-input_range), an output gradient
 * (standard normal) and one parameter; layers and weight/bias kinds are
 * cycled so every tensor is visited. The input gradient of a random input
 * coordinate is checked on the same probe.
 */
inline GradCheckResult check_gradients(Network net, RngStream& rng, int probes = 100, double input_range = 10.0,
                                       double step = 1e-5, double tolerance = 1e-4) {
  GradCheckResult result;
  const std::size_t n_layers = net.layer_count();
  int attempts = 0;
  for (int k = 0; k < probes;) {
    if (++attempts > probes * 20) break;
    std::vector<double> x(net.input_width());
    for (auto& v : x) v = rng.uniform(-input_range, input_range);
    std::vector<double> g(net.output_width());
    for (auto& v : g) v = rng.normal();
    const std::size_t li = static_cast<std::size_t>(k) % n_layers;
    const bool probe_bias = (static_cast<std::size_t>(k) / n_layers) % 2 == 1;
    const std::size_t count = probe_bias ? net.layer(li).biases.size() : net.layer(li).weights.size();
    const std::size_t pi = static_cast<std::size_t>(rng.below(count));
    const std::size_t xi = static_cast<std::size_t>(rng.below(x.size()));

    const ForwardCache cache = net.forward(x);
    const Gradients analytic = net.backward(cache, g);
    const double a_param = probe_bias ? analytic.layers[li].biases[pi] : analytic.layers[li].weights[pi];
    const double a_input = analytic.input[xi];

    const auto param = [&]() -> double& {
      auto& layer = net.mutable_layer(li);
      return probe_bias ? layer.biases[pi] : layer.weights[pi];
    };
    const double original = param();
    const double f0 = detail::probe_objective(net, x, g);
    param() = original + step;
    const double fp = detail::probe_objective(net, x, g);
    param() = original - step;
    const double fm = detail::probe_objective(net, x, g);
    param() = original;

    const double orig_x = x[xi];
    x[xi] = orig_x + step;
    const double fxp = detail::probe_objective(net, x, g);
    x[xi] = orig_x - step;
    const double fxm = detail::probe_objective(net, x, g);
    x[xi] = orig_x;

    const auto kink = [&](double plus, double minus) {
      const double right = (plus - f0) / step;
      const double left = (f0 - minus) / step;
      return std::abs(right - left) > tolerance * std::max({1.0, std::abs(right), std::abs(left)});
    };
    if (kink(fp, fm) || kink(fxp, fxm)) {
      ++result.redrawn;
      continue;
    }
    const double n_param = (fp - fm) / (2.0 * step);
    const double n_input = (fxp - fxm) / (2.0 * step);
    const double err = std::max(gradient_relative_error(a_param, n_param), gradient_relative_error(a_input, n_input));
    result.max_relative_error = std::max(result.max_relative_error, err);
    if (err > tolerance) ++result.failures;
    ++result.probes;
    ++k;
  }
  return result;
}

}  // namespace ildmap
