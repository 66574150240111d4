#pragma once

// Supervised learners driven by the teacher: sign-feedback robust learning and
// the real-valued MSE regression baseline.

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ildmap/acoustics.hpp"
#include "ildmap/neuralnet.hpp"
#include "ildmap/teacher.hpp"

namespace ildmap {

enum class InputEncoding { ild, raw_angle };

/// Network input for a source at azimuth y.
inline double encode_input(AngleDeg y, InputEncoding encoding) {
  return encoding == InputEncoding::ild ? ild(y) : y.value();
}

struct RobustTrainConfig {
  long episodes = 200000;
  AdamConfig adam{};
  std::optional<double> huber_c;  // disabled unless set; needs the true location
  InputEncoding encoding = InputEncoding::ild;
  long eval_every = 1000;
  double eval_step = 1.0;
  bool invert_feedback = false;  // negative-control hook: flips the applied gradient sign

  void validate() const {
    if (episodes < 1) throw std::invalid_argument("RobustTrainConfig: episodes must be >= 1");
    if (huber_c && !(*huber_c > 0.0)) throw std::invalid_argument("RobustTrainConfig: huber c must be positive");
    adam.validate();
  }
};

/// Clipped residual: descent gradient on the prediction under the Huber loss
/// with tuning constant c.
inline double huber_gradient(double prediction, double reference, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("huber_gradient: c must be positive");
  const double residual = prediction - reference;
  if (std::abs(residual) < c) return residual;
  return c * sign(residual);
}

struct EpisodeOutcome {
  double source = 0.0;
  double prediction = 0.0;
  double applied_gradient = 0.0;
};

/// Scratch buffers reused across episodes.
struct TrainScratch {
  ForwardCache cache;
  Gradients grads;
};

namespace detail {

inline void apply_output_gradient(Network& net, TrainScratch& scratch, double output_gradient,
                                  const AdamConfig& adam) {
  if (scratch.grads.layers.size() != net.layer_count()) scratch.grads = net.make_gradients();
  const double og[1] = {output_gradient};
  net.backward_into(scratch.cache, og, scratch.grads, false);
  net.add_weight_decay(scratch.grads);
  net.adam_step(scratch.grads, adam);
}

}  // namespace detail

/**
 * \brief One robust-learning episode.
 *
 * The student predicts y~ from the cue, the agent turns by y~, and the teacher
 * reports only which side the source is on afterwards. Feedback +1 means the
 * source is still to the right, so the prediction undershot: the descent
 * gradient on y~ is -side.
 */
inline EpisodeOutcome robust_episode(Network& student, const TeacherModel& teacher, RngStream& rng,
                                     const RobustTrainConfig& cfg, TrainScratch& scratch) {
  const AngleDeg y = reset(rng);
  const double input[1] = {encode_input(y, cfg.encoding)};
  student.forward(input, scratch.cache);
  const double prediction = scratch.cache.output()[0];
  double g = 0.0;
  if (cfg.huber_c) {
    g = huber_gradient(prediction, y.value(), *cfg.huber_c);
  } else {
    const AngleDeg residual = AngleDeg::clamp(y.value() - prediction);
    const SideFeedback feedback = teacher.side(residual, rng);
    g = -static_cast<double>(feedback.side);
  }
  if (cfg.invert_feedback) g = -g;
  detail::apply_output_gradient(student, scratch, g, cfg.adam);
  return {y.value(), prediction, g};
}

/// One regression episode toward the teacher's noisy real-valued estimate.
inline EpisodeOutcome mse_episode(Network& student, const TeacherModel& teacher, RngStream& rng,
                                  const RobustTrainConfig& cfg, TrainScratch& scratch) {
  const AngleDeg y = reset(rng);
  const double target = teacher.estimate(y, rng).location;
  const double input[1] = {encode_input(y, cfg.encoding)};
  student.forward(input, scratch.cache);
  const double prediction = scratch.cache.output()[0];
  const double g = 2.0 * (prediction - target);
  detail::apply_output_gradient(student, scratch, g, cfg.adam);
  return {y.value(), prediction, g};
}

struct GridPoint {
  double y_true = 0.0;
  double y_pred = 0.0;
};

struct EvalReport {
  std::vector<GridPoint> grid;
  double rmse = 0.0;
  double mean_signed_error = 0.0;
  double zero_crossing = std::numeric_limits<double>::quiet_NaN();
  int crossing_count = 0;  // > 1 flags a non-monotone map

  /// RMSE of the predictions against an arbitrary reference curve.
  double rmse_against(const std::function<double(double)>& reference) const {
    double ss = 0.0;
    for (const auto& p : grid) {
      const double d = p.y_pred - reference(p.y_true);
      ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(grid.size()));
  }
};

inline std::vector<double> evaluation_grid(double step) {
  if (!(step > 0.0)) throw std::invalid_argument("evaluation grid step must be positive");
  const double intervals = 180.0 / step;
  const long n = std::lround(intervals);
  if (n < 1 || std::abs(intervals - static_cast<double>(n)) > 1e-9) {
    throw std::invalid_argument("evaluation grid step must divide 180");
  }
  std::vector<double> ys;
  ys.reserve(static_cast<std::size_t>(n) + 1);
  for (long i = 0; i <= n; ++i) ys.push_back(-kMaxAngle + static_cast<double>(i) * step);
  ys.back() = kMaxAngle;
  return ys;
}

/// Fills rmse, mean signed error and the zero crossing nearest 0 from `grid`.
inline EvalReport summarize_grid(std::vector<GridPoint> grid) {
  EvalReport report;
  report.grid = std::move(grid);
  double ss = 0.0;
  double sum = 0.0;
  for (const auto& p : report.grid) {
    const double d = p.y_pred - p.y_true;
    ss += d * d;
    sum += d;
  }
  const auto n = static_cast<double>(report.grid.size());
  report.rmse = std::sqrt(ss / n);
  report.mean_signed_error = sum / n;

  double best = std::numeric_limits<double>::quiet_NaN();
  const auto consider = [&](double x) {
    ++report.crossing_count;
    if (std::isnan(best) || std::abs(x) < std::abs(best)) best = x;
  };
  for (std::size_t i = 0; i < report.grid.size(); ++i) {
    const auto& p = report.grid[i];
    if (p.y_pred == 0.0) {
      consider(p.y_true);
      continue;
    }
    if (i + 1 < report.grid.size()) {
      const auto& q = report.grid[i + 1];
      if (q.y_pred != 0.0 && ((p.y_pred < 0.0) != (q.y_pred < 0.0))) {
        const double frac = p.y_pred / (p.y_pred - q.y_pred);
        consider(p.y_true + frac * (q.y_true - p.y_true));
      }
    }
  }
  report.zero_crossing = best;
  return report;
}

inline EvalReport evaluate(const std::function<double(AngleDeg)>& map, double step) {
  std::vector<GridPoint> grid;
  for (double y : evaluation_grid(step)) grid.push_back({y, map(AngleDeg(y))});
  return summarize_grid(std::move(grid));
}

inline EvalReport evaluate(const Network& student, double step, InputEncoding encoding = InputEncoding::ild) {
  ForwardCache cache;
  return evaluate(
      [&](AngleDeg y) {
        const double input[1] = {encode_input(y, encoding)};
        student.forward(input, cache);
        return cache.output()[0];
      },
      step);
}

struct LearningCurvePoint {
  long episode = 0;
  double rmse = 0.0;
  double zero_crossing = 0.0;
};

enum class SupervisedRule { robust, mse };

inline const char* to_string(SupervisedRule r) { return r == SupervisedRule::robust ? "robust" : "mse"; }

/// Runs `cfg.episodes` episodes of the given rule, evaluating every
/// `cfg.eval_every` episodes (and after the last one).
inline std::vector<LearningCurvePoint> train_supervised(SupervisedRule rule, Network& student,
                                                        const TeacherModel& teacher, RngStream& rng,
                                                        const RobustTrainConfig& cfg) {
  cfg.validate();
  TrainScratch scratch;
  std::vector<LearningCurvePoint> curve;
  for (long e = 1; e <= cfg.episodes; ++e) {
    if (rule == SupervisedRule::robust) {
      robust_episode(student, teacher, rng, cfg, scratch);
    } else {
      mse_episode(student, teacher, rng, cfg, scratch);
    }
    if ((cfg.eval_every > 0 && e % cfg.eval_every == 0) || e == cfg.episodes) {
      const EvalReport r = evaluate(student, cfg.eval_step, cfg.encoding);
      curve.push_back({e, r.rmse, r.zero_crossing});
    }
  }
  return curve;
}

}  // namespace ildmap
