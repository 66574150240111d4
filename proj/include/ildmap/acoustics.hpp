#pragma once

// Interaural level difference cue and the orienting MDP.

#include <cmath>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "ildmap/domain.hpp"

namespace ildmap {

inline constexpr double kCueFrequencyHz = 3600.0;

/// ILD in dB for a source at azimuth y (degrees) and tone frequency f (Hz).
inline double ild(AngleDeg y, double frequency_hz = kCueFrequencyHz) {
  if (!y.in_range()) {
    throw std::out_of_range("ild: azimuth outside [-90, 90]");
  }
  if (!(frequency_hz > 0.0)) {
    throw std::invalid_argument("ild: frequency must be positive");
  }
  return 0.18 * std::sqrt(frequency_hz) * std::sin(deg_to_rad(y.value()));
}

struct EnvConfig {
  double reward = 100.0;
  double success_window = 5.0;
  double gamma = 0.99;
  int max_steps = 2;
  double frequency_hz = kCueFrequencyHz;

  void validate() const {
    if (!(reward > 0.0)) throw std::invalid_argument("EnvConfig: reward must be positive");
    if (!(success_window > 0.0 && success_window < kMaxAngle))
      throw std::invalid_argument("EnvConfig: success window must lie in (0, 90)");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("EnvConfig: gamma outside [0, 1]");
    if (max_steps < 1) throw std::invalid_argument("EnvConfig: max_steps must be >= 1");
  }
};

struct Transition {
  AngleDeg state;
  AngleDeg action;
  double reward = 0.0;
  AngleDeg next_state;
  bool done = false;
  int step_index = 1;
};

struct Episode {
  AngleDeg initial_state;
  std::vector<Transition> transitions;

  bool finished() const { return !transitions.empty() && transitions.back().done; }
  double total_reward() const {
    double sum = 0.0;
    for (const auto& t : transitions) sum += t.reward;
    return sum;
  }
  bool succeeded(const EnvConfig& cfg) const {
    return finished() && transitions.back().reward == cfg.reward;
  }
};

/// +r inside the success window, -r up to 90 degrees off, -2r beyond.
inline double reward(AngleDeg s, AngleDeg a, const EnvConfig& cfg) {
  const double err = std::abs(s.value() - a.value());
  if (err <= cfg.success_window) return cfg.reward;
  if (err <= kMaxAngle) return -cfg.reward;
  return -2.0 * cfg.reward;
}

/// Next relative source location after orienting by `a`; saturates at the
/// +-90 boundary when the turn overshoots by more than a quarter turn.
inline AngleDeg next_location(AngleDeg s, AngleDeg a) {
  const double diff = s.value() - a.value();
  if (std::abs(diff) > kMaxAngle) return AngleDeg(kMaxAngle * sign(diff));
  return AngleDeg(diff);
}

/// One environment interaction. `step_index` is 1-based. The action is clamped
/// to the action range before it is applied.
inline Transition step(AngleDeg s, AngleDeg a, int step_index, const EnvConfig& cfg) {
  if (step_index < 1 || step_index > cfg.max_steps) {
    throw std::logic_error("step: episode already terminated");
  }
  const AngleDeg action = AngleDeg::clamp(a.value());
  Transition t;
  t.state = s;
  t.action = action;
  t.reward = reward(s, action, cfg);
  t.next_state = next_location(s, action);
  t.step_index = step_index;
  t.done = std::abs(s.value() - action.value()) <= cfg.success_window || step_index == cfg.max_steps;
  return t;
}

/// Appends a step to an in-progress episode.
inline const Transition& step(Episode& episode, AngleDeg a, const EnvConfig& cfg) {
  if (episode.finished()) {
    throw std::logic_error("step: episode already terminated");
  }
  const AngleDeg s = episode.transitions.empty() ? episode.initial_state : episode.transitions.back().next_state;
  episode.transitions.push_back(step(s, a, static_cast<int>(episode.transitions.size()) + 1, cfg));
  return episode.transitions.back();
}

/// Source location for a new episode, uniform over [-90, 90].
inline AngleDeg reset(RngStream& rng) { return AngleDeg(rng.uniform(-kMaxAngle, kMaxAngle)); }

inline double discounted_return(const Episode& episode, double gamma) {
  double total = 0.0;
  double discount = 1.0;
  for (const auto& t : episode.transitions) {
    total += discount * t.reward;
    discount *= gamma;
  }
  return total;
}

inline void write_episode_csv_header(std::ostream& os) { os << "episode,step,s,a,reward,s_next,done\r\n"; }

inline void write_episode_csv(std::ostream& os, long episode_index, const Episode& episode) {
  for (const auto& t : episode.transitions) {
    os << episode_index << ',' << t.step_index << ',' << t.state.value() << ',' << t.action.value() << ','
       << t.reward << ',' << t.next_state.value() << ',' << (t.done ? 1 : 0) << "\r\n";
  }
}

}  // namespace ildmap
