#pragma once

// Actor-critic with deterministic policy gradient, stabilized by the innate
// teacher through a two-armed selector.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <string>
#include <vector>

#include "ildmap/acoustics.hpp"
#include "ildmap/neuralnet.hpp"
#include "ildmap/robust.hpp"
#include "ildmap/teacher.hpp"

namespace ildmap {

enum class Controller { teacher, student };

inline const char* to_string(Controller c) { return c == Controller::student ? "student" : "teacher"; }

struct SelectorConfig {
  double beta_teacher = 0.005;
  double beta_student = 0.1;
  double epsilon_student = 0.5;
  double initial_teacher = 0.0;
  double initial_student = 0.0;

  void validate() const {
    if (!(beta_teacher > 0.0 && beta_teacher <= 1.0) || !(beta_student > 0.0 && beta_student <= 1.0))
      throw std::invalid_argument("SelectorConfig: betas must lie in (0, 1]");
    if (!(epsilon_student >= 0.0 && epsilon_student <= 1.0))
      throw std::invalid_argument("SelectorConfig: epsilon_student must lie in [0, 1]");
  }
};

struct SelectorState {
  double avg_teacher = 0.0;
  double avg_student = 0.0;
  Controller last_choice = Controller::teacher;
  std::deque<Controller> recent;  // most recent choices, oldest first
  std::size_t recent_capacity = 1000;

  static SelectorState from(const SelectorConfig& cfg) {
    SelectorState s;
    s.avg_teacher = cfg.initial_teacher;
    s.avg_student = cfg.initial_student;
    return s;
  }
};

/// Student iff its average beats the teacher's (ties go to the teacher), then a
/// teacher decision is overridden to student with probability epsilon_student.
/// One uniform draw is consumed per call either way.
inline Controller selector_choose(SelectorState& state, const SelectorConfig& cfg, RngStream& rng) {
  Controller choice = state.avg_student > state.avg_teacher ? Controller::student : Controller::teacher;
  const bool override_to_student = rng.bernoulli(cfg.epsilon_student);
  if (override_to_student) choice = Controller::student;
  state.last_choice = choice;
  state.recent.push_back(choice);
  while (state.recent.size() > state.recent_capacity) state.recent.pop_front();
  return choice;
}

/// Exponential average update of the selected controller only.
inline void selector_update(SelectorState& state, double r, bool was_student, const SelectorConfig& cfg) {
  if (was_student) {
    state.avg_student = (1.0 - cfg.beta_student) * state.avg_student + cfg.beta_student * r;
  } else {
    state.avg_teacher = (1.0 - cfg.beta_teacher) * state.avg_teacher + cfg.beta_teacher * r;
  }
}

/// Fixed-capacity FIFO of transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 100, std::size_t batch_size = 8)
      : capacity_(capacity), batch_size_(batch_size) {
    if (capacity == 0 || batch_size == 0 || batch_size > capacity) {
      throw std::invalid_argument("ReplayBuffer: need 0 < batch_size <= capacity");
    }
    storage_.reserve(capacity);
  }

  void push(const Transition& t) {
    if (storage_.size() < capacity_) {
      storage_.push_back(t);
    } else {
      storage_[head_] = t;
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return storage_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t batch_size() const { return batch_size_; }

  /// i-th oldest stored transition.
  const Transition& at(std::size_t i) const { return storage_.at((head_ + i) % storage_.size()); }

  /// Slot indices (oldest = 0) of a uniform sample without replacement; empty
  /// while the buffer holds fewer than batch_size transitions.
  std::vector<std::size_t> sample_indices(RngStream& rng) const {
    if (storage_.size() < batch_size_) return {};
    std::vector<std::size_t> pool(storage_.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    for (std::size_t i = 0; i < batch_size_; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(batch_size_);
    return pool;
  }

  std::vector<Transition> sample(RngStream& rng) const {
    std::vector<Transition> out;
    for (std::size_t i : sample_indices(rng)) out.push_back(at(i));
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t batch_size_;
  std::vector<Transition> storage_;
  std::size_t head_ = 0;
};

inline std::vector<Transition> replay_sample(const ReplayBuffer& buffer, RngStream& rng) { return buffer.sample(rng); }

enum class RlVariant { naive_dpg, dpg_replay, robust_rl, robust_rl_replay };

inline const char* to_string(RlVariant v) {
  switch (v) {
    case RlVariant::naive_dpg:
      return "naive-dpg";
    case RlVariant::dpg_replay:
      return "dpg-replay";
    case RlVariant::robust_rl:
      return "robust-rl";
    case RlVariant::robust_rl_replay:
      return "robust-rl-replay";
  }
  return "?";
}

inline RlVariant rl_variant_from_string(const std::string& s) {
  for (auto v : {RlVariant::naive_dpg, RlVariant::dpg_replay, RlVariant::robust_rl, RlVariant::robust_rl_replay}) {
    if (s == to_string(v)) return v;
  }
  throw std::invalid_argument("unknown RL variant '" + s + "'");
}

inline bool uses_teacher(RlVariant v) { return v == RlVariant::robust_rl || v == RlVariant::robust_rl_replay; }
inline bool uses_replay(RlVariant v) { return v == RlVariant::dpg_replay || v == RlVariant::robust_rl_replay; }

struct RlConfig {
  long episodes = 300000;
  EnvConfig env{};
  AdamConfig actor_adam{};
  AdamConfig critic_adam{};
  double weight_decay = kDefaultWeightDecay;
  SelectorConfig selector{};
  std::size_t replay_capacity = 100;
  std::size_t replay_batch = 8;
  RlVariant variant = RlVariant::robust_rl;
  InputMode actor_input_mode = InputMode::dense_then_relu;
  long eval_every = 5000;  // 0 disables periodic actor evaluation
  double eval_step = 1.0;

  void validate() const {
    if (episodes < 0) throw std::invalid_argument("RlConfig: episodes must be >= 0");
    env.validate();
    actor_adam.validate();
    critic_adam.validate();
    selector.validate();
  }
};

/// Critic input for a (state, action) pair; both angles in degrees.
inline std::array<double, 2> critic_input(AngleDeg s, AngleDeg a) { return {s.value(), a.value()}; }

/// Actor input: the ILD cue of the source's current relative location.
inline std::array<double, 1> actor_input(AngleDeg s) { return {ild(AngleDeg::clamp(s.value()))}; }

struct RlScratch {
  ForwardCache actor_cache;
  ForwardCache critic_cache;
  ForwardCache critic_next_cache;
  Gradients actor_grads;
  Gradients critic_grads;
};

inline double policy_action(const Network& actor, AngleDeg s, ForwardCache& cache) {
  const auto in = actor_input(s);
  actor.forward(in, cache);
  return cache.output()[0];
}

namespace detail {

inline double td_error(const Network& critic, const Transition& t, AngleDeg next_action, double gamma,
                       RlScratch& scratch) {
  double target = t.reward;
  if (!t.done) {
    const auto next_in = critic_input(t.next_state, next_action);
    critic.forward(next_in, scratch.critic_next_cache);
    target += gamma * scratch.critic_next_cache.output()[0];
  }
  const auto in = critic_input(t.state, t.action);
  critic.forward(in, scratch.critic_cache);
  return scratch.critic_cache.output()[0] - target;
}

inline void ensure_grads(const Network& net, Gradients& g) {
  if (g.layers.size() != net.layer_count()) g = net.make_gradients();
}

}  // namespace detail

/// Semi-gradient TD(0) step on the critic. Terminal transitions do not
/// bootstrap. Returns Q(s, a) - target before the update.
inline double critic_td_update(Network& critic, const Transition& t, AngleDeg next_action, double gamma,
                               const AdamConfig& adam, RlScratch& scratch) {
  const double td = detail::td_error(critic, t, next_action, gamma, scratch);
  detail::ensure_grads(critic, scratch.critic_grads);
  const double og[1] = {2.0 * td};
  critic.backward_into(scratch.critic_cache, og, scratch.critic_grads, false);
  critic.add_weight_decay(scratch.critic_grads);
  critic.adam_step(scratch.critic_grads, adam);
  return td;
}

inline double critic_td_update(Network& critic, const Transition& t, AngleDeg next_action, double gamma,
                               const AdamConfig& adam = {}) {
  RlScratch scratch;
  return critic_td_update(critic, t, next_action, gamma, adam, scratch);
}

/// One critic step on the mean TD gradient of a replayed mini-batch, each
/// sample bootstrapped with the current policy's action at its next state.
inline void critic_batch_update(Network& critic, const Network& actor, const std::vector<Transition>& batch,
                                double gamma, const AdamConfig& adam, RlScratch& scratch) {
  if (batch.empty()) return;
  detail::ensure_grads(critic, scratch.critic_grads);
  const double weight = 1.0 / static_cast<double>(batch.size());
  bool first = true;
  for (const auto& t : batch) {
    AngleDeg next_action;
    if (!t.done) next_action = AngleDeg::clamp(policy_action(actor, t.next_state, scratch.actor_cache));
    const double td = detail::td_error(critic, t, next_action, gamma, scratch);
    const double og[1] = {2.0 * td * weight};
    critic.backward_into(scratch.critic_cache, og, scratch.critic_grads, !first);
    first = false;
  }
  critic.add_weight_decay(scratch.critic_grads);
  critic.adam_step(scratch.critic_grads, adam);
}

/// dQ/da at (s, a) by backpropagating a unit output gradient to the action input.
inline double critic_action_gradient(const Network& critic, AngleDeg s, double a, ForwardCache& cache) {
  const std::array<double, 2> in = {s.value(), a};
  critic.forward(in, cache);
  const double one[1] = {1.0};
  return critic.input_gradient(cache, one)[1];
}

/// Deterministic policy gradient step: ascend Q(s, pi(s)) in the actor's parameters.
inline void actor_dpg_update(Network& actor, const Network& critic, AngleDeg s, const AdamConfig& adam,
                             RlScratch& scratch) {
  const double a = policy_action(actor, s, scratch.actor_cache);
  const double dq_da = critic_action_gradient(critic, s, a, scratch.critic_cache);
  detail::ensure_grads(actor, scratch.actor_grads);
  const double og[1] = {-dq_da};
  actor.backward_into(scratch.actor_cache, og, scratch.actor_grads, false);
  actor.add_weight_decay(scratch.actor_grads);
  actor.adam_step(scratch.actor_grads, adam);
}

inline void actor_dpg_update(Network& actor, const Network& critic, AngleDeg s, const AdamConfig& adam = {}) {
  RlScratch scratch;
  actor_dpg_update(actor, critic, s, adam, scratch);
}

/// Absolute-loss step pulling pi(s) toward a teacher estimate.
inline void actor_teacher_update(Network& actor, AngleDeg s, double teacher_estimate, const AdamConfig& adam,
                                 RlScratch& scratch) {
  const double a = policy_action(actor, s, scratch.actor_cache);
  detail::ensure_grads(actor, scratch.actor_grads);
  const double og[1] = {static_cast<double>(sign(a - teacher_estimate))};
  actor.backward_into(scratch.actor_cache, og, scratch.actor_grads, false);
  actor.add_weight_decay(scratch.actor_grads);
  actor.adam_step(scratch.actor_grads, adam);
}

struct EpisodeRecord {
  long episode = 0;
  Controller controller = Controller::student;
  double total_reward = 0.0;
  double cumulative_reward = 0.0;
  int steps = 0;
  bool success = false;
  double avg_teacher = 0.0;  // selector averages after the episode
  double avg_student = 0.0;
};

struct StepReward {
  double reward = 0.0;
  bool was_student = false;
};

struct ActorEvalPoint {
  long episode = 0;
  double rmse = 0.0;
  double zero_crossing = 0.0;
};

struct RunArtifacts {
  std::vector<EpisodeRecord> episodes;
  std::vector<StepReward> selector_log;  // every reward fed to selector_update, in order
  std::vector<ActorEvalPoint> actor_evals;
  SelectorState selector;
  Network actor;
  Network critic;
  EvalReport final_map;
};

/**
 * \brief Runs the teacher-stabilized actor-critic loop (or a plain DPG baseline).
 *
 * Per episode the selector fixes the controller for every step. Per step the
 * controller acts (teacher decodes are clamped to the action range), the
 * critic takes a TD step bootstrapped with the same controller's next action,
 * and the actor learns either by DPG (student episodes) or by an absolute-loss
 * step toward the teacher's acting estimate (teacher episodes). Replay variants
 * add one critic step per environment step on a sampled mini-batch.
 */
inline RunArtifacts run_algorithm1(const RlConfig& cfg, const TeacherModel& teacher, RngStream& rng) {
  cfg.validate();
  RngStream init_rng = rng.substream(0);
  RngStream env_rng = rng.substream(1);
  RngStream teacher_rng = rng.substream(2);
  RngStream selector_rng = rng.substream(3);
  RngStream replay_rng = rng.substream(4);

  RunArtifacts out;
  out.actor = student_architecture(init_rng, cfg.actor_input_mode, cfg.weight_decay);
  out.critic = critic_architecture(init_rng, cfg.weight_decay);
  out.selector = SelectorState::from(cfg.selector);
  Network& actor = out.actor;
  Network& critic = out.critic;
  SelectorState& selector = out.selector;

  const bool with_teacher = uses_teacher(cfg.variant);
  const bool with_replay = uses_replay(cfg.variant);
  ReplayBuffer buffer(cfg.replay_capacity, cfg.replay_batch);
  RlScratch scratch;
  RlScratch replay_scratch;
  ForwardCache policy_cache;
  double cumulative = 0.0;
  out.episodes.reserve(static_cast<std::size_t>(cfg.episodes));

  for (long e = 1; e <= cfg.episodes; ++e) {
    AngleDeg s = reset(env_rng);
    const Controller controller =
        with_teacher ? selector_choose(selector, cfg.selector, selector_rng) : Controller::student;
    const bool is_student = controller == Controller::student;

    const auto act = [&](AngleDeg state) {
      if (is_student) return AngleDeg::clamp(policy_action(actor, state, policy_cache));
      return AngleDeg::clamp(teacher.estimate(AngleDeg::clamp(state.value()), teacher_rng).location);
    };

    EpisodeRecord record;
    record.episode = e;
    record.controller = controller;
    AngleDeg a = act(s);
    for (int t = 1; t <= cfg.env.max_steps; ++t) {
      const Transition tr = step(s, a, t, cfg.env);
      AngleDeg next_a;
      if (!tr.done) next_a = act(tr.next_state);
      critic_td_update(critic, tr, next_a, cfg.env.gamma, cfg.critic_adam, scratch);
      if (is_student) {
        actor_dpg_update(actor, critic, tr.state, cfg.actor_adam, scratch);
      } else {
        actor_teacher_update(actor, tr.state, tr.action.value(), cfg.actor_adam, scratch);
      }
      if (with_replay) {
        buffer.push(tr);
        critic_batch_update(critic, actor, buffer.sample(replay_rng), cfg.env.gamma, cfg.critic_adam,
                            replay_scratch);
      }
      if (with_teacher) {
        selector_update(selector, tr.reward, is_student, cfg.selector);
        out.selector_log.push_back({tr.reward, is_student});
      }
      record.total_reward += tr.reward;
      record.steps = t;
      if (tr.done) {
        record.success = tr.reward == cfg.env.reward;
        break;
      }
      s = tr.next_state;
      a = is_student ? act(s) : next_a;
    }
    cumulative += record.total_reward;
    record.cumulative_reward = cumulative;
    record.avg_teacher = selector.avg_teacher;
    record.avg_student = selector.avg_student;
    out.episodes.push_back(record);

    if (cfg.eval_every > 0 && (e % cfg.eval_every == 0 || e == cfg.episodes)) {
      const EvalReport r = evaluate(actor, cfg.eval_step);
      out.actor_evals.push_back({e, r.rmse, r.zero_crossing});
    }
  }
  out.final_map = evaluate(actor, cfg.eval_step);
  return out;
}

/// Summary statistics over a run's episode log.
namespace metrics {

inline std::size_t window_count(std::size_t n, double fraction) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction)));
}

inline double mean_reward(const std::vector<EpisodeRecord>& eps, std::size_t begin, std::size_t end) {
  double sum = 0.0;
  for (std::size_t i = begin; i < end; ++i) sum += eps[i].total_reward;
  return sum / static_cast<double>(end - begin);
}

inline double leading_mean_reward(const std::vector<EpisodeRecord>& eps, double fraction = 0.1) {
  return mean_reward(eps, 0, window_count(eps.size(), fraction));
}

inline double trailing_mean_reward(const std::vector<EpisodeRecord>& eps, double fraction = 0.1) {
  return mean_reward(eps, eps.size() - window_count(eps.size(), fraction), eps.size());
}

inline double trailing_success_rate(const std::vector<EpisodeRecord>& eps, double fraction = 0.1) {
  const std::size_t n = window_count(eps.size(), fraction);
  std::size_t hits = 0;
  for (std::size_t i = eps.size() - n; i < eps.size(); ++i) hits += eps[i].success ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(n);
}

/// Least-squares slope of cumulative reward against episode index over the trailing window.
inline double trailing_cumulative_slope(const std::vector<EpisodeRecord>& eps, double fraction = 0.1) {
  const std::size_t n = window_count(eps.size(), fraction);
  if (n < 2) return 0.0;
  const std::size_t begin = eps.size() - n;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = begin; i < eps.size(); ++i) {
    mx += static_cast<double>(eps[i].episode);
    my += eps[i].cumulative_reward;
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = begin; i < eps.size(); ++i) {
    const double dx = static_cast<double>(eps[i].episode) - mx;
    sxy += dx * (eps[i].cumulative_reward - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

/// First episode whose preceding `window` episodes reach `rate` successes;
/// -1 if never.
inline long episodes_to_success_rate(const std::vector<EpisodeRecord>& eps, double rate, std::size_t window = 1000) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    hits += eps[i].success ? 1 : 0;
    if (i >= window) hits -= eps[i - window].success ? 1 : 0;
    if (i + 1 >= window && static_cast<double>(hits) >= rate * static_cast<double>(window)) return eps[i].episode;
  }
  return -1;
}

inline double trailing_student_fraction(const std::vector<EpisodeRecord>& eps, double fraction = 0.05) {
  const std::size_t n = window_count(eps.size(), fraction);
  std::size_t students = 0;
  for (std::size_t i = eps.size() - n; i < eps.size(); ++i) students += eps[i].controller == Controller::student;
  return static_cast<double>(students) / static_cast<double>(n);
}

}  // namespace metrics

}  // namespace ildmap
