#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "ildmap/rl.hpp"

using namespace ildmap;

namespace {

Transition terminal(double s, double a, double r) {
  return Transition{AngleDeg(s), AngleDeg(a), r, next_location(AngleDeg(s), AngleDeg(a)), true, 1};
}

// Q(s, a) = -|a - s| built from two relu hinges.
Network planted_bowl() {
  Network q = Network::zeros({{2, 2, Activation::relu}, {2, 1, Activation::identity}});
  auto& h = q.mutable_layer(0);
  h.weight(0, 0) = -1.0;
  h.weight(1, 0) = 1.0;
  h.weight(0, 1) = 1.0;
  h.weight(1, 1) = -1.0;
  q.mutable_layer(1).weights = {-1.0, -1.0};
  return q;
}

}  // namespace

TEST(Critic, ZeroCriticTerminalTdError) {
  Network critic = Network::zeros({{2, 4, Activation::relu}, {4, 1, Activation::identity}});
  EXPECT_EQ(critic_td_update(critic, terminal(10, 12, 100), AngleDeg(0), 0.99), -100.0);
}

TEST(Critic, FixedPointDoesNotMove) {
  RngStream rng(1);
  Network critic({{2, 8, Activation::relu}, {8, 1, Activation::identity}}, 0.0, rng);
  const double q = critic.predict_scalar(std::vector<double>{10.0, 12.0});
  const auto before = critic.flat_parameters();
  EXPECT_EQ(critic_td_update(critic, terminal(10, 12, q), AngleDeg(0), 0.99), 0.0);
  EXPECT_EQ(critic.flat_parameters(), before);
}

TEST(Critic, ZeroDiscountMatchesTerminal) {
  RngStream rng(2);
  const Network base({{2, 8, Activation::relu}, {8, 1, Activation::identity}}, 0.1, rng);
  Network a = base, b = base;
  Transition t = terminal(40, 10, -100);
  const double td_done = critic_td_update(a, t, AngleDeg(0), 0.99);
  t.done = false;
  const double td_gamma0 = critic_td_update(b, t, AngleDeg(25), 0.0);
  EXPECT_EQ(td_done, td_gamma0);
  EXPECT_EQ(a.flat_parameters(), b.flat_parameters());
}

// Two-step chain: (40, 10) -> 30 with -r, then (30, 30) terminal with +r.
TEST(Critic, ChainToyConvergesToDiscountedValues) {
  RngStream rng(3);
  Network critic = critic_architecture(rng, 0.0);
  const Transition first{AngleDeg(40), AngleDeg(10), -100.0, AngleDeg(30), false, 1};
  const Transition second = terminal(30, 30, 100.0);
  const Transition miss = terminal(-60, 50, -200.0);
  RlScratch scratch;
  for (int i = 0; i < 4000; ++i) {
    critic_td_update(critic, second, AngleDeg(0), 0.99, AdamConfig{}, scratch);
    critic_td_update(critic, first, AngleDeg(30), 0.99, AdamConfig{}, scratch);
    critic_td_update(critic, miss, AngleDeg(0), 0.99, AdamConfig{}, scratch);
  }
  AdamConfig settle;
  settle.learning_rate = 1e-4;
  for (int i = 0; i < 2000; ++i) {
    critic_td_update(critic, second, AngleDeg(0), 0.99, settle, scratch);
    critic_td_update(critic, first, AngleDeg(30), 0.99, settle, scratch);
    critic_td_update(critic, miss, AngleDeg(0), 0.99, settle, scratch);
  }
  EXPECT_NEAR(critic.predict_scalar(std::vector<double>{30, 30}), 100.0, 2.0);
  EXPECT_NEAR(critic.predict_scalar(std::vector<double>{40, 10}), -1.0, 2.0);
  EXPECT_NEAR(critic.predict_scalar(std::vector<double>{-60, 50}), -200.0, 2.0);
}

TEST(Critic, ActionGradientMatchesFiniteDifference) {
  RngStream rng(4);
  const Network critic = critic_architecture(rng);
  ForwardCache cache;
  int checked = 0;
  for (int i = 0; i < 50; ++i) {
    const double s = rng.uniform(-90, 90), a = rng.uniform(-90, 90), h = 1e-5;
    const double analytic = critic_action_gradient(critic, AngleDeg(s), a, cache);
    const double qp = critic.predict_scalar(std::vector<double>{s, a + h});
    const double qm = critic.predict_scalar(std::vector<double>{s, a - h});
    const double q0 = critic.predict_scalar(std::vector<double>{s, a});
    if (std::abs((qp - q0) - (q0 - qm)) > 1e-3 * h * std::max(1.0, std::abs(analytic))) continue;  // relu kink
    EXPECT_NEAR(analytic, (qp - qm) / (2 * h), 1e-4 * std::max(1.0, std::abs(analytic)));
    ++checked;
  }
  EXPECT_GE(checked, 40);
}

TEST(Actor, FlatCriticLeavesActor) {
  RngStream rng(5);
  Network actor = student_architecture(rng, InputMode::dense_then_relu, 0.0);
  const Network critic = Network::zeros({{2, 4, Activation::relu}, {4, 1, Activation::identity}});
  const auto before = actor.flat_parameters();
  for (int i = 0; i < 10; ++i) actor_dpg_update(actor, critic, AngleDeg(20));
  EXPECT_EQ(actor.flat_parameters(), before);
}

TEST(Actor, PlantedBowlPullsPolicyToSource) {
  RngStream rng(6);
  Network actor = student_architecture(rng);
  const Network critic = planted_bowl();
  const std::vector<double> in = {ild(AngleDeg(35))};
  const double start = std::abs(actor.predict_scalar(in) - 35.0);
  for (int i = 0; i < 2000; ++i) actor_dpg_update(actor, critic, AngleDeg(35));
  const double end = std::abs(actor.predict_scalar(in) - 35.0);
  EXPECT_LT(end, start);
  EXPECT_LT(end, 2.0);
}

TEST(Actor, TeacherUpdateMovesTowardEstimate) {
  RngStream rng(7);
  Network actor = student_architecture(rng);
  RlScratch scratch;
  const std::vector<double> in = {ild(AngleDeg(-50))};
  for (int i = 0; i < 2000; ++i) actor_teacher_update(actor, AngleDeg(-50), -40.0, AdamConfig{}, scratch);
  EXPECT_NEAR(actor.predict_scalar(in), -40.0, 2.0);
}

TEST(Selector, Examples) {
  SelectorConfig cfg;
  RngStream rng(8);
  SelectorState s = SelectorState::from(cfg);
  s.avg_student = 10;
  s.avg_teacher = 5;
  for (int i = 0; i < 100; ++i) ASSERT_EQ(selector_choose(s, cfg, rng), Controller::student);
  cfg.epsilon_student = 0.0;
  s.avg_student = -50;
  s.avg_teacher = 0;
  for (int i = 0; i < 100; ++i) ASSERT_EQ(selector_choose(s, cfg, rng), Controller::teacher);
  s.avg_student = s.avg_teacher = 0;
  EXPECT_EQ(selector_choose(s, cfg, rng), Controller::teacher);
}

TEST(Selector, OverrideFrequency) {
  SelectorConfig cfg;
  RngStream rng(9);
  SelectorState s = SelectorState::from(cfg);
  s.avg_student = -1;
  int student = 0;
  for (int i = 0; i < 10000; ++i) student += selector_choose(s, cfg, rng) == Controller::student;
  EXPECT_GE(student / 10000.0, 0.47);
  EXPECT_LE(student / 10000.0, 0.53);
  EXPECT_EQ(s.recent.size(), 1000u);
}

TEST(Selector, Recurrence) {
  const SelectorConfig cfg;
  SelectorState s = SelectorState::from(cfg);
  selector_update(s, 100, false, cfg);
  EXPECT_DOUBLE_EQ(s.avg_teacher, 0.5);
  EXPECT_EQ(s.avg_student, 0.0);
  selector_update(s, 100, true, cfg);
  EXPECT_DOUBLE_EQ(s.avg_student, 10.0);
  EXPECT_DOUBLE_EQ(s.avg_teacher, 0.5);
}

TEST(Selector, ConstantRewardGeometricApproach) {
  const SelectorConfig cfg;
  SelectorState s = SelectorState::from(cfg);
  for (int n = 1; n <= 200; ++n) {
    selector_update(s, 100, true, cfg);
    ASSERT_NEAR(s.avg_student, 100.0 * (1.0 - std::pow(0.9, n)), 1e-9);
  }
}

TEST(Selector, Validation) {
  SelectorConfig cfg;
  cfg.epsilon_student = 1.5;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Replay, FifoKeepsMostRecent) {
  ReplayBuffer buf(100, 8);
  for (int i = 0; i < 150; ++i) buf.push(terminal(0, 0, i));
  ASSERT_EQ(buf.size(), 100u);
  for (std::size_t i = 0; i < 100; ++i) ASSERT_EQ(buf.at(i).reward, 50.0 + static_cast<double>(i));
}

TEST(Replay, SampleDistinctAndUniform) {
  ReplayBuffer buf(100, 8);
  RngStream rng(10);
  EXPECT_TRUE(buf.sample(rng).empty());
  for (int i = 0; i < 100; ++i) buf.push(terminal(0, 0, i));
  std::vector<int> hits(100, 0);
  for (int k = 0; k < 10000; ++k) {
    const auto idx = buf.sample_indices(rng);
    ASSERT_EQ(idx.size(), 8u);
    ASSERT_EQ(std::set<std::size_t>(idx.begin(), idx.end()).size(), 8u);
    for (auto i : idx) ++hits[i];
  }
  for (int h : hits) {
    EXPECT_GE(h / 10000.0, 0.07);
    EXPECT_LE(h / 10000.0, 0.09);
  }
  EXPECT_THROW(ReplayBuffer(4, 8), std::invalid_argument);
}

TEST(Variants, Names) {
  for (auto v : {RlVariant::naive_dpg, RlVariant::dpg_replay, RlVariant::robust_rl, RlVariant::robust_rl_replay}) {
    EXPECT_EQ(rl_variant_from_string(to_string(v)), v);
  }
  EXPECT_THROW(rl_variant_from_string("dqn"), std::invalid_argument);
}

TEST(Algorithm, ZeroEpisodes) {
  RlConfig cfg;
  cfg.episodes = 0;
  RngStream rng(11);
  const RunArtifacts out = run_algorithm1(cfg, TeacherModel(TeacherConfig::preset_b()), rng);
  EXPECT_TRUE(out.episodes.empty());
  EXPECT_TRUE(out.selector_log.empty());
  RngStream init = RngStream(11).substream(0);
  EXPECT_EQ(out.actor.flat_parameters(), student_architecture(init).flat_parameters());
  EXPECT_EQ(out.critic.flat_parameters(), critic_architecture(init).flat_parameters());
}

TEST(Algorithm, ShortRunBookkeeping) {
  RlConfig cfg;
  cfg.episodes = 200;
  cfg.eval_every = 100;
  cfg.variant = RlVariant::robust_rl_replay;
  RngStream rng(12);
  const RunArtifacts out = run_algorithm1(cfg, TeacherModel(TeacherConfig::preset_b()), rng);
  ASSERT_EQ(out.episodes.size(), 200u);
  EXPECT_EQ(out.actor_evals.size(), 2u);
  double cumulative = 0.0;
  std::size_t steps = 0;
  for (const auto& e : out.episodes) {
    cumulative += e.total_reward;
    steps += static_cast<std::size_t>(e.steps);
    ASSERT_EQ(e.cumulative_reward, cumulative);
    ASSERT_GE(e.steps, 1);
    ASSERT_LE(e.steps, 2);
  }
  EXPECT_EQ(out.selector_log.size(), steps);
  // Replaying the log reproduces the stored averages exactly.
  SelectorState replay = SelectorState::from(cfg.selector);
  for (const auto& r : out.selector_log) selector_update(replay, r.reward, r.was_student, cfg.selector);
  EXPECT_EQ(replay.avg_teacher, out.selector.avg_teacher);
  EXPECT_EQ(replay.avg_student, out.selector.avg_student);
}

TEST(Algorithm, NaiveVariantNeverConsultsTeacher) {
  RlConfig cfg;
  cfg.episodes = 50;
  cfg.variant = RlVariant::naive_dpg;
  RngStream rng(13);
  const RunArtifacts out = run_algorithm1(cfg, TeacherModel(TeacherConfig::preset_b()), rng);
  for (const auto& e : out.episodes) ASSERT_EQ(e.controller, Controller::student);
  EXPECT_TRUE(out.selector_log.empty());
}

TEST(Metrics, Windows) {
  std::vector<EpisodeRecord> eps;
  double cum = 0.0;
  for (long i = 1; i <= 100; ++i) {
    EpisodeRecord r;
    r.episode = i;
    r.total_reward = i <= 50 ? -100.0 : 100.0;
    r.success = i > 50;
    r.controller = i > 95 ? Controller::student : Controller::teacher;
    cum += r.total_reward;
    r.cumulative_reward = cum;
    eps.push_back(r);
  }
  EXPECT_EQ(metrics::leading_mean_reward(eps), -100.0);
  EXPECT_EQ(metrics::trailing_mean_reward(eps), 100.0);
  EXPECT_EQ(metrics::trailing_success_rate(eps), 1.0);
  EXPECT_NEAR(metrics::trailing_cumulative_slope(eps), 100.0, 1e-9);
  EXPECT_EQ(metrics::trailing_student_fraction(eps), 1.0);
  EXPECT_EQ(metrics::episodes_to_success_rate(eps, 0.5, 20), 60);
  EXPECT_EQ(metrics::episodes_to_success_rate(eps, 0.5, 1000), -1);
}
